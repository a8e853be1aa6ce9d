#pragma once
// Mapping torus of the cat map A = [[2,1],[1,1]], its suspension flow,
// the adapted metric and the two perturbation families.
#include <Eigen/Dense>
#include <string>

#include "margulab/errors.hpp"

namespace ml {

inline constexpr double kLambda = 2.6180339887498948482;     // (3+sqrt5)/2
inline constexpr double kLogLambda = 0.96242365011920689500;  // log kLambda
inline constexpr double kSeamTol = 1e-14;
inline constexpr double kTwoPi = 6.283185307179586477;

using Vec2 = Eigen::Vector2d;
using Mat3 = Eigen::Matrix3d;

// unit eigenvectors of A; A e_u = lambda e_u, A e_s = e_s / lambda
const Vec2& e_u();
const Vec2& e_s();

struct TorusPoint {
  double x = 0, y = 0;
  TorusPoint() = default;
  TorusPoint(double x_, double y_);  // reduces mod 1
  Vec2 vec() const { return {x, y}; }
};

TorusPoint apply_A(const TorusPoint& p, long k);  // A^k p mod 1, k may be negative
Vec2 torus_diff(const TorusPoint& a, const TorusPoint& b);  // b - a, shortest lattice rep

struct MTPoint {
  TorusPoint p;
  double t = 0;
  MTPoint() = default;
  // any real t; applies (p,1) ~ (A p, 0) so that t ends up in [0,1)
  MTPoint(const TorusPoint& p_, double t_);
  static MTPoint raw(const TorusPoint& p_, double t_) {
    MTPoint m;
    m.p = p_;
    m.t = t_;
    return m;
  }
};

// floor with the seam tolerance band
long seam_floor(double t);

struct AdaptedVector {
  double a = 0, b = 0, c = 0;  // along e_s, e_u, d/dt
  Eigen::Vector3d vec() const { return {a, b, c}; }
  static AdaptedVector of(const Eigen::Vector3d& v) { return {v[0], v[1], v[2]}; }
};

double metric_norm(const MTPoint& x, const AdaptedVector& v);
double metric_norm(double t, const Eigen::Vector3d& v);
// diag(lambda^-t, lambda^t, 1): raw components -> orthonormal components
Eigen::Vector3d ortho(double t, const Eigen::Vector3d& v);

MTPoint flow(const MTPoint& x, double s);
// first-order displacement from `from` to a nearby `to`, raw components at `from`
Eigen::Vector3d displacement(const MTPoint& from, const MTPoint& to);
double distance(const MTPoint& a, const MTPoint& b);
// move x by a raw displacement (a e_s + b e_u in the plane, c along the flow)
MTPoint offset(const MTPoint& x, const Eigen::Vector3d& raw);

enum class Family { TimeChange, TransversalShear };
enum class Shape { Cos, BumpX, Bump };
enum class Direction { Forward, Inverse };

std::string family_name(Family);
std::string shape_name(Shape);
std::string direction_name(Direction);
Family parse_family(const std::string&);
Shape parse_shape(const std::string&);
Direction parse_direction(const std::string&);

struct MapDescriptor {
  Family family = Family::TimeChange;
  double epsilon = 0;
  Shape shape = Shape::Cos;
  Direction direction = Direction::Forward;

  MapDescriptor inverse() const;
  // tau does not depend on p (or eps = 0): leaves are slice-horizontal
  bool t_only() const;
  bool operator==(const MapDescriptor&) const = default;
};

// throws InvalidDescriptor
void validate(const MapDescriptor& f);

double bump(double t);
double bump_d(double t);

// time-change roof of the forward map and its raw gradient (d/da, d/db, d/dt)
double tau(const MapDescriptor& f, const MTPoint& x);
Eigen::Vector3d tau_grad(const MapDescriptor& f, const MTPoint& x);
// tau evaluated from torus point + t directly (hot path)
double tau_pt(const MapDescriptor& f, double px, double t);
double tau_dt(const MapDescriptor& f, double px, double t);

// return time of the inverse: f^{-1}(x) = flow(x, -sigma)
double tau_inverse(const MapDescriptor& f, const MTPoint& x);

MTPoint apply(const MapDescriptor& f, const MTPoint& x);
MTPoint apply_n(const MapDescriptor& f, const MTPoint& x, int n);
Mat3 differential(const MapDescriptor& f, const MTPoint& x);

}  // namespace ml
