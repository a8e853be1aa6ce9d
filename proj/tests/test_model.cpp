#include <cmath>
#include <functional>
#include <random>

#include "doctest.h"
#include "margulab/model.hpp"

using namespace ml;

namespace {

bool near_pt(const MTPoint& a, const MTPoint& b, double tol) { return distance(a, b) <= tol; }

// central differences of a point map in raw components, optional Richardson step
Mat3 jac_fd(const std::function<MTPoint(const MTPoint&)>& F, const MTPoint& x, double h, bool richardson = false) {
  auto once = [&](double hh) {
    Mat3 J;
    MTPoint fx = F(x);
    for (int j = 0; j < 3; ++j) {
      Eigen::Vector3d v = Eigen::Vector3d::Zero();
      v[j] = hh;
      Eigen::Vector3d dp = displacement(fx, F(offset(x, v)));
      Eigen::Vector3d dm = displacement(fx, F(offset(x, -v)));
      J.col(j) = (dp - dm) / (2 * hh);
    }
    return J;
  };
  if (!richardson) return once(h);
  return (4 * once(h / 2) - once(h)) / 3;
}

double rel_err(const Mat3& a, const Mat3& b) { return (a - b).cwiseAbs().maxCoeff() / b.cwiseAbs().maxCoeff(); }

MTPoint rnd_point(std::mt19937_64& g, double tlo = 0.0, double thi = 1.0) {
  std::uniform_real_distribution<double> u(0, 1), ut(tlo, thi);
  return MTPoint(TorusPoint(u(g), u(g)), ut(g));
}

}  // namespace

TEST_CASE("eigenvectors of A") {
  Eigen::Matrix2d A;
  A << 2, 1, 1, 1;
  // roots of l^2 - 3l + 1
  double lu = (3 + std::sqrt(5.0)) / 2, ls = (3 - std::sqrt(5.0)) / 2;
  CHECK((A * e_u() - lu * e_u()).norm() < 1e-14);
  CHECK((A * e_s() - ls * e_s()).norm() < 1e-14);
  CHECK(std::abs(e_u().dot(e_s())) < 1e-15);
  CHECK(kLambda == doctest::Approx(lu).epsilon(1e-15));
  CHECK(kLogLambda == doctest::Approx(std::log(lu)).epsilon(1e-15));
}

TEST_CASE("torus reduction and gluing on construction") {
  TorusPoint p(1.25, -0.5);
  CHECK(p.x == doctest::Approx(0.25));
  CHECK(p.y == doctest::Approx(0.5));
  MTPoint x(TorusPoint(0.5, 0.5), 1.0);
  CHECK(x.t == 0.0);
  CHECK(x.p.x == doctest::Approx(0.5));
  CHECK(x.p.y == doctest::Approx(0.0).epsilon(1e-15));
  // inside the seam band the point is glued once, not twice
  MTPoint y(TorusPoint(0.1, 0.2), 1.0 - 1e-15);
  CHECK(y.t == 0.0);
  CHECK(y.p.x == doctest::Approx(0.4));
  CHECK(y.p.y == doctest::Approx(0.3));
}

TEST_CASE("flow examples") {
  MTPoint a = flow(MTPoint(TorusPoint(0.2, 0.7), 0.5), 0.25);
  CHECK(a.p.x == doctest::Approx(0.2));
  CHECK(a.p.y == doctest::Approx(0.7));
  CHECK(a.t == doctest::Approx(0.75));
  MTPoint b = flow(MTPoint(TorusPoint(0.5, 0.5), 0.5), 0.5);
  // A (0.5, 0.5) = (1.5, 1.0)
  CHECK(b.p.x == doctest::Approx(0.5));
  CHECK(std::min(b.p.y, 1 - b.p.y) < 1e-14);
  CHECK(b.t == 0.0);
  MTPoint x(TorusPoint(0.31, 0.77), 0.42);
  CHECK(near_pt(flow(flow(x, 0.37), -0.37), x, 1e-12));
}

TEST_CASE("flow group law on random triples") {
  std::mt19937_64 g(7);
  std::uniform_real_distribution<double> us(-3, 3);
  double worst = 0;
  for (int i = 0; i < 10000; ++i) {
    MTPoint x = rnd_point(g);
    double s1 = us(g), s2 = us(g);
    worst = std::max(worst, distance(flow(x, s1 + s2), flow(flow(x, s1), s2)));
  }
  CHECK(worst <= 1e-10);
}

TEST_CASE("apply at eps = 0 is the time-one map") {
  std::mt19937_64 g(3);
  for (auto fam : {Family::TimeChange, Family::TransversalShear}) {
    MapDescriptor f{fam, 0.0, fam == Family::TimeChange ? Shape::Cos : Shape::Bump, Direction::Forward};
    for (int i = 0; i < 100; ++i) {
      MTPoint x = rnd_point(g);
      MTPoint y = apply(f, x);
      TorusPoint q = apply_A(x.p, 1);
      CHECK(std::abs(y.t - x.t) < 1e-13);
      CHECK(torus_diff(q, y.p).norm() < 1e-13);
    }
  }
}

TEST_CASE("apply examples") {
  MapDescriptor f{Family::TimeChange, 0.05, Shape::Cos, Direction::Forward};
  MTPoint x(TorusPoint(0.1, 0.2), 0.0);
  CHECK(near_pt(apply(f, x), flow(x, 1.05), 1e-14));
  MapDescriptor s{Family::TransversalShear, 0.3, Shape::Bump, Direction::Forward};
  MTPoint y(TorusPoint(0.3, 0.6), 0.0);
  CHECK(torus_diff(apply_A(y.p, 1), apply(s, y).p).norm() == 0.0);
}

TEST_CASE("inverse direction inverts apply") {
  std::mt19937_64 g(11);
  for (auto f : {MapDescriptor{Family::TimeChange, 0.05, Shape::Cos, Direction::Forward},
                 MapDescriptor{Family::TimeChange, 0.1, Shape::BumpX, Direction::Forward},
                 MapDescriptor{Family::TransversalShear, 0.2, Shape::Bump, Direction::Forward}}) {
    for (int i = 0; i < 200; ++i) {
      MTPoint x = rnd_point(g);
      CHECK(distance(apply(f.inverse(), apply(f, x)), x) < 1e-12);
    }
  }
}

TEST_CASE("invalid descriptors") {
  CHECK_THROWS_AS(validate({Family::TimeChange, 1.5, Shape::Cos, Direction::Forward}), LabError);
  CHECK_THROWS_AS(validate({Family::TimeChange, 0.2, Shape::Cos, Direction::Forward}), LabError);  // g not monotone
  CHECK_THROWS_AS(validate({Family::TimeChange, 0.1, Shape::Bump, Direction::Forward}), LabError);
  CHECK_THROWS_AS(validate({Family::TransversalShear, 0.1, Shape::Cos, Direction::Forward}), LabError);
  CHECK_NOTHROW(validate({Family::TimeChange, 0.05, Shape::Cos, Direction::Forward}));
  CHECK_NOTHROW(validate({Family::TransversalShear, 0.5, Shape::Bump, Direction::Inverse}));
  try {
    validate({Family::TimeChange, 1.5, Shape::Cos, Direction::Forward});
  } catch (const LabError& e) {
    CHECK(e.kind == ErrorKind::InvalidDescriptor);
    CHECK(std::string(e.what()).find("epsilon") != std::string::npos);
  }
}

TEST_CASE("bump shape") {
  CHECK(bump(0.0) == 0.0);
  CHECK(bump(1.0) == 0.0);
  CHECK(bump(0.5) == doctest::Approx(1.0));
  CHECK(bump(1e-3) < 1e-300);
  for (double t : {0.1, 0.3, 0.6, 0.85}) {
    double h = 1e-6;
    CHECK(bump_d(t) == doctest::Approx((bump(t + h) - bump(t - h)) / (2 * h)).epsilon(1e-7));
  }
}

TEST_CASE("differential at eps = 0") {
  double lu = (3 + std::sqrt(5.0)) / 2;
  std::mt19937_64 g(5);
  for (auto fam : {Family::TimeChange, Family::TransversalShear}) {
    MapDescriptor f{fam, 0.0, fam == Family::TimeChange ? Shape::Cos : Shape::Bump, Direction::Forward};
    MTPoint x = rnd_point(g);
    Mat3 D = differential(f, x);
    CHECK(D(0, 0) == doctest::Approx(1 / lu).epsilon(1e-14));
    CHECK(D(1, 1) == doctest::Approx(lu).epsilon(1e-14));
    CHECK(D(2, 2) == 1.0);
    CHECK(std::abs(D(0, 1)) + std::abs(D(1, 2)) + std::abs(D(2, 0)) == 0.0);
  }
}

TEST_CASE("differential matches finite differences") {
  std::mt19937_64 g(17);
  std::vector<MapDescriptor> fs = {
      {Family::TimeChange, 0.05, Shape::Cos, Direction::Forward},
      {Family::TimeChange, 0.05, Shape::Cos, Direction::Inverse},
      {Family::TimeChange, 0.1, Shape::BumpX, Direction::Forward},
      {Family::TimeChange, 0.1, Shape::BumpX, Direction::Inverse},
      {Family::TransversalShear, 0.3, Shape::Bump, Direction::Forward},
      {Family::TransversalShear, 0.3, Shape::Bump, Direction::Inverse},
  };
  for (const auto& f : fs) {
    double worst = 0;
    for (int i = 0; i < 50; ++i) {
      MTPoint x = rnd_point(g, 0.02, 0.98);
      auto F = [&](const MTPoint& y) { return apply(f, y); };
      worst = std::max(worst, rel_err(jac_fd(F, x, 1e-6), differential(f, x)));
    }
    CAPTURE(shape_name(f.shape));
    CAPTURE(direction_name(f.direction));
    CHECK(worst <= 1e-6);
  }
}

TEST_CASE("center-center entry is 1 + dtau along the flow") {
  MapDescriptor f{Family::TimeChange, 0.05, Shape::Cos, Direction::Forward};
  MTPoint x(TorusPoint(0.3, 0.1), 0.4);
  double h = 1e-5;
  // finite differences of the return time along an orbit segment
  double tp = tau(f, flow(x, h)), tm = tau(f, flow(x, -h));
  CHECK(differential(f, x)(2, 2) == doctest::Approx(1 + (tp - tm) / (2 * h)).epsilon(1e-9));
}

TEST_CASE("chain rule on compositions") {
  std::mt19937_64 g(23);
  std::vector<MapDescriptor> fs = {
      {Family::TimeChange, 0.05, Shape::Cos, Direction::Forward},
      {Family::TimeChange, 0.08, Shape::BumpX, Direction::Forward},
      {Family::TransversalShear, 0.2, Shape::Bump, Direction::Forward},
      {Family::TransversalShear, 0.2, Shape::Bump, Direction::Inverse},
  };
  double worst = 0;
  for (int i = 0; i < 40; ++i) {
    const auto& f = fs[i % fs.size()];
    const auto& h = fs[(i / 4 + 1) % fs.size()];
    MTPoint x = rnd_point(g, 0.05, 0.95);
    auto F = [&](const MTPoint& y) { return apply(f, apply(h, y)); };
    Mat3 D = differential(f, apply(h, x)) * differential(h, x);
    worst = std::max(worst, rel_err(jac_fd(F, x, 2e-4, true), D));
  }
  CHECK(worst <= 1e-8);
}

TEST_CASE("adapted metric") {
  MTPoint x(TorusPoint(0.2, 0.3), 0.7);
  CHECK(metric_norm(x, {0, 0, 1}) == 1.0);
  CHECK(metric_norm(MTPoint(TorusPoint(0.2, 0.3), 0.0), {1, 0, 0}) == 1.0);
  // e_u at (p, 1-) against D A e_u = lambda e_u at (A p, 0)
  CHECK(metric_norm(1.0, Eigen::Vector3d(0, 1, 0)) == doctest::Approx(metric_norm(0.0, Eigen::Vector3d(0, kLambda, 0))).epsilon(1e-14));
  std::mt19937_64 g(2);
  std::normal_distribution<double> n;
  double worst = 0;
  for (int i = 0; i < 1000; ++i) {
    Eigen::Vector3d v(n(g), n(g), n(g));
    Eigen::Vector3d w(v[0] / kLambda, v[1] * kLambda, v[2]);
    worst = std::max(worst, std::abs(metric_norm(1.0, v) - metric_norm(0.0, w)) / metric_norm(1.0, v));
  }
  CHECK(worst <= 1e-12);
}

TEST_CASE("slices") {
  std::mt19937_64 g(9);
  MapDescriptor f0{Family::TimeChange, 0.0, Shape::Cos, Direction::Forward};
  for (int i = 0; i < 100; ++i) {
    MTPoint x = rnd_point(g);
    CHECK(std::abs(apply(f0, x).t - x.t) < 1e-13);
  }
  MapDescriptor f{Family::TimeChange, 0.05, Shape::Cos, Direction::Forward};
  MTPoint w(TorusPoint(0.1, 0.1), 0.0);  // tau = 1.05 here
  CHECK(std::abs(apply(f, w).t - w.t) > 0.04);
}
