#include <fmt/format.h>

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <sstream>

#define TOML_EXCEPTIONS 1
#include <toml.hpp>

#include "margulab/labcli.hpp"

extern char** environ;

namespace ml {

namespace {

[[noreturn]] void bad(const std::string& key, const std::string& why) { throw LabError(ErrorKind::ConfigError, key + ": " + why, "config"); }

std::string dbl(double v) {
  std::string s = fmt::format("{}", v);
  if (s.find_first_of(".eni") == std::string::npos) s += ".0";
  return s;
}

std::string quoted(const std::string& s) {
  std::string o = "\"";
  for (char ch : s) {
    if (ch == '"' || ch == '\\') o += '\\';
    o += ch;
  }
  return o + "\"";
}

double as_double(const toml::node& n, const std::string& key) {
  if (auto v = n.value_exact<double>()) return *v;
  if (auto v = n.value_exact<std::int64_t>()) return static_cast<double>(*v);
  bad(key, "expected a number");
}

std::int64_t as_int(const toml::node& n, const std::string& key) {
  if (auto v = n.value_exact<std::int64_t>()) return *v;
  bad(key, "expected an integer");
}

struct Field {
  std::string section, key;
  std::function<void(LabConfig&, const toml::node&, const std::string&)> read;
  std::function<std::string(LabConfig&)> write;
  bool string_like = false;  // bare env values accepted
};

template <class Acc>
Field int_field(std::string s, std::string k, Acc acc, long lo, long hi = 1L << 40) {
  Field f{s, k, {}, {}, false};
  f.read = [acc, lo, hi](LabConfig& c, const toml::node& n, const std::string& name) {
    auto v = as_int(n, name);
    if (v < lo || v > hi) bad(name, fmt::format("must be in [{}, {}], got {}", lo, hi, v));
    acc(c) = static_cast<std::remove_reference_t<decltype(acc(c))>>(v);
  };
  f.write = [acc](LabConfig& c) { return fmt::format("{}", acc(c)); };
  return f;
}

template <class Acc>
Field dbl_field(std::string s, std::string k, Acc acc, double lo, double hi, bool open_lo = false) {
  Field f{s, k, {}, {}, false};
  f.read = [acc, lo, hi, open_lo](LabConfig& c, const toml::node& n, const std::string& name) {
    double v = as_double(n, name);
    if (!std::isfinite(v) || v < lo || v > hi || (open_lo && v == lo))
      bad(name, fmt::format("must be in {}{}, {}], got {}", open_lo ? "(" : "[", lo, hi, v));
    acc(c) = v;
  };
  f.write = [acc](LabConfig& c) { return dbl(acc(c)); };
  return f;
}

template <class Acc>
Field bool_field(std::string s, std::string k, Acc acc) {
  Field f{s, k, {}, {}, false};
  f.read = [acc](LabConfig& c, const toml::node& n, const std::string& name) {
    auto v = n.value_exact<bool>();
    if (!v) bad(name, "expected true or false");
    acc(c) = *v;
  };
  f.write = [acc](LabConfig& c) { return std::string(acc(c) ? "true" : "false"); };
  return f;
}

template <class Get, class Set>
Field str_field(std::string s, std::string k, Get get, Set set) {
  Field f{s, k, {}, {}, true};
  f.read = [set](LabConfig& c, const toml::node& n, const std::string& name) {
    auto v = n.value_exact<std::string>();
    if (!v) bad(name, "expected a string");
    try {
      set(c, *v);
    } catch (const LabError& e) {
      bad(name, e.what());
    }
  };
  f.write = [get](LabConfig& c) { return quoted(get(c)); };
  return f;
}

template <class Acc>
Field dlist_field(std::string s, std::string k, Acc acc, double lo, double hi) {
  Field f{s, k, {}, {}, false};
  f.read = [acc, lo, hi](LabConfig& c, const toml::node& n, const std::string& name) {
    const auto* a = n.as_array();
    if (!a) bad(name, "expected an array of numbers");
    std::vector<double> out;
    for (std::size_t i = 0; i < a->size(); ++i) {
      double v = as_double(*a->get(i), fmt::format("{}[{}]", name, i));
      if (!std::isfinite(v) || v < lo || v > hi) bad(fmt::format("{}[{}]", name, i), fmt::format("must be in [{}, {}]", lo, hi));
      out.push_back(v);
    }
    acc(c) = std::move(out);
  };
  f.write = [acc](LabConfig& c) {
    std::string o = "[";
    for (std::size_t i = 0; i < acc(c).size(); ++i) o += (i ? ", " : "") + dbl(acc(c)[i]);
    return o + "]";
  };
  return f;
}

// [nx, ny, nt] triples, or [nx, ny, nt, depth] rungs
Field box_field(std::string s, std::string k, std::function<BoxSpec&(LabConfig&)> acc) {
  Field f{s, k, {}, {}, false};
  f.read = [acc](LabConfig& c, const toml::node& n, const std::string& name) {
    const auto* a = n.as_array();
    if (!a || a->size() != 3) bad(name, "expected [nx, ny, nt]");
    int v[3];
    for (std::size_t i = 0; i < 3; ++i) {
      auto x = as_int(*a->get(i), name);
      if (x < 1 || x > 4096) bad(name, "resolutions must be in [1, 4096]");
      v[i] = static_cast<int>(x);
    }
    acc(c).nx = v[0], acc(c).ny = v[1], acc(c).nt = v[2];
  };
  f.write = [acc](LabConfig& c) { return fmt::format("[{}, {}, {}]", acc(c).nx, acc(c).ny, acc(c).nt); };
  return f;
}

Field ladder_field() {
  Field f{"entropy", "ladder", {}, {}, false};
  f.read = [](LabConfig& c, const toml::node& n, const std::string& name) {
    const auto* a = n.as_array();
    if (!a) bad(name, "expected an array of [nx, ny, nt, depth]");
    std::vector<BoxSpec> out;
    for (std::size_t i = 0; i < a->size(); ++i) {
      const auto* r = a->get(i)->as_array();
      std::string ni = fmt::format("{}[{}]", name, i);
      if (!r || r->size() != 4) bad(ni, "expected [nx, ny, nt, depth]");
      int v[4];
      for (std::size_t j = 0; j < 4; ++j) v[j] = static_cast<int>(as_int(*r->get(j), ni));
      if (v[0] < 1 || v[1] < 1 || v[2] < 1 || v[3] < 1 || v[0] > 1024 || v[1] > 1024 || v[2] > 1024 || v[3] > 8)
        bad(ni, "resolutions in [1, 1024], depth in [1, 8]");
      out.push_back(BoxSpec{v[0], v[1], v[2], v[3], c.box_samples});
    }
    c.dichotomy.ladder = std::move(out);
  };
  f.write = [](LabConfig& c) {
    std::string o = "[";
    for (std::size_t i = 0; i < c.dichotomy.ladder.size(); ++i) {
      const auto& b = c.dichotomy.ladder[i];
      o += fmt::format("{}[{}, {}, {}, {}]", i ? ", " : "", b.nx, b.ny, b.nt, b.depth);
    }
    return o + "]";
  };
  return f;
}

const std::vector<Field>& fields() {
  static const std::vector<Field> F = [] {
    std::vector<Field> v;
    v.push_back(str_field(
        "map", "family", [](LabConfig& c) { return family_name(c.map.family); },
        [](LabConfig& c, const std::string& s) { c.map.family = parse_family(s); }));
    v.push_back(dbl_field("map", "epsilon", [](LabConfig& c) -> double& { return c.map.epsilon; }, 0.0, 1e6));
    v.push_back(str_field(
        "map", "shape", [](LabConfig& c) { return shape_name(c.map.shape); },
        [](LabConfig& c, const std::string& s) { c.map.shape = parse_shape(s); }));
    v.push_back(str_field(
        "map", "direction", [](LabConfig& c) { return direction_name(c.map.direction); },
        [](LabConfig& c, const std::string& s) { c.map.direction = parse_direction(s); }));

    v.push_back(int_field("run", "seed", [](LabConfig& c) -> std::uint64_t& { return c.seed; }, 0));
    v.push_back(int_field("run", "workers", [](LabConfig& c) -> int& { return c.workers; }, 0, 4096));
    v.push_back(str_field(
        "run", "out", [](LabConfig& c) { return c.out; }, [](LabConfig& c, const std::string& s) { c.out = s; }));
    v.push_back(str_field(
        "run", "checkpoint", [](LabConfig& c) { return c.checkpoint; },
        [](LabConfig& c, const std::string& s) { c.checkpoint = s; }));

    v.push_back(int_field("margulis", "n_max", [](LabConfig& c) -> int& { return c.dichotomy.margulis.n_max; }, 1, 64));
    v.push_back(int_field("margulis", "window", [](LabConfig& c) -> int& { return c.dichotomy.margulis.window; }, 1, 64));
    v.push_back(dbl_field("margulis", "tol", [](LabConfig& c) -> double& { return c.dichotomy.margulis.tol; }, 0.0, 1.0, true));
    v.push_back(dbl_field("margulis", "chart_width", [](LabConfig& c) -> double& { return c.dichotomy.chart_width; }, 0.0, 0.5, true));
    v.push_back(int_field("margulis", "n_charts", [](LabConfig& c) -> int& { return c.dichotomy.n_charts; }, 1, 64));
    v.push_back(int_field("margulis", "cu_nw", [](LabConfig& c) -> int& { return c.dichotomy.cu_nw; }, 1, 4096));
    v.push_back(int_field("margulis", "cu_nc", [](LabConfig& c) -> int& { return c.dichotomy.cu_nc; }, 1, 4096));
    v.push_back(int_field("margulis", "nu", [](LabConfig& c) -> int& { return c.dichotomy.nu; }, 1, 4096));

    v.push_back(int_field("entropy", "curve_n", [](LabConfig& c) -> int& { return c.dichotomy.curve_n; }, 2, 60));
    v.push_back(dbl_field("entropy", "segment_half_width", [](LabConfig& c) -> double& { return c.segment_half_width; }, 0.0, 0.5, true));
    v.push_back(bool_field("entropy", "box_ladder", [](LabConfig& c) -> bool& { return c.dichotomy.box_ladder; }));
    v.push_back(int_field("entropy", "box_samples", [](LabConfig& c) -> int& { return c.box_samples; }, 1, 64));
    v.push_back(ladder_field());

    v.push_back(int_field("lyapunov", "n_samples", [](LabConfig& c) -> std::size_t& { return c.dichotomy.n_samples; }, 2, 10000000));
    v.push_back(int_field("lyapunov", "horizon", [](LabConfig& c) -> int& { return c.dichotomy.horizon; }, 1, 100000));

    v.push_back(int_field("quasi_product", "cover_m", [](LabConfig& c) -> int& { return c.dichotomy.cover_m; }, 1, 256));
    v.push_back(int_field("quasi_product", "n_profile", [](LabConfig& c) -> int& { return c.dichotomy.n_profile; }, 1, 1 << 16));
    v.push_back(int_field("quasi_product", "hist_samples", [](LabConfig& c) -> std::size_t& { return c.dichotomy.hist_samples; }, 1, 100000000));
    v.push_back(box_field("quasi_product", "hist_boxes", [](LabConfig& c) -> BoxSpec& { return c.dichotomy.hist_boxes; }));

    v.push_back(int_field("minimality", "n", [](LabConfig& c) -> int& { return c.dichotomy.minimality_n; }, 0, 40));
    v.push_back(box_field("minimality", "boxes", [](LabConfig& c) -> BoxSpec& { return c.dichotomy.minimality_boxes; }));

    v.push_back(dlist_field("holonomy", "sizes", [](LabConfig& c) -> std::vector<double>& { return c.holonomy_sizes; }, 1e-6, 0.5));
    v.push_back(int_field("holonomy", "nw", [](LabConfig& c) -> int& { return c.holonomy_nw; }, 1, 1024));
    v.push_back(int_field("holonomy", "nc", [](LabConfig& c) -> int& { return c.holonomy_nc; }, 1, 1024));
    v.push_back(dbl_field("holonomy", "t0", [](LabConfig& c) -> double& { return c.holonomy_t0; }, 0.0, 1.0));

    v.push_back(int_field("splitting", "points", [](LabConfig& c) -> int& { return c.splitting_points; }, 1, 1 << 20));
    v.push_back(int_field("splitting", "n", [](LabConfig& c) -> int& { return c.splitting.n; }, 1, 10000));
    v.push_back(dbl_field("splitting", "tol", [](LabConfig& c) -> double& { return c.splitting.tol; }, 0.0, 1.0, true));

    v.push_back(dlist_field("sweep", "epsilons", [](LabConfig& c) -> std::vector<double>& { return c.sweep_epsilons; }, 0.0, 1e6));
    return v;
  }();
  return F;
}

std::string upper(std::string s) {
  for (auto& ch : s) ch = static_cast<char>(std::toupper(static_cast<unsigned char>(ch)));
  return s;
}

void finalize(LabConfig& c) {
  c.dichotomy.seed = c.seed;
  for (auto& b : c.dichotomy.ladder) b.samples = c.box_samples;
  try {
    validate(c.map);
  } catch (const LabError& e) {
    std::string m = e.what();
    auto p = m.find(": ");
    bad("map." + (p == std::string::npos ? m : m.substr(p + 2)), "invalid map descriptor");
  }
  if (c.dichotomy.margulis.window > c.dichotomy.margulis.n_max) bad("margulis.window", "must not exceed margulis.n_max");
  if (c.holonomy_sizes.size() < 2) bad("holonomy.sizes", "need at least two sizes for the fit");
}

}  // namespace

EnvMap margulab_environment() {
  EnvMap m;
  for (char** e = environ; e && *e; ++e) {
    std::string s = *e;
    if (s.rfind("MARGULAB_", 0) != 0) continue;
    auto eq = s.find('=');
    if (eq == std::string::npos) continue;
    m[s.substr(0, eq)] = s.substr(eq + 1);
  }
  return m;
}

LabConfig parse_config(const std::string& text, const EnvMap& env) {
  toml::table tbl;
  try {
    tbl = toml::parse(text);
  } catch (const toml::parse_error& e) {
    const auto& b = e.source().begin;
    throw LabError(ErrorKind::ConfigError, fmt::format("line {}, column {}: {}", b.line, b.column, e.description()), "config");
  }
  LabConfig c;
  const auto& F = fields();
  for (auto&& [sk, sv] : tbl) {
    std::string sec(sk.str());
    const auto* st = sv.as_table();
    bool known = std::any_of(F.begin(), F.end(), [&](const Field& f) { return f.section == sec; });
    if (!known) bad(sec, "unknown section");
    if (!st) bad(sec, "expected a table");
    for (auto&& [kk, kv] : *st) {
      std::string key(kk.str());
      auto it = std::find_if(F.begin(), F.end(), [&](const Field& f) { return f.section == sec && f.key == key; });
      if (it == F.end()) bad(sec + "." + key, "unknown key");
      it->read(c, kv, sec + "." + key);
    }
  }
  for (const auto& [name, value] : env) {
    if (name.rfind("MARGULAB_", 0) != 0) continue;
    auto it = std::find_if(F.begin(), F.end(), [&](const Field& f) { return name == "MARGULAB_" + upper(f.section) + "_" + upper(f.key); });
    if (it == F.end()) bad(name, "unknown environment override");
    std::string label = name + " (" + it->section + "." + it->key + ")";
    toml::table one;
    try {
      one = toml::parse("v = " + value);
    } catch (const toml::parse_error&) {
      if (!it->string_like) bad(label, "cannot parse '" + value + "'");
      one = toml::table{{"v", value}};
    }
    if (it->string_like && !one["v"].is_string()) one = toml::table{{"v", value}};
    it->read(c, *one.get("v"), label);
  }
  finalize(c);
  return c;
}

LabConfig load_config(const std::string& path, const EnvMap& env) {
  std::ifstream in(path);
  if (!in) throw LabError(ErrorKind::ConfigError, "cannot open config file '" + path + "'", "config");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str(), env);
}

std::string to_toml(const LabConfig& c0) {
  LabConfig c = c0;
  std::string out, sec;
  for (const auto& f : fields()) {
    if (f.section != sec) {
      out += (sec.empty() ? "" : "\n") + fmt::format("[{}]\n", f.section);
      sec = f.section;
    }
    out += fmt::format("{} = {}\n", f.key, f.write(c));
  }
  return out;
}

std::string config_hash(const LabConfig& c0) {
  LabConfig c = c0;
  c.out.clear();
  c.checkpoint.clear();
  c.workers = 0;
  return sha256_hex(to_toml(c));
}

}  // namespace ml
