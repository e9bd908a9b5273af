#include "trihom/config.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include "trihom/error.hpp"

namespace trihom {

namespace {

using boost::property_tree::ptree;

[[noreturn]] void config_error(const std::string& what) { fail(ErrorKind::ConfigError, what); }

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

std::string strip_comment(const std::string& s) {
  for (std::size_t i = 0; i < s.size(); ++i)
    if ((s[i] == ';' || s[i] == '#') && (i == 0 || s[i - 1] == ' ' || s[i - 1] == '\t')) return trim(s.substr(0, i));
  return trim(s);
}

double parse_number(const std::string& text, const std::string& what) {
  const std::string t = trim(text);
  try {
    std::size_t used = 0;
    const double v = std::stod(t, &used);
    if (used != t.size()) throw std::invalid_argument(t);
    return v;
  } catch (const std::exception&) {
    config_error(what + ": '" + t + "' is not a number");
  }
}

int parse_int(const std::string& text, const std::string& what) {
  const double v = parse_number(text, what);
  if (v != std::floor(v) || std::abs(v) > 1e9) config_error(what + ": '" + text + "' is not an integer");
  return static_cast<int>(v);
}

bool parse_bool(const std::string& text, const std::string& what) {
  const std::string t = trim(text);
  if (t == "true" || t == "1" || t == "yes" || t == "on") return true;
  if (t == "false" || t == "0" || t == "no" || t == "off") return false;
  config_error(what + ": '" + t + "' is not a boolean");
}

/// Key/value view of one section with unknown-key detection.
class Section {
 public:
  Section(std::string name, std::map<std::string, std::string> values, std::set<std::string> allowed)
      : name_(std::move(name)), values_(std::move(values)) {
    for (const auto& [k, v] : values_)
      if (!allowed.count(k)) config_error("[" + name_ + "] unknown key '" + k + "'");
  }

  bool has(const std::string& key) const { return values_.count(key) > 0; }
  std::string str(const std::string& key) const {
    auto it = values_.find(key);
    if (it == values_.end()) config_error("[" + name_ + "] missing key '" + key + "'");
    return it->second;
  }
  std::string str(const std::string& key, const std::string& fallback) const { return has(key) ? str(key) : fallback; }
  double num(const std::string& key) const { return parse_number(str(key), where(key)); }
  double num(const std::string& key, double fallback) const { return has(key) ? num(key) : fallback; }
  int integer(const std::string& key, int fallback) const {
    return has(key) ? parse_int(str(key), where(key)) : fallback;
  }
  bool flag(const std::string& key, bool fallback) const { return has(key) ? parse_bool(str(key), where(key)) : fallback; }
  std::string where(const std::string& key) const { return "[" + name_ + "] " + key; }

 private:
  std::string name_;
  std::map<std::string, std::string> values_;
};

const std::map<std::string, std::set<std::string>>& schema() {
  static const std::set<std::string> region_keys = {"patch_region",       "patch_v",        "patch_w",
                                                    "stimulus_region",    "stimulus_amplitude",
                                                    "stimulus_start",     "stimulus_duration"};
  static const std::map<std::string, std::set<std::string>> s = [] {
    std::map<std::string, std::set<std::string>> m;
    m["geometry.meso"] = {"dim", "resolution", "lengths", "shape"};
    m["geometry.micro"] = {"dim", "resolution", "lengths", "shape"};
    m["conductivity"] = {"extra", "intra", "intra_y_laminate", "extra_pass", "intra_pass", "allow_blocked"};
    m["ionic"] = {"a", "b", "lambda", "theta"};
    m["solver"] = {"tol"};
    m["macro"] = {"dim",  "cells",   "lengths",       "dt", "T",      "mu_m",          "tensors",
                  "m_i",  "m_e",     "v0",            "w0", "snapshot_every", "activation_threshold",
                  "elliptic_tol"};
    m["micro"] = {"epsilon", "cell_resolution", "holes", "hole_cells", "dt", "T",
                  "samples", "tol",             "macro_cells", "macro_dim", "v0", "w0"};
    for (const auto& k : region_keys) {
      m["macro"].insert(k);
      m["micro"].insert(k);
    }
    m["nondim"] = {"ell_mes", "ell_mic", "L", "R_m", "C_m", "lambda_i", "lambda_e", "delta_v", "delta_w"};
    m["output"] = {"dir", "correctors"};
    return m;
  }();
  return s;
}

std::map<std::string, std::map<std::string, std::string>> read_sections(std::istream& in) {
  ptree pt;
  try {
    boost::property_tree::ini_parser::read_ini(in, pt);
  } catch (const boost::property_tree::ini_parser_error& e) {
    config_error(std::string("malformed INI: ") + e.what());
  }
  std::map<std::string, std::map<std::string, std::string>> out;
  for (const auto& [name, section] : pt) {
    if (section.empty()) config_error("top-level key '" + name + "' outside a section");
    if (!schema().count(name)) config_error("unknown section [" + name + "]");
    for (const auto& [key, value] : section) out[name][key] = strip_comment(value.data());
  }
  return out;
}

Section section(const std::map<std::string, std::map<std::string, std::string>>& all, const std::string& name) {
  auto it = all.find(name);
  return Section(name, it == all.end() ? std::map<std::string, std::string>{} : it->second, schema().at(name));
}

GeometryConfig parse_geometry(const Section& s, int dim) {
  GeometryConfig g;
  g.grid.dim = dim;
  const auto res = parse_list(s.str("resolution"));
  if (res.size() != 1 && res.size() != static_cast<std::size_t>(dim))
    config_error(s.where("resolution") + ": expected 1 or " + std::to_string(dim) + " values");
  for (int a = 0; a < dim; ++a) {
    const double r = res.size() == 1 ? res[0] : res[static_cast<std::size_t>(a)];
    if (r != std::floor(r)) config_error(s.where("resolution") + ": not an integer");
    g.grid.resolution[a] = static_cast<int>(r);
  }
  if (s.has("lengths")) {
    const auto len = parse_list(s.str("lengths"));
    if (len.size() != 1 && len.size() != static_cast<std::size_t>(dim))
      config_error(s.where("lengths") + ": expected 1 or " + std::to_string(dim) + " values");
    for (int a = 0; a < dim; ++a) g.grid.lengths[a] = len.size() == 1 ? len[0] : len[static_cast<std::size_t>(a)];
  }
  g.shape = parse_shape(s.str("shape", "full"), dim);
  try {
    g.grid.validate();
    g.shape.validate(g.grid);
  } catch (const Error& e) {
    config_error(s.where("shape/grid") + ": " + e.what());
  }
  return g;
}

template <class Target>
void parse_regions(const Section& s, int dim, Target& target_patches, std::vector<Stimulus>& stimuli) {
  if (s.has("patch_region")) {
    InitialPatch p;
    p.region = parse_region(s.str("patch_region"), dim);
    p.v = s.num("patch_v", 1.0);
    p.w = s.num("patch_w", 0.0);
    target_patches.push_back(p);
  } else if (s.has("patch_v") || s.has("patch_w")) {
    config_error(s.where("patch_v") + ": given without patch_region");
  }
  if (s.has("stimulus_region")) {
    Stimulus st;
    st.region = parse_region(s.str("stimulus_region"), dim);
    st.amplitude = s.num("stimulus_amplitude");
    st.t_on = s.num("stimulus_start", 0.0);
    const double duration = s.num("stimulus_duration");
    if (!(duration >= 0.0)) config_error(s.where("stimulus_duration") + ": must be >= 0");
    st.t_off = st.t_on + duration;
    stimuli.push_back(st);
  } else if (s.has("stimulus_amplitude") || s.has("stimulus_start") || s.has("stimulus_duration")) {
    config_error(s.where("stimulus_amplitude") + ": given without stimulus_region");
  }
}

void positive(double x, const std::string& what) {
  if (!(std::isfinite(x) && x > 0.0)) config_error(what + " must be positive");
}

PhysicalParams parse_physical(const Section& s) {
  PhysicalParams p;
  p.ell_mes = s.num("ell_mes", p.ell_mes);
  p.ell_mic = s.num("ell_mic", p.ell_mic);
  p.length = s.num("L", p.length);
  p.r_m = s.num("R_m", p.r_m);
  p.c_m = s.num("C_m", p.c_m);
  p.lambda_i = s.num("lambda_i", p.lambda_i);
  p.lambda_e = s.num("lambda_e", p.lambda_e);
  p.delta_v = s.num("delta_v", p.delta_v);
  p.delta_w = s.num("delta_w", p.delta_w);
  try {
    p.validate();
  } catch (const Error& e) {
    config_error(std::string("[nondim] ") + e.what());
  }
  return p;
}

}  // namespace

std::vector<double> parse_list(const std::string& text) {
  std::vector<double> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(parse_number(item, "list '" + text + "'"));
  if (out.empty()) config_error("empty list");
  return out;
}

ShapeSpec parse_shape(const std::string& text, int dim) {
  ShapeSpec shape;
  std::stringstream ss(text);
  std::string part;
  while (std::getline(ss, part, '+')) {
    part = trim(part);
    if (part == "full") continue;
    const auto colon = part.find(':');
    if (colon == std::string::npos) config_error("shape '" + part + "': expected kind:parameters");
    const std::string kind = trim(part.substr(0, colon));
    const auto v = parse_list(part.substr(colon + 1));
    const auto d = static_cast<std::size_t>(dim);
    if (kind == "ball") {
      if (v.size() != d + 1) config_error("ball needs " + std::to_string(d + 1) + " values");
      Ball b;
      for (int a = 0; a < dim; ++a) b.center[a] = v[static_cast<std::size_t>(a)];
      b.radius = v[d];
      shape.parts.emplace_back(b);
    } else if (kind == "laminate") {
      if (v.size() != 2 || v[0] != std::floor(v[0])) config_error("laminate needs axis,fraction");
      shape.parts.emplace_back(Laminate{static_cast<int>(v[0]), v[1]});
    } else if (kind == "box") {
      if (v.size() != 2 * d + 1) config_error("box needs " + std::to_string(2 * d + 1) + " values");
      RoundedBox b;
      for (int a = 0; a < dim; ++a) {
        b.center[a] = v[static_cast<std::size_t>(a)];
        b.half_widths[a] = v[d + static_cast<std::size_t>(a)];
      }
      b.corner_radius = v[2 * d];
      shape.parts.emplace_back(b);
    } else {
      config_error("unknown shape kind '" + kind + "'");
    }
  }
  return shape;
}

Region parse_region(const std::string& text, int dim) {
  const auto colon = text.find(':');
  if (colon == std::string::npos) config_error("region '" + text + "': expected box:... or ellipse:...");
  const std::string kind = trim(text.substr(0, colon));
  Region r;
  if (kind == "box")
    r.shape = RegionShape::Box;
  else if (kind == "ellipse")
    r.shape = RegionShape::Ellipse;
  else
    config_error("unknown region kind '" + kind + "'");
  const auto v = parse_list(text.substr(colon + 1));
  if (v.size() != static_cast<std::size_t>(2 * dim))
    config_error("region '" + text + "' needs " + std::to_string(2 * dim) + " values");
  for (int a = 0; a < dim; ++a) {
    r.center[a] = v[static_cast<std::size_t>(a)];
    r.semi_axes[a] = v[static_cast<std::size_t>(dim + a)];
    if (!(r.semi_axes[a] >= 0.0)) config_error("region semi-axes must be >= 0");
  }
  return r;
}

Matrix parse_tensor(const std::string& text, int dim) {
  const auto v = parse_list(text);
  const auto d = static_cast<std::size_t>(dim);
  Matrix m = Matrix::Zero(dim, dim);
  if (v.size() == 1) {
    m = isotropic(dim, v[0]);
  } else if (v.size() == d) {
    for (int a = 0; a < dim; ++a) m(a, a) = v[static_cast<std::size_t>(a)];
  } else if (v.size() == d * d) {
    for (int a = 0; a < dim; ++a)
      for (int b = 0; b < dim; ++b) m(a, b) = v[static_cast<std::size_t>(a * dim + b)];
  } else {
    config_error("tensor '" + text + "': expected 1, " + std::to_string(d) + " or " + std::to_string(d * d) + " values");
  }
  return m;
}

RunConfig parse_config(std::istream& in, const std::string& source) {
  const auto all = read_sections(in);
  RunConfig cfg;
  cfg.source = source;

  const Section gm = section(all, "geometry.meso");
  if (!all.count("geometry.meso")) config_error("missing section [geometry.meso]");
  const int dim = gm.integer("dim", 2);
  if (dim != 2 && dim != 3) config_error(gm.where("dim") + ": must be 2 or 3");
  cfg.meso = parse_geometry(gm, dim);
  if (all.count("geometry.micro")) {
    const Section gz = section(all, "geometry.micro");
    if (gz.integer("dim", dim) != dim) config_error(gz.where("dim") + ": must match the meso dimension");
    cfg.micro = parse_geometry(gz, dim);
  }

  const Section c = section(all, "conductivity");
  cfg.conductivity.extra = parse_tensor(c.str("extra", "1"), dim);
  cfg.conductivity.intra = parse_tensor(c.str("intra", "1"), dim);
  if (c.has("intra_y_laminate")) {
    const auto v = parse_list(c.str("intra_y_laminate"));
    if (v.size() != 3 || v[0] != std::floor(v[0]) || v[0] < 0 || v[0] >= dim || !(v[1] > 0 && v[1] < 1) ||
        !(v[2] > 0))
      config_error(c.where("intra_y_laminate") + ": expected axis,fraction,scale with 0<fraction<1, scale>0");
    cfg.conductivity.intra_y_laminate = LaminateScaling{static_cast<int>(v[0]), v[1], v[2]};
  }
  const std::string ep = c.str("extra_pass", "extra");
  if (ep != "extra" && ep != "all") config_error(c.where("extra_pass") + ": expected extra|all");
  cfg.conductivity.extra_all = ep == "all";
  const std::string ip = c.str("intra_pass", "intra");
  if (ip == "intra")
    cfg.conductivity.intra_pass = IntraPass::Intra;
  else if (ip == "all")
    cfg.conductivity.intra_pass = IntraPass::All;
  else if (ip == "none")
    cfg.conductivity.intra_pass = IntraPass::None;
  else
    config_error(c.where("intra_pass") + ": expected intra|all|none");
  cfg.conductivity.allow_blocked = c.flag("allow_blocked", false);

  const Section io = section(all, "ionic");
  cfg.ionic.a = io.num("a", cfg.ionic.a);
  cfg.ionic.b = io.num("b", cfg.ionic.b);
  cfg.ionic.lambda = io.num("lambda", cfg.ionic.lambda);
  cfg.ionic.theta = io.num("theta", cfg.ionic.theta);
  try {
    cfg.ionic.validate();
  } catch (const Error& e) {
    config_error(std::string("[ionic] ") + e.what());
  }

  const Section sv = section(all, "solver");
  cfg.tolerance = sv.num("tol", cfg.tolerance);
  positive(cfg.tolerance, sv.where("tol"));

  if (all.count("macro")) {
    const Section m = section(all, "macro");
    MacroSection ms;
    MacroConfig& r = ms.run;
    r.grid.dim = m.integer("dim", dim);
    if (r.grid.dim < 1 || r.grid.dim > dim) config_error(m.where("dim") + ": must be between 1 and the cell dimension");
    const auto cells = parse_list(m.str("cells", "64"));
    const auto lengths = parse_list(m.str("lengths", "1"));
    const auto md = static_cast<std::size_t>(r.grid.dim);
    if ((cells.size() != 1 && cells.size() != md) || (lengths.size() != 1 && lengths.size() != md))
      config_error(m.where("cells/lengths") + ": expected 1 or " + std::to_string(md) + " values");
    for (int a = 0; a < r.grid.dim; ++a) {
      const double n = cells.size() == 1 ? cells[0] : cells[static_cast<std::size_t>(a)];
      if (n != std::floor(n) || n < r.min_cells)
        config_error(m.where("cells") + ": need an integer >= " + std::to_string(r.min_cells));
      r.grid.cells[a] = static_cast<int>(n);
      r.grid.lengths[a] = lengths.size() == 1 ? lengths[0] : lengths[static_cast<std::size_t>(a)];
      positive(r.grid.lengths[a], m.where("lengths"));
    }
    r.dt = m.num("dt", r.dt);
    positive(r.dt, m.where("dt"));
    r.t_final = m.num("T", r.t_final);
    if (!(std::isfinite(r.t_final) && r.t_final >= 0.0)) config_error(m.where("T") + " must be >= 0");
    const std::string mu = m.str("mu_m", "auto");
    ms.mu_auto = mu == "auto";
    if (!ms.mu_auto) {
      r.mu_m = parse_number(mu, m.where("mu_m"));
      positive(r.mu_m, m.where("mu_m"));
    }
    const std::string ts = m.str("tensors", "computed");
    if (ts == "computed")
      ms.tensors = TensorSource::Computed;
    else if (ts == "volume_average")
      ms.tensors = TensorSource::VolumeAverage;
    else if (ts == "explicit")
      ms.tensors = TensorSource::Explicit;
    else
      config_error(m.where("tensors") + ": expected computed|volume_average|explicit");
    if (ms.tensors == TensorSource::Explicit) {
      r.m_i = parse_tensor(m.str("m_i"), r.grid.dim);
      r.m_e = parse_tensor(m.str("m_e"), r.grid.dim);
    } else if (m.has("m_i") || m.has("m_e")) {
      config_error(m.where("m_i") + ": only allowed with tensors = explicit");
    }
    r.v0 = m.num("v0", 0.0);
    r.w0 = m.num("w0", 0.0);
    parse_regions(m, r.grid.dim, r.patches, r.stimuli);
    r.snapshot_every = m.integer("snapshot_every", 0);
    if (r.snapshot_every < 0) config_error(m.where("snapshot_every") + " must be >= 0");
    r.activation_threshold = m.num("activation_threshold", r.activation_threshold);
    r.elliptic_tolerance = m.num("elliptic_tol", r.elliptic_tolerance);
    positive(r.elliptic_tolerance, m.where("elliptic_tol"));
    cfg.macro = ms;
  }

  if (all.count("micro")) {
    const Section m = section(all, "micro");
    if (dim != 2) config_error("[micro] requires a 2D meso cell");
    MicroSection ms;
    ms.epsilons = parse_list(m.str("epsilon", "0.5,0.25,0.125"));
    for (double e : ms.epsilons) {
      const double inv = 1.0 / e;
      if (!(e > 0.0) || std::abs(inv - std::round(inv)) > 1e-9 || std::round(inv) > 8)
        config_error(m.where("epsilon") + ": each value must be 1/m with integer m <= 8");
    }
    ms.cell_resolution = m.integer("cell_resolution", ms.cell_resolution);
    if (ms.cell_resolution < 4) config_error(m.where("cell_resolution") + " must be >= 4");
    ms.holes = m.flag("holes", false);
    if (ms.holes && !cfg.micro) config_error(m.where("holes") + ": needs a [geometry.micro] section");
    ms.hole_cells = m.integer("hole_cells", ms.hole_cells);
    if (ms.hole_cells < 1) config_error(m.where("hole_cells") + " must be >= 1");
    ms.dt = m.num("dt", ms.dt);
    positive(ms.dt, m.where("dt"));
    ms.t_final = m.num("T", ms.t_final);
    if (!(std::isfinite(ms.t_final) && ms.t_final >= 0.0)) config_error(m.where("T") + " must be >= 0");
    ms.samples = m.integer("samples", ms.samples);
    if (ms.samples < 1) config_error(m.where("samples") + " must be >= 1");
    const long steps = std::lround(ms.t_final / ms.dt);
    if (steps % ms.samples != 0)
      config_error(m.where("samples") + ": T/dt = " + std::to_string(steps) + " is not a multiple of samples");
    ms.tolerance = m.num("tol", ms.tolerance);
    positive(ms.tolerance, m.where("tol"));
    ms.macro_cells = m.integer("macro_cells", ms.macro_cells);
    if (ms.macro_cells < 16) config_error(m.where("macro_cells") + " must be >= 16");
    ms.macro_dim = m.integer("macro_dim", ms.macro_dim);
    if (ms.macro_dim != 1 && ms.macro_dim != 2) config_error(m.where("macro_dim") + " must be 1 or 2");
    ms.v0 = m.num("v0", 0.0);
    ms.w0 = m.num("w0", 0.0);
    parse_regions(m, 2, ms.patches, ms.stimuli);
    cfg.micro_run = ms;
  }

  if (all.count("nondim")) cfg.nondim = parse_physical(section(all, "nondim"));

  const Section out = section(all, "output");
  cfg.output.dir = out.str("dir", cfg.output.dir);
  cfg.output.correctors = out.flag("correctors", cfg.output.correctors);
  return cfg;
}

RunConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) config_error("cannot open config file " + path);
  return parse_config(in, path);
}

PhysicalParams load_physical_params(const std::string& path) {
  std::ifstream in(path);
  if (!in) config_error("cannot open parameter file " + path);
  std::stringstream buffer;
  buffer << in.rdbuf();
  std::string text = buffer.str();
  // Accept a bare key list as well as a [nondim] section.
  if (text.find('[') == std::string::npos) text = "[nondim]\n" + text;
  std::istringstream ss(text);
  const auto all = read_sections(ss);
  for (const auto& [name, values] : all)
    if (name != "nondim") config_error("parameter file may only contain [nondim]");
  return parse_physical(section(all, "nondim"));
}

}  // namespace trihom
