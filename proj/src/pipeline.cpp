#include "trihom/pipeline.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <sstream>

#include "trihom/field_io.hpp"
#include "trihom/parallel.hpp"

namespace trihom {

namespace fs = std::filesystem;

namespace {

bool is_isotropic(const Matrix& m) {
  return m == isotropic(static_cast<int>(m.rows()), m(0, 0));
}

std::string step_name(const std::string& prefix, long step) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%08ld", step);
  return prefix + "_" + buf + ".fld";
}

std::ofstream open_out(const fs::path& path, bool binary = false) {
  std::ofstream out(path, binary ? std::ios::binary : std::ios::out);
  require(static_cast<bool>(out), ErrorKind::InvalidArgument, "cannot write " + path.string());
  return out;
}

std::vector<fs::path> sorted_files(const fs::path& dir, const std::string& prefix) {
  require(fs::is_directory(dir), ErrorKind::InvalidArgument, "not a directory: " + dir.string());
  std::vector<fs::path> out;
  for (const auto& e : fs::directory_iterator(dir)) {
    const auto name = e.path().filename().string();
    if (name.rfind(prefix, 0) == 0 && e.path().extension() == ".fld") out.push_back(e.path());
  }
  std::sort(out.begin(), out.end());
  return out;
}

double max_residual(const HomogenizedTensor& t) {
  double r = 0.0;
  for (double x : t.provenance.residuals) r = std::max(r, x);
  return r;
}

double relative_compatibility(const CellDiscretization& disc) {
  double worst = 0.0;
  for (int q = 0; q < disc.grid().dim; ++q) {
    const Eigen::VectorXd b = disc.rhs(q);
    const double sum = std::abs(b.sum()), norm = b.norm();
    if (sum > 0.0) worst = std::max(worst, norm > 0.0 ? sum / norm : std::numeric_limits<double>::infinity());
  }
  return worst;
}

std::string epsilon_dir(double eps) { return "eps_1_" + std::to_string(std::lround(1.0 / eps)); }

template <class F>
void run_stage(const std::string& name, nlohmann::json& stages, F&& body) {
  const auto t0 = std::chrono::steady_clock::now();
  try {
    body();
  } catch (const StageError&) {
    throw;
  } catch (const Error& e) {
    throw StageError(name, e);
  }
  stages.push_back({{"name", name},
                    {"seconds", std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count()}});
}

}  // namespace

Geometries build_geometries(const RunConfig& config) {
  Geometries g;
  g.meso = std::make_shared<const UnitCellGeometry>(build_cell(config.meso.grid, config.meso.shape, Level::Meso));
  if (config.micro)
    g.micro =
        std::make_shared<const UnitCellGeometry>(build_cell(config.micro->grid, config.micro->shape, Level::Micro));
  return g;
}

ConductivityField intracellular_field(const RunConfig& config, const UnitCellGeometry& meso) {
  const auto& grid = meso.grid();
  const auto& c = config.conductivity;
  if (!c.intra_y_laminate) return ConductivityField::uniform(grid, c.intra);
  const auto& lam = *c.intra_y_laminate;
  require(lam.axis < grid.dim, ErrorKind::ConfigError, "intra_y_laminate axis exceeds the cell dimension");
  const ShapeSpec slab = ShapeSpec::laminate(lam.axis, lam.fraction);
  std::vector<std::uint32_t> index(grid.voxel_count(), 0);
  for (std::size_t v = 0; v < grid.voxel_count(); ++v)
    if (slab.signed_distance(grid, grid.voxel_center(v)) < 0.0) index[v] = 1;
  return ConductivityField(grid, {c.intra, c.intra * lam.scale}, std::move(index));
}

TensorStage compute_tensors(const RunConfig& config, const Geometries& geometry) {
  TensorStage out;
  out.geometry = geometry;
  const auto& meso = geometry.meso;
  const auto& c = config.conductivity;
  HomogenizeOptions opts;
  opts.tolerance = config.tolerance;
  opts.allow_blocked = c.allow_blocked;

  const bool two_phase = meso->has_label(kExtra) && meso->has_label(kIntra);
  out.mu_m = two_phase ? membrane_ratio(*meso) : 0.0;
  out.mu_m_staircase = two_phase ? measure_staircase_interface(*meso) / meso->grid().cell_volume() : 0.0;

  auto add_row = [&](const HomogenizedTensor& t, const std::string& role,
                     const std::optional<TwoPhaseScalar>& phases) {
    out.rows.push_back({t, role, audit_tensor(t, phases)});
  };
  auto keep = [&](const std::string& prefix, const std::vector<CorrectorField>& fields) {
    for (const auto& f : fields) out.correctors.emplace_back(prefix + "_dir" + std::to_string(f.direction), f);
  };

  // Extracellular pass.
  {
    const ActiveLabels active = c.extra_all ? ActiveLabels::all() : ActiveLabels::only(kExtra);
    auto coeff = std::make_shared<const ConductivityField>(
        c.extra_all ? ConductivityField::per_label(*meso, {c.extra, c.intra})
                    : ConductivityField::uniform(meso->grid(), c.extra));
    auto cell = homogenize_cell(meso, active, coeff, TensorLevel::ExtraMeso, opts);
    out.max_compatibility = std::max(out.max_compatibility, relative_compatibility(*cell.discretization));
    std::optional<TwoPhaseScalar> phases;
    if (c.extra_all && two_phase && is_isotropic(c.extra) && is_isotropic(c.intra))
      phases = TwoPhaseScalar{measure_volume(*meso, kExtra), c.extra(0, 0), measure_volume(*meso, kIntra),
                              c.intra(0, 0)};
    out.extra = cell.tensor;
    out.extra_average = volume_average(*meso, active, *coeff, TensorLevel::ExtraMeso);
    add_row(*out.extra, "extra", phases);
    add_row(*out.extra_average, "extra_average", phases);
    keep("extra", cell.correctors);
  }

  if (c.intra_pass == IntraPass::None) return out;

  const ActiveLabels active = c.intra_pass == IntraPass::All ? ActiveLabels::all() : ActiveLabels::only(kIntra);
  const ConductivityField field = intracellular_field(config, *meso);
  double cytosol_fraction = 1.0;
  if (geometry.micro) {
    auto three = homogenize_intracellular(meso, active, geometry.micro, field, opts);
    out.max_compatibility = std::max(out.max_compatibility, relative_compatibility(*three.meso.discretization));
    out.intra = three.tensor;
    for (std::size_t j = 0; j < three.micro_tensors.size(); ++j) {
      add_row(three.micro_tensors[j], "intra_micro_" + std::to_string(j), std::nullopt);
      keep("intra_micro" + std::to_string(j), three.micro_correctors[j]);
    }
    keep("intra", three.meso.correctors);
    cytosol_fraction = measure_volume(*geometry.micro, kCytosol) / geometry.micro->grid().cell_volume();
  } else {
    auto coeff = std::make_shared<const ConductivityField>(field);
    auto cell = homogenize_cell(meso, active, coeff, TensorLevel::IntraTwoLevel, opts);
    out.max_compatibility = std::max(out.max_compatibility, relative_compatibility(*cell.discretization));
    out.intra = cell.tensor;
    keep("intra", cell.correctors);
  }
  out.intra_average = volume_average(*meso, active, field.scaled(cytosol_fraction), TensorLevel::IntraTwoLevel);

  std::optional<TwoPhaseScalar> phases;
  const bool hole_free = !geometry.micro || !geometry.micro->has_label(kMito);
  if (hole_free && c.intra_pass == IntraPass::All && c.intra_y_laminate && is_isotropic(c.intra)) {
    const auto& palette = field.palette();
    double n1 = 0.0;
    for (std::size_t v = 0; v < meso->grid().voxel_count(); ++v) n1 += field.palette_index(v);
    const double n = static_cast<double>(meso->grid().voxel_count());
    phases = TwoPhaseScalar{(n - n1) / n, palette[0](0, 0), n1 / n, palette[1](0, 0)};
  }
  add_row(*out.intra, "intra", phases);
  add_row(*out.intra_average, "intra_average", phases);
  return out;
}

void write_tensors_csv(std::ostream& out, const TensorStage& stage) {
  out << "role,level,corrected,dim";
  for (int p = 1; p <= 3; ++p)
    for (int q = 1; q <= 3; ++q) out << ",m" << p << q;
  out << ",eig1,eig2,eig3,symmetry_defect,mu_m,max_residual,tolerance,micro_solves,blocked,bounds\n";
  for (const auto& row : stage.rows) {
    const auto& t = row.tensor;
    const int d = t.dim();
    out << row.role << ',' << tensor_level_name(t.level) << ',' << (t.provenance.corrected ? 1 : 0) << ',' << d;
    for (int p = 0; p < 3; ++p)
      for (int q = 0; q < 3; ++q) {
        out << ',';
        if (p < d && q < d) out << format_double(t.entries(p, q));
      }
    for (int k = 0; k < 3; ++k) {
      out << ',';
      if (k < d) out << format_double(row.audit.eigenvalues[k]);
    }
    out << ',' << format_double(row.audit.symmetry_defect) << ',' << format_double(stage.mu_m) << ','
        << format_double(max_residual(t)) << ',' << format_double(t.provenance.tolerance) << ','
        << t.provenance.micro_solves << ',';
    bool first = true;
    for (int a = 0; a < d; ++a)
      if (t.provenance.blocked[a]) {
        out << (first ? "" : ";") << a;
        first = false;
      }
    out << ',' << (row.audit.bounds_checked ? (row.audit.bounds_hold ? "hold" : "violated") : "") << '\n';
  }
}

Matrix leading_block(const Matrix& m, int dim) {
  require(dim <= m.rows(), ErrorKind::ConfigError, "macro dimension exceeds the tensor dimension");
  return m.topLeftCorner(dim, dim);
}

MacroConfig resolve_macro(const RunConfig& config, const TensorStage* tensors) {
  require(config.macro.has_value(), ErrorKind::ConfigError, "missing [macro] section");
  const auto& section = *config.macro;
  MacroConfig run = section.run;
  run.ionic = config.ionic;
  const int d = run.grid.dim;
  if (section.tensors != TensorSource::Explicit) {
    require(tensors && tensors->extra && tensors->intra, ErrorKind::ConfigError,
            "[macro] tensors need both an extracellular and an intracellular pass");
    const bool corrected = section.tensors == TensorSource::Computed;
    run.m_e = leading_block((corrected ? *tensors->extra : *tensors->extra_average).entries, d);
    run.m_i = leading_block((corrected ? *tensors->intra : *tensors->intra_average).entries, d);
  }
  if (section.mu_auto) {
    require(tensors && tensors->mu_m > 0.0, ErrorKind::ConfigError,
            "mu_m = auto needs a meso cell with a membrane");
    run.mu_m = tensors->mu_m;
  }
  run.validate();
  return run;
}

MacroRun write_macro_run(const MacroConfig& config, const fs::path& dir) {
  fs::create_directories(dir);
  const auto& grid = config.grid;
  std::vector<int> shape;
  std::vector<double> lengths;
  for (int a = 0; a < grid.dim; ++a) {
    shape.push_back(grid.nodes(a));
    lengths.push_back(grid.lengths[a]);
  }
  auto dump = [&](const std::string& name, const Eigen::VectorXd& values, const MacroState& s) {
    FieldRecord rec;
    rec.name = name;
    rec.shape = shape;
    rec.attributes = {{"lengths", join_doubles(lengths)}, {"t", format_double(s.t)}, {"step", std::to_string(s.step)}};
    rec.values.assign(values.data(), values.data() + values.size());
    write_field_file((dir / step_name(name, s.step)).string(), rec);
  };
  MacroRun run = run_macro(config, [&](const MacroState& s) {
    dump("v", s.v, s);
    dump("ue", s.u_e, s);
    dump("w", s.w, s);
  });

  auto summary = open_out(dir / "summary.csv");
  summary << "t,v_min,v_max,w_min,w_max,ue_mean,ue_min,ue_max,activated_fraction\n";
  for (const auto& r : run.summary)
    summary << format_double(r.t) << ',' << format_double(r.v_min) << ',' << format_double(r.v_max) << ','
            << format_double(r.w_min) << ',' << format_double(r.w_max) << ',' << format_double(r.ue_mean) << ','
            << format_double(r.ue_min) << ',' << format_double(r.ue_max) << ',' << format_double(r.activated_fraction)
            << '\n';

  FieldRecord act;
  act.name = "activation";
  act.shape = shape;
  act.attributes = {{"lengths", join_doubles(lengths)},
                    {"threshold", format_double(config.activation_threshold)}};
  act.values = run.activation;
  write_field_file((dir / "activation.fld").string(), act);

  nlohmann::json info = {{"steps", run.steps},
                         {"max_abs_mean_ue", run.max_abs_mean_ue},
                         {"max_current_balance", run.max_current_balance},
                         {"mu_m", config.mu_m},
                         {"dt", config.dt},
                         {"t_final", config.t_final}};
  for (int a = 0; a < grid.dim; ++a)
    info["velocity"].push_back(std::isfinite(run.velocity[a]) ? nlohmann::json(run.velocity[a]) : nlohmann::json());
  open_out(dir / "run.json") << info.dump(2) << '\n';
  return run;
}

MicroConfig micro_config(const RunConfig& config, double epsilon) {
  require(config.micro_run.has_value(), ErrorKind::ConfigError, "missing [micro] section");
  require(!config.conductivity.intra_y_laminate, ErrorKind::ConfigError,
          "[micro] runs do not support intra_y_laminate");
  const auto& s = *config.micro_run;
  MicroConfig m;
  m.epsilon = epsilon;
  m.cell_resolution = s.cell_resolution;
  m.cell_shape = config.meso.shape;
  if (s.holes) {
    require(config.micro.has_value(), ErrorKind::ConfigError, "[micro] holes need [geometry.micro]");
    m.hole_shape = config.micro->shape;
    m.hole_cells = s.hole_cells;
  }
  m.m_i = config.conductivity.intra;
  m.m_e = config.conductivity.extra;
  m.ionic = config.ionic;
  m.dt = s.dt;
  m.t_final = s.t_final;
  m.stimuli = s.stimuli;
  m.v0 = s.v0;
  m.w0 = s.w0;
  m.patches = s.patches;
  m.tolerance = s.tolerance;
  m.snapshot_every = static_cast<int>(std::lround(s.t_final / s.dt)) / s.samples;
  m.validate();
  return m;
}

MicroRun write_micro_run(const MicroConfig& config, const fs::path& dir) {
  fs::create_directories(dir);
  MicroRun run = run_micro(config);
  auto csv = open_out(dir / "membrane.csv");
  csv << "x,y,weight\n";
  for (std::size_t k = 0; k < run.positions.size(); ++k)
    csv << format_double(run.positions[k][0]) << ',' << format_double(run.positions[k][1]) << ','
        << format_double(run.weights[static_cast<Eigen::Index>(k)]) << '\n';
  for (std::size_t s = 0; s < run.snapshots.size(); ++s) {
    FieldRecord rec;
    rec.name = "membrane_v";
    rec.shape = {static_cast<int>(run.snapshots[s].v.size())};
    rec.attributes = {{"t", format_double(run.snapshots[s].t)}, {"epsilon", format_double(config.epsilon)}};
    rec.values.assign(run.snapshots[s].v.data(), run.snapshots[s].v.data() + run.snapshots[s].v.size());
    write_field_file((dir / step_name("membrane_v", static_cast<long>(s))).string(), rec);
  }
  nlohmann::json info = {{"epsilon", config.epsilon},
                         {"resolution", config.resolution()},
                         {"steps", run.steps},
                         {"membrane_nodes", run.positions.size()},
                         {"max_abs_mean_ue", run.max_abs_mean_ue},
                         {"max_current_balance", run.max_current_balance},
                         {"max_trace_defect", run.max_trace_defect}};
  open_out(dir / "run.json") << info.dump(2) << '\n';
  return run;
}

MicroTrajectory read_micro_dir(const fs::path& dir) {
  MicroTrajectory tr;
  std::ifstream csv(dir / "membrane.csv");
  require(static_cast<bool>(csv), ErrorKind::InvalidArgument, "missing membrane.csv in " + dir.string());
  std::string line;
  std::getline(csv, line);
  std::vector<double> w;
  while (std::getline(csv, line)) {
    if (line.empty()) continue;
    Point p{};
    double weight = 0.0;
    require(std::sscanf(line.c_str(), "%lf,%lf,%lf", &p[0], &p[1], &weight) == 3, ErrorKind::InvalidArgument,
            "malformed membrane.csv line: " + line);
    tr.positions.push_back(p);
    w.push_back(weight);
  }
  tr.weights = Eigen::Map<const Eigen::VectorXd>(w.data(), static_cast<Eigen::Index>(w.size()));
  for (const auto& f : sorted_files(dir, "membrane_v_")) {
    const FieldRecord rec = read_field_file(f.string());
    require(rec.values.size() == w.size(), ErrorKind::GridMismatch, f.string() + " does not match membrane.csv");
    tr.snapshots.push_back({rec.number("t"), Eigen::Map<const Eigen::VectorXd>(
                                                 rec.values.data(), static_cast<Eigen::Index>(rec.values.size()))});
  }
  require(!tr.snapshots.empty(), ErrorKind::InvalidArgument, "no membrane snapshots in " + dir.string());
  return tr;
}

MacroTrajectory read_macro_dir(const fs::path& dir) {
  MacroTrajectory tr;
  const auto files = sorted_files(dir, "v_");
  require(!files.empty(), ErrorKind::InvalidArgument, "no v snapshots in " + dir.string());
  for (std::size_t i = 0; i < files.size(); ++i) {
    const FieldRecord rec = read_field_file(files[i].string());
    if (i == 0) {
      tr.grid.dim = static_cast<int>(rec.shape.size());
      std::stringstream ss(*rec.attribute("lengths"));
      std::string item;
      for (int a = 0; a < tr.grid.dim; ++a) {
        tr.grid.cells[a] = rec.shape[static_cast<std::size_t>(a)] - 1;
        std::getline(ss, item, ',');
        tr.grid.lengths[a] = std::stod(item);
      }
    }
    require(rec.values.size() == tr.grid.node_count(), ErrorKind::GridMismatch,
            files[i].string() + " has a different grid");
    tr.snapshots.push_back({rec.number("t"), Eigen::Map<const Eigen::VectorXd>(
                                                 rec.values.data(), static_cast<Eigen::Index>(rec.values.size()))});
  }
  return tr;
}

void write_report_csv(std::ostream& out, const std::vector<ValidationRow>& rows) {
  out << "epsilon,tensors,rms,max,samples,errors\n";
  for (const auto& r : rows) {
    out << format_double(r.epsilon) << ',' << r.tensors << ',' << format_double(r.report.rms) << ','
        << format_double(r.report.max) << ',' << r.report.errors.size() << ',';
    for (std::size_t k = 0; k < r.report.errors.size(); ++k) out << (k ? ";" : "") << format_double(r.report.errors[k]);
    out << '\n';
  }
}

std::string validation_verdict(const std::vector<ValidationRow>& rows) {
  std::vector<const ValidationRow*> corrected, average;
  for (const auto& r : rows) (r.tensors == "volume_average" ? average : corrected).push_back(&r);
  auto by_eps = [](const ValidationRow* a, const ValidationRow* b) { return a->epsilon > b->epsilon; };
  std::sort(corrected.begin(), corrected.end(), by_eps);
  std::sort(average.begin(), average.end(), by_eps);
  if (corrected.empty()) return "no validation rows";
  for (std::size_t k = 1; k < corrected.size(); ++k)
    if (!(corrected[k]->report.rms < corrected[k - 1]->report.rms))
      return "error does not decrease from epsilon " + format_double(corrected[k - 1]->epsilon) + " to " +
             format_double(corrected[k]->epsilon);
  if (!average.empty()) {
    const auto* c = corrected.back();
    for (const auto* a : average)
      if (a->epsilon == c->epsilon && !(c->report.rms < a->report.rms))
        return "corrected tensors do not beat volume averages at epsilon " + format_double(c->epsilon);
  }
  return "";
}

nlohmann::json run_pipeline(const RunConfig& config, const std::optional<fs::path>& out_dir) {
  const fs::path out = out_dir ? *out_dir : fs::path(config.output.dir);
  fs::create_directories(out);
  nlohmann::json manifest;
  manifest["tool"] = "trihom";
  manifest["version"] = TRIHOM_VERSION;
  manifest["config"] = config.source;
  manifest["threads"] = thread_limit();
  manifest["tolerances"] = {{"cell", config.tolerance}};
  nlohmann::json& stages = manifest["stages"] = nlohmann::json::array();

  Geometries geometry;
  run_stage("geometry", stages, [&] {
    geometry = build_geometries(config);
    auto meso_file = open_out(out / "labels_meso.bin", true);
    write_labels(meso_file, *geometry.meso);
    if (geometry.micro) {
      auto micro_file = open_out(out / "labels_micro.bin", true);
      write_labels(micro_file, *geometry.micro);
    }
  });

  TensorStage tensors;
  run_stage("tensors", stages, [&] {
    tensors = compute_tensors(config, geometry);
    std::ofstream csv = open_out(out / "tensors.csv");
    write_tensors_csv(csv, tensors);
    if (config.output.correctors) {
      fs::create_directories(out / "correctors");
      for (const auto& [name, field] : tensors.correctors) {
        auto file = open_out(out / "correctors" / (name + ".fld"), true);
        write_corrector(file, field, name);
      }
    }
  });
  nlohmann::json residuals = nlohmann::json::object();
  for (const auto& row : tensors.rows)
    if (row.tensor.provenance.corrected) residuals[row.role] = max_residual(row.tensor);
  manifest["residuals"] = residuals;
  manifest["compatibility"] = tensors.max_compatibility;
  manifest["mu_m"] = tensors.mu_m;

  if (config.macro) {
    run_stage("macro", stages, [&] {
      const MacroConfig mc = resolve_macro(config, &tensors);
      manifest["tolerances"]["macro_elliptic"] = mc.elliptic_tolerance;
      manifest["tolerances"]["macro_parabolic"] = mc.parabolic_tolerance;
      const MacroRun run = write_macro_run(mc, out / "macro");
      manifest["macro"] = {{"max_abs_mean_ue", run.max_abs_mean_ue},
                           {"max_current_balance", run.max_current_balance}};
    });
  }

  std::string verdict;
  if (config.micro_run) {
    const auto& ms = *config.micro_run;
    manifest["tolerances"]["micro"] = ms.tolerance;
    std::vector<ValidationRow> rows;
    run_stage("validation", stages, [&] {
      require(tensors.extra && tensors.intra, ErrorKind::ConfigError,
              "validation needs both an extracellular and an intracellular pass");
      require(tensors.mu_m > 0.0, ErrorKind::ConfigError, "validation needs a meso cell with a membrane");
      const long steps = std::lround(ms.t_final / ms.dt);
      MacroConfig base;
      base.grid.dim = ms.macro_dim;
      base.grid.cells = {ms.macro_cells, ms.macro_dim > 1 ? ms.macro_cells : 1, 1};
      base.grid.lengths = {1.0, 1.0, 1.0};
      base.dt = ms.dt;
      base.t_final = ms.t_final;
      base.mu_m = tensors.mu_m;
      base.ionic = config.ionic;
      base.stimuli = ms.stimuli;
      base.v0 = ms.v0;
      base.w0 = ms.w0;
      base.patches = ms.patches;
      base.snapshot_every = static_cast<int>(steps / ms.samples);
      std::vector<std::pair<std::string, MacroTrajectory>> macros;
      nlohmann::json macro_info = nlohmann::json::object();
      for (const std::string kind : {"corrected", "volume_average"}) {
        MacroConfig mc = base;
        const bool corrected = kind == "corrected";
        mc.m_e = leading_block((corrected ? *tensors.extra : *tensors.extra_average).entries, ms.macro_dim);
        mc.m_i = leading_block((corrected ? *tensors.intra : *tensors.intra_average).entries, ms.macro_dim);
        const fs::path dir = out / "validation" / ("macro_" + kind);
        const MacroRun run = write_macro_run(mc, dir);
        macro_info[kind] = {{"max_abs_mean_ue", run.max_abs_mean_ue}, {"max_current_balance", run.max_current_balance}};
        macros.emplace_back(kind, read_macro_dir(dir));
      }
      std::vector<double> eps = ms.epsilons;
      std::sort(eps.begin(), eps.end(), std::greater<>());
      nlohmann::json micro_info = nlohmann::json::array();
      for (double e : eps) {
        const fs::path dir = out / "micro" / epsilon_dir(e);
        const MicroRun run = write_micro_run(micro_config(config, e), dir);
        micro_info.push_back({{"epsilon", e},
                              {"max_abs_mean_ue", run.max_abs_mean_ue},
                              {"max_current_balance", run.max_current_balance}});
        const MicroTrajectory tr = read_micro_dir(dir);
        for (const auto& [kind, macro] : macros) rows.push_back({e, kind, compare_to_macro(tr, macro)});
      }
      manifest["micro"] = micro_info;
      manifest["validation_macro"] = macro_info;
      auto report_file = open_out(out / "validation" / "report.csv");
      write_report_csv(report_file, rows);
      verdict = validation_verdict(rows);
      nlohmann::json report = nlohmann::json::array();
      for (const auto& r : rows) report.push_back({{"epsilon", r.epsilon}, {"tensors", r.tensors}, {"rms", r.report.rms}});
      manifest["validation"] = {{"rows", report}, {"passed", verdict.empty()}, {"message", verdict}};
    });
  }

  open_out(out / "manifest.json") << manifest.dump(2) << '\n';
  if (!verdict.empty()) throw ValidationFailure(verdict);
  return manifest;
}

}  // namespace trihom
