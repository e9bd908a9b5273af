#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>

#include "CLI11.hpp"
#include "trihom/cellsolver.hpp"
#include "trihom/config.hpp"
#include "trihom/nondim.hpp"
#include "trihom/pipeline.hpp"

using namespace trihom;
namespace fs = std::filesystem;

namespace {

constexpr int kOk = 0;
constexpr int kConfig = 2;
constexpr int kSolver = 3;
constexpr int kValidation = 4;

int exit_code(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::ConfigError:
    case ErrorKind::InvalidArgument:
    case ErrorKind::InvalidShape:
    case ErrorKind::NonPositiveInput:
    case ErrorKind::UnknownLabel:
    case ErrorKind::DisconnectedSubdomain:
    case ErrorKind::EmptyInterface:
      return kConfig;
    case ErrorKind::GridMismatch:
      return kValidation;
    default:
      return kSolver;
  }
}

int cell_solve(const std::string& config_path, const std::string& level, double tol, const std::string& out) {
  const RunConfig cfg = load_config(config_path);
  std::shared_ptr<const UnitCellGeometry> geom;
  ActiveLabels active;
  std::shared_ptr<const ConductivityField> coeff;
  const auto& c = cfg.conductivity;
  if (level == "meso") {
    geom = std::make_shared<const UnitCellGeometry>(build_cell(cfg.meso.grid, cfg.meso.shape, Level::Meso));
    active = c.extra_all ? ActiveLabels::all() : ActiveLabels::only(kExtra);
    coeff = std::make_shared<const ConductivityField>(c.extra_all ? ConductivityField::per_label(*geom, {c.extra, c.intra})
                                                                  : ConductivityField::uniform(geom->grid(), c.extra));
  } else {
    require(cfg.micro.has_value(), ErrorKind::ConfigError, "--level micro needs a [geometry.micro] section");
    geom = std::make_shared<const UnitCellGeometry>(build_cell(cfg.micro->grid, cfg.micro->shape, Level::Micro));
    active = ActiveLabels::only(kCytosol);
    coeff = std::make_shared<const ConductivityField>(ConductivityField::per_label(*geom, {c.intra, c.intra}));
  }
  auto disc = std::make_shared<const CellDiscretization>(geom, active, coeff);
  const auto fields = solve_all_correctors(disc, tol);
  std::printf("level=%s dofs=%ld tol=%.3g\n", level.c_str(), static_cast<long>(disc->dofs()), tol);
  std::printf("%-9s %-10s %-12s %-12s %-12s %-12s\n", "direction", "iterations", "residual", "compat", "max|chi|",
              "mean");
  for (const auto& f : fields) {
    LinearSystem sys{disc, disc->rhs(f.direction), f.direction};
    std::printf("%-9d %-10d %-12.4e %-12.4e %-12.4e %-12.4e\n", f.direction, f.iterations, f.residual,
                check_compatibility(sys), f.max_abs(), f.mean());
  }
  if (!out.empty()) {
    fs::create_directories(out);
    for (const auto& f : fields) {
      const std::string name = level + "_dir" + std::to_string(f.direction);
      std::ofstream file(fs::path(out) / (name + ".fld"), std::ios::binary);
      require(static_cast<bool>(file), ErrorKind::InvalidArgument, "cannot write into " + out);
      write_corrector(file, f, name);
    }
  }
  return kOk;
}

int tensors(const std::string& config_path, const std::string& out) {
  const RunConfig cfg = load_config(config_path);
  const TensorStage stage = compute_tensors(cfg, build_geometries(cfg));
  std::ofstream file(out);
  require(static_cast<bool>(file), ErrorKind::InvalidArgument, "cannot write " + out);
  write_tensors_csv(file, stage);
  for (const auto& row : stage.rows) {
    std::printf("%-16s", row.role.c_str());
    for (int p = 0; p < row.tensor.dim(); ++p)
      for (int q = 0; q < row.tensor.dim(); ++q) std::printf(" %12.8f", row.tensor.entries(p, q));
    std::printf("\n");
  }
  if (stage.mu_m > 0.0) std::printf("mu_m %.8f (staircase %.8f)\n", stage.mu_m, stage.mu_m_staircase);
  return kOk;
}

int macro_run(const std::string& config_path, const std::string& out) {
  const RunConfig cfg = load_config(config_path);
  require(cfg.macro.has_value(), ErrorKind::ConfigError, "missing [macro] section");
  std::optional<TensorStage> stage;
  if (cfg.macro->tensors != TensorSource::Explicit || cfg.macro->mu_auto)
    stage = compute_tensors(cfg, build_geometries(cfg));
  const MacroConfig mc = resolve_macro(cfg, stage ? &*stage : nullptr);
  const MacroRun run = write_macro_run(mc, out);
  std::printf("steps=%ld max|mean u_e|=%.3e max balance=%.3e\n", run.steps, run.max_abs_mean_ue,
              run.max_current_balance);
  for (int a = 0; a < mc.grid.dim; ++a) std::printf("velocity axis %d: %.6g\n", a, run.velocity[a]);
  return kOk;
}

int micro_run(const std::string& config_path, const std::string& out) {
  const RunConfig cfg = load_config(config_path);
  require(cfg.micro_run.has_value(), ErrorKind::ConfigError, "missing [micro] section");
  for (double eps : cfg.micro_run->epsilons) {
    const fs::path dir = fs::path(out) / ("eps_1_" + std::to_string(std::lround(1.0 / eps)));
    const MicroRun run = write_micro_run(micro_config(cfg, eps), dir);
    std::printf("epsilon=%g steps=%ld membrane_nodes=%zu max|mean u_e|=%.3e balance=%.3e -> %s\n", eps, run.steps,
                run.positions.size(), run.max_abs_mean_ue, run.max_current_balance, dir.c_str());
  }
  return kOk;
}

/// A micro directory is either one run (membrane.csv) or a parent of eps_* runs.
int validate(const std::string& micro, const std::string& macro, const std::string& out) {
  const MacroTrajectory mt = read_macro_dir(macro);
  std::vector<fs::path> runs;
  if (fs::exists(fs::path(micro) / "membrane.csv")) {
    runs.push_back(micro);
  } else {
    require(fs::is_directory(micro), ErrorKind::InvalidArgument, "not a directory: " + micro);
    for (const auto& e : fs::directory_iterator(micro))
      if (fs::exists(e.path() / "membrane.csv")) runs.push_back(e.path());
    std::sort(runs.begin(), runs.end());
    require(!runs.empty(), ErrorKind::InvalidArgument, "no micro runs under " + micro);
  }
  std::vector<ValidationRow> rows;
  for (const auto& dir : runs) {
    std::ifstream info(dir / "run.json");
    double eps = 0.0;
    if (info) eps = nlohmann::json::parse(info).value("epsilon", 0.0);
    rows.push_back({eps, "corrected", compare_to_macro(read_micro_dir(dir), mt)});
    std::printf("epsilon=%g rms=%.6e max=%.6e\n", eps, rows.back().report.rms, rows.back().report.max);
  }
  std::ofstream file(out);
  require(static_cast<bool>(file), ErrorKind::InvalidArgument, "cannot write " + out);
  write_report_csv(file, rows);
  const std::string verdict = validation_verdict(rows);
  if (!verdict.empty()) {
    std::fprintf(stderr, "validation failed: %s\n", verdict.c_str());
    return kValidation;
  }
  return kOk;
}

int nondim(const std::string& params) {
  std::cout << derive_scales(load_physical_params(params)).table();
  return kOk;
}

int pipeline(const std::string& config_path, const std::string& out) {
  const RunConfig cfg = load_config(config_path);
  const auto manifest = out.empty() ? run_pipeline(cfg) : run_pipeline(cfg, fs::path(out));
  for (const auto& s : manifest["stages"])
    std::printf("%-12s %8.2f s\n", s["name"].get<std::string>().c_str(), s["seconds"].get<double>());
  std::printf("output: %s\n", (out.empty() ? cfg.output.dir : out).c_str());
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Three-scale homogenization and bidomain simulation toolkit"};
  app.set_version_flag("--version", std::string("trihom ") + TRIHOM_VERSION);
  app.require_subcommand(1);

  std::string config, out, level = "meso", micro, macro, params;
  double tol = 1e-10;

  auto* cs = app.add_subcommand("cell-solve", "Solve the periodic corrector problems of one cell");
  cs->add_option("--config", config, "Run configuration (INI)")->required();
  cs->add_option("--level", level, "Cell level")->check(CLI::IsMember({"meso", "micro"}));
  cs->add_option("--tol", tol, "Relative residual tolerance")->check(CLI::PositiveNumber);
  cs->add_option("--out", out, "Directory for corrector field files");

  auto* ts = app.add_subcommand("tensors", "Compute homogenized tensors");
  ts->add_option("--config", config)->required();
  ts->add_option("--out", out, "CSV output")->required();

  auto* mr = app.add_subcommand("macro-run", "Run the homogenized bidomain model");
  mr->add_option("--config", config)->required();
  mr->add_option("--out", out, "Output directory")->required();

  auto* mi = app.add_subcommand("micro-run", "Run the micro-resolved reference model");
  mi->add_option("--config", config)->required();
  mi->add_option("--out", out, "Output directory")->required();

  auto* va = app.add_subcommand("validate", "Compare micro runs against a macro run");
  va->add_option("--micro", micro, "Micro run directory")->required();
  va->add_option("--macro", macro, "Macro run directory")->required();
  va->add_option("--out", out, "Report CSV")->required();

  auto* nd = app.add_subcommand("nondim", "Print the derived dimensionless scales");
  nd->add_option("--params", params, "Parameter file")->required();

  auto* pl = app.add_subcommand("pipeline", "Run every configured stage");
  pl->add_option("--config", config)->required();
  pl->add_option("--out", out, "Output directory (overrides [output] dir)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kConfig;
  }

  try {
    if (*cs) return cell_solve(config, level, tol, out);
    if (*ts) return tensors(config, out);
    if (*mr) return macro_run(config, out);
    if (*mi) return micro_run(config, out);
    if (*va) return validate(micro, macro, out);
    if (*nd) return nondim(params);
    if (*pl) return pipeline(config, out);
  } catch (const ValidationFailure& e) {
    std::fprintf(stderr, "validation failed: %s\n", e.what());
    return kValidation;
  } catch (const Error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return exit_code(e.kind());
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kSolver;
  }
  return kOk;
}
