#pragma once

#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "trihom/geometry.hpp"
#include "trihom/ionic.hpp"
#include "trihom/macrosolver.hpp"
#include "trihom/nondim.hpp"
#include "trihom/types.hpp"

namespace trihom {

struct GeometryConfig {
  GridSpec grid;
  ShapeSpec shape;
};

/// Scales the intracellular conductivity by `scale` inside a laminate layer
/// of the meso cell, making the z-homogenized coefficient depend on y.
struct LaminateScaling {
  int axis = 0;
  double fraction = 0.5;
  double scale = 1.0;
};

enum class IntraPass { Intra, All, None };
enum class TensorSource { Computed, VolumeAverage, Explicit };

struct ConductivityConfig {
  Matrix extra;
  Matrix intra;
  std::optional<LaminateScaling> intra_y_laminate;
  bool extra_all = false;  // extracellular pass over both labels (hole-free two-phase cell)
  IntraPass intra_pass = IntraPass::Intra;
  bool allow_blocked = false;
};

struct MacroSection {
  MacroConfig run;  // tensors, mu_m and ionic filled in by the pipeline
  bool mu_auto = true;
  TensorSource tensors = TensorSource::Computed;
};

struct MicroSection {
  std::vector<double> epsilons;
  int cell_resolution = 32;
  bool holes = false;
  int hole_cells = 2;
  double dt = 0.01;
  double t_final = 1.0;
  int samples = 4;  // snapshots after the initial one
  double tolerance = 1e-12;
  int macro_cells = 256;
  int macro_dim = 2;  // 1: comparison macro runs on [0,1] along axis 0
  double v0 = 0.0;
  double w0 = 0.0;
  std::vector<InitialPatch> patches;
  std::vector<Stimulus> stimuli;
};

struct OutputConfig {
  std::string dir = "trihom-out";
  bool correctors = true;
};

struct RunConfig {
  std::string source;
  GeometryConfig meso;
  std::optional<GeometryConfig> micro;
  ConductivityConfig conductivity;
  FhnParams ionic;
  std::optional<MacroSection> macro;
  std::optional<MicroSection> micro_run;
  std::optional<PhysicalParams> nondim;
  double tolerance = 1e-10;
  OutputConfig output;
};

/// Parses and schema-checks an INI run configuration. Unknown sections or
/// keys, malformed values and out-of-range parameters throw ConfigError.
RunConfig load_config(const std::string& path);
RunConfig parse_config(std::istream& in, const std::string& source = "<stream>");

/// Reads physical parameters from a [nondim] section (or top-level keys).
PhysicalParams load_physical_params(const std::string& path);

/// `full`, `ball:c1,..,cd,r`, `laminate:axis,fraction`,
/// `box:c1,..,cd,h1,..,hd,corner_radius`, joined with `+` for unions.
ShapeSpec parse_shape(const std::string& text, int dim);
/// `box:c1,..,cd,h1,..,hd` or `ellipse:c1,..,cd,a1,..,ad`.
Region parse_region(const std::string& text, int dim);
/// One value (isotropic), d values (diagonal) or d*d values (row-major).
Matrix parse_tensor(const std::string& text, int dim);
std::vector<double> parse_list(const std::string& text);

}  // namespace trihom
