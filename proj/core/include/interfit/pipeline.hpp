#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <stdexcept>
#include <string>
#include <string_view>

#include "interfit/energy.hpp"
#include "interfit/optimizer.hpp"
#include "interfit/synth.hpp"

namespace interfit {

/// Rejected configuration text. The message names the offending key or line.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Everything a pipeline command needs. Energy weights are shared by all stages.
struct PipelineConfig {
  std::filesystem::path seq_dir;
  std::filesystem::path out_dir;  // defaults to seq_dir when empty
  std::uint64_t seed = 0;
  int threads = 1;

  EnergyWeights weights;
  TrackingOptions tracking;
  BodyFitOptions body;
  RefineOptions refine;
  bool contact = true;  // false runs refinement without the contact terms

  // synth
  ObjectKind object = ObjectKind::cube;
  int frames = 60;
  int views = 4;
  double rig_radius = 2.0;
  double focal = 120.0;
  int width = 160;
  int height = 120;
  int cloud_stride = 2;
  std::uint64_t body_seed = 0;
  NoiseConfig noise;

  // eval: "auto" (fitted.json when present, else gt.json), "fitted" or "ground_truth"
  std::string eval_source = "auto";
  int accel_stride = 7;

  int gradcheck_configurations = 20;
  double gradcheck_tolerance = 1e-4;

  std::filesystem::path output_dir() const { return out_dir.empty() ? seq_dir : out_dir; }
};

/// Parses a sectioned key = value document ("[weights]\nlambda_D = 30").
/// Keys outside any section are accepted when their name belongs to exactly
/// one section. Omitted keys keep their defaults.
PipelineConfig parse_config(std::string_view text);
PipelineConfig load_config(const std::filesystem::path& path);

/// The full schema with default values, as a parseable document.
std::string default_config_text();

// Output file names inside the output directory.
inline constexpr const char* kTrackFile = "object_track.json";
inline constexpr const char* kFittedFramesFile = "fitted_frames.json";
inline constexpr const char* kFittedFile = "fitted.json";
inline constexpr const char* kReportDir = "report";

/// Command runners. They return the process exit status and log progress to
/// `log`; domain and I/O failures are thrown.
int run_synth(const PipelineConfig& cfg, std::ostream& log);
int run_track_object(const PipelineConfig& cfg, std::ostream& log);
int run_fit_body(const PipelineConfig& cfg, std::ostream& log);
int run_refine(const PipelineConfig& cfg, std::ostream& log);
int run_eval(const PipelineConfig& cfg, std::ostream& log);
int run_gradcheck(const PipelineConfig& cfg, std::ostream& log);

/// Dispatches by command name; unknown names throw ConfigError.
int run_command(std::string_view command, const PipelineConfig& cfg, std::ostream& log);

}  // namespace interfit
