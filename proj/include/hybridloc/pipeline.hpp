#pragma once

#include <cstdint>
#include <filesystem>
#include <string>

#include "hybridloc/evalkit.hpp"
#include "hybridloc/fuse.hpp"
#include "hybridloc/minisfm.hpp"
#include "hybridloc/pnp.hpp"
#include "hybridloc/synthworld.hpp"
#include "hybridloc/vq3d.hpp"

// Pipeline orchestration: declarative configuration, the per-stage commands
// behind the CLI subcommands, and the run manifest. Stage seeds derive from
// the single global seed by fixed labels, so each stage is independently
// reproducible.

namespace hybridloc {

enum class Ablation { Hybrid, SfmOnly, PnpOnly };

std::string_view to_string(Ablation a);
std::optional<Ablation> ablation_from_string(std::string_view s);

struct PipelinePaths {
  std::string out_dir = "out";
  // Explicit input overrides; empty means <out_dir>/<standard name>.
  std::string scene, tracks, matches, detections, queries_gt;

  std::filesystem::path resolve(const std::string& explicit_path,
                                const char* standard_name) const;
  std::filesystem::path scene_path() const { return resolve(scene, "scene.txt"); }
  std::filesystem::path tracks_path() const { return resolve(tracks, "tracks.txt"); }
  std::filesystem::path matches_path() const { return resolve(matches, "matches.txt"); }
  std::filesystem::path detections_path() const { return resolve(detections, "detections.txt"); }
  std::filesystem::path queries_path() const { return resolve(queries_gt, "queries_gt.txt"); }
  std::filesystem::path out(const char* name) const {
    return std::filesystem::path(out_dir) / name;
  }
};

struct PipelineConfig {
  PipelinePaths paths;
  SceneConfig scene;
  NoiseSpec noise;      // seed field ignored: derived from the global seed
  RansacParams ransac;  // relocalization
  SfmParams sfm;
  UnionPolicy policy;
  Thresholds thresholds;
  PredictParams predict;
  Ablation ablation = Ablation::Hybrid;
  std::uint64_t seed = 1;
};

PipelineConfig default_config();
PipelineConfig load_config(const std::filesystem::path& path);
std::string config_to_json_string(const PipelineConfig& config);

// Stage commands; all throw on failure (StageDependencyError names a missing
// upstream artifact). Each writes its artifacts plus an updated manifest.
void cmd_synth(const PipelineConfig& config);
void cmd_sfm(const PipelineConfig& config);
void cmd_reloc(const PipelineConfig& config);
void cmd_fuse(const PipelineConfig& config);
void cmd_predict(const PipelineConfig& config);
void cmd_eval(const PipelineConfig& config);
// synth -> sfm -> reloc -> fuse -> predict -> eval, plus the SfM-only
// ablation and a two-row comparison table.
void cmd_run_all(const PipelineConfig& config);
void cmd_plot(const PipelineConfig& config);

// Full argument-parsing entry point used by the binary (and by tests).
int cli_main(int argc, const char* const* argv);

}  // namespace hybridloc
