#pragma once

#include "wm/simulator.hpp"
#include "wm/world_state.hpp"

#include "json.hpp"

#include <iosfwd>
#include <string>
#include <vector>

namespace wm {

using Json = nlohmann::ordered_json;

/// Raised for files that parse but disagree with each other (dimensions, view
/// sets, label counts).
struct DataInconsistency : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Model configuration. Scalars are accepted wherever a per-type list is
// expected, and a single matrix wherever a per-type list of matrices is.
ModelConfig model_config_from_json(const Json& j);
Json model_config_to_json(const ModelConfig& cfg);
ModelConfig load_model_config(const std::string& path);

SimConfig sim_config_from_json(const Json& j);
Json sim_config_to_json(const SimConfig& sim);

/// One JSON object per line:
/// {"epoch":t,"view":v,"region":{"min":[..],"max":[..]},"detections":[{"type":y,"pose":[..]}]}
/// Type ids are 1-based in the file. Blank lines are ignored.
Dataset read_dataset_jsonl(std::istream& in);
void write_dataset_jsonl(std::ostream& out, const Dataset& data);
Dataset load_dataset(const std::string& path);

/// One record per view, {"epoch":t,"view":v,"lambda":[..]}, 0 = false positive.
void write_assignments_jsonl(std::ostream& out, const Dataset& data, std::span<const TrackId> labels);
/// Per-observation labels in dataset order. Throws DataInconsistency when the
/// records do not cover the dataset's views exactly.
std::vector<TrackId> read_assignments_jsonl(std::istream& in, const Dataset& data);

struct EpochBeliefReport {
  int epoch = 0;
  int count = 0;
  Vec mean;
  Mat cov;
};

struct TrackReport {
  TrackId id = 0;
  int birth = 0;
  int death = 0;
  std::vector<double> type_pmf;
  std::vector<EpochBeliefReport> epochs;

  [[nodiscard]] int argmax_type() const;
};

std::vector<TrackReport> track_reports(const WorldState& state);
Json tracks_to_json(std::span<const TrackReport> tracks);
std::vector<TrackReport> tracks_from_json(const Json& j);

Json truth_to_json(const GroundTruth& truth, const Dataset& data);
GroundTruth truth_from_json(const Json& j, const Dataset& data);

Json read_json_file(const std::string& path);
void write_text_file(const std::string& path, const std::string& text);

}  // namespace wm
