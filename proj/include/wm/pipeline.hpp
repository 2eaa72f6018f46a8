#pragma once

#include "wm/association.hpp"
#include "wm/icm.hpp"
#include "wm/io.hpp"
#include "wm/mcmcda.hpp"

#include <optional>
#include <string>

namespace wm {

struct InferOptions {
  std::string algo = "icm-mcmc";  // gibbs | icm | mcmcda | icm-mcmc
  std::uint64_t seed = 0;
  int sweeps = 0;      // gibbs sweeps / icm sweep cap; 0 = default
  long samples = 0;    // mcmcda / second-stage samples; 0 = default
  int chains = 1;
  SamplerOptions gibbs;
  IcmOptions icm;
  McmcdaOptions mcmcda;
};

/// Throws InvalidInput for an unknown algorithm name or bad budgets.
void validate(const InferOptions& opt);

struct InferResult {
  std::string algo;
  std::uint64_t seed = 0;  // seed of the reported chain
  int chain = 0;
  std::vector<TrackId> labels;
  double score = kNegInf;  // global log score of `labels`
  std::vector<double> trace;
  long iterations = 0;
};

/// Runs `chains` independently seeded chains on separate threads and returns
/// the highest-scoring one (lowest chain index on ties). Chain c uses seed + c.
InferResult infer(const Dataset& data, const ModelConfig& cfg, const InferOptions& opt);

/// Deterministic run report. Wall time is included only when given.
Json run_report(const InferResult& r, const Dataset& data,
                const GroundTruth* truth, std::optional<double> wall_seconds = std::nullopt);

/// Pairwise and count accuracy as a JSON object.
Json accuracy_json(const Dataset& data, std::span<const TrackId> labels, const GroundTruth& truth);

}  // namespace wm
