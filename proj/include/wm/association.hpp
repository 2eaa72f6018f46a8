#pragma once

#include "wm/world_state.hpp"

#include <cstdint>
#include <random>
#include <vector>

namespace wm {

using Rng = std::mt19937_64;

/// Per-observation labels of one view: kFalsePositive, an existing track id, or
/// an unused id standing for a new track.
using CorrespondenceVector = std::vector<TrackId>;

/// Forward case weights of one observation against a state that excludes its
/// view. Every weight already carries its log(1 - p_fp) or log p_fp factor.
struct CaseWeights {
  std::vector<std::pair<TrackId, double>> tracks;  // instantiated or dormant, ascending id
  double new_track = kNegInf;
  double fp = kNegInf;
};

/// `state` must hold the view's observations unassigned. Tracks with no
/// instantiation at or before the view's epoch are not candidates.
CaseWeights case_log_weights(const WorldState& state, int slot, int index);

/// Sequential product of case weights over lambda plus the detection / miss
/// product over tracks alive at the view's epoch. -inf on a CLC breach or when
/// lambda uses a track that is not a candidate. Throws InvalidInput when lambda
/// has the wrong length.
double view_joint_log_prob(const WorldState& state, int slot, std::span<const TrackId> lambda);

struct SamplerOptions {
  int max_enum_obs = 6;
  int max_enum_tracks = 12;
  long max_enum_size = 50000;
  double gate = 27.0;
  int gate_free_tracks = 4;  // with this many tracks or fewer, every track is a candidate
};

/// Exact conditional of one view given everything else. Built on a state whose
/// view is active with its observations unassigned. For choice c of observation
/// i (a candidate track index, kNew or kFp) the objective is
///   sum_i w(i, c_i) + log Bin(#FP; M, p_fp)
///   + sum over candidate tracks k left unused of miss(k)
/// where S' is a track's score with this view left out, w(i, k) = S(k + i) - S'(k),
/// miss(k) = S(k) - S'(k), w(i, new) = S({i}) and w(i, FP) is the clutter density.
/// Its difference between two choices equals the difference of the global score.
struct ViewProblem {
  static constexpr int kNew = -1;
  static constexpr int kFp = -2;

  int slot = 0;
  int m = 0;
  std::vector<TrackId> tracks;  // candidate tracks, ascending id
  Eigen::MatrixXd w;            // m x tracks; -inf where gated out
  std::vector<double> w_new;
  std::vector<double> w_fp;
  std::vector<double> miss;     // per candidate track
  std::vector<double> binom;    // log Bin(j; m, p_fp), j = 0..m

  [[nodiscard]] double weight(int i, int c) const;
  [[nodiscard]] double objective(std::span<const int> choice) const;
  /// Choice vector equivalent to a correspondence vector of the original state.
  [[nodiscard]] std::vector<int> choice_of(std::span<const TrackId> lambda) const;
  /// Number of CLC-valid choice vectors, saturating at `cap`.
  [[nodiscard]] long count_valid(long cap) const;
};

/// `keep` lists (observation index, track id) pairs that must stay candidates
/// even when gated out.
ViewProblem build_view_problem(const WorldState& state, int slot, const SamplerOptions& opt,
                               std::span<const std::pair<int, TrackId>> keep = {});

/// Applies a choice vector to the (cleared) view, creating fresh ids for new tracks.
CorrespondenceVector apply_choice(WorldState& state, const ViewProblem& problem,
                                  std::span<const int> choice);

/// Resamples one view's correspondence vector from its conditional. Exact
/// enumeration when the view is small, otherwise a sequential masked proposal
/// corrected by a Metropolis-Hastings step against the current labels. An
/// inactive view is activated first.
CorrespondenceVector sample_view(WorldState& state, int slot, Rng& rng,
                                 const SamplerOptions& opt = {});

/// All observations unassigned and all views inactive.
void reset_inactive(WorldState& state);

/// One pass over every view in (epoch, view) order.
void gibbs_sweep(WorldState& state, Rng& rng, const SamplerOptions& opt = {});

/// Score of a complete state; throws ContractViolation when a view is inactive
/// or holds unassigned observations.
double global_log_score(const WorldState& state);

struct GibbsResult {
  std::vector<TrackId> labels;       // final sweep
  std::vector<TrackId> best_labels;  // highest-scoring sweep
  double best_score = kNegInf;
  std::vector<double> trace;         // score after each sweep
};

/// Forward initialisation pass (views activated one by one) followed by
/// `sweeps` - 1 further sweeps.
GibbsResult run_gibbs(const Dataset& data, const ModelConfig& cfg, int sweeps, std::uint64_t seed,
                      const SamplerOptions& opt = {});

/// State whose labels are `labels` (all views active).
WorldState state_from_labels(const Dataset& data, const ModelConfig& cfg,
                             std::span<const TrackId> labels);

}  // namespace wm
