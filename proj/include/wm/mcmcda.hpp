#pragma once

#include "wm/icm.hpp"

#include <array>
#include <map>

namespace wm {

/// Unit of association moved by the sampler: one observation (full mode) or one
/// stage-1 cluster of an epoch (summary mode).
struct McmcdaItem {
  std::vector<ObsId> obs;
  int key = 0;    // items of one track must have distinct keys
  int epoch = 0;
  Vec mean;       // pooled pose evidence
  int count = 0;
  TrackId free_label = kFalsePositive;  // label of the observations while the item is free
};

/// Per-epoch cluster produced by stage 1 of the two-stage pipeline.
struct ClusterSummary {
  int epoch = 0;
  std::vector<int> type_obs;
  int count = 0;
  Vec mean;
  TrackId source = 0;
  std::vector<ObsId> members;
};

/// Track-level partition of the items: each track holds at least two items with
/// distinct keys; every other item is free.
struct Partition {
  static constexpr TrackId kFree = 0;
  std::vector<TrackId> item_track;
  std::map<TrackId, std::vector<int>> tracks;  // ascending item indices

  [[nodiscard]] int num_tracks() const { return static_cast<int>(tracks.size()); }
  [[nodiscard]] std::vector<int> free_items() const;
  void add(TrackId k, int item);
  void remove(int item);
  bool operator==(const Partition& o) const { return item_track == o.item_track; }
};

enum class MoveType { Birth, Death, Split, Merge, Extension, Reduction, Swap, Update };
inline constexpr int kNumMoveTypes = 8;

struct Proposal {
  MoveType type = MoveType::Birth;
  bool identity = true;
  Partition next;
  std::vector<int> touched;  // items whose track changes
  double log_fwd = 0.0;
  double log_rev = 0.0;
};

struct McmcdaOptions {
  double stop_prob = 0.5;    // chain termination probability in birth / extension
  int max_gap = 3;           // epoch gap allowed between neighbouring items
  double gate = 27.0;
  int thin = 10;
  bool store_samples = false;
  bool proximity_weighted = true;  // birth / extension pick the next item by transition density
};

/// Metropolis-Hastings acceptance: min(1, exp(cand - cur + log_rev - log_fwd)).
/// Non-finite candidate scores are rejected.
bool mh_accept(double cur_score, double cand_score, double log_fwd, double log_rev, Rng& rng);

/// MCMCDA chain over a WorldState. Every item starts free.
class McmcdaChain {
 public:
  McmcdaChain(WorldState& state, std::vector<McmcdaItem> items, const McmcdaOptions& opt,
              std::uint64_t seed);

  /// Draws a move; does not modify the chain.
  Proposal propose();
  /// One MH transition; returns true when the candidate was accepted.
  bool mh_step();

  [[nodiscard]] double score() const { return score_; }
  [[nodiscard]] long iteration() const { return iteration_; }
  [[nodiscard]] const Partition& partition() const { return part_; }
  [[nodiscard]] const std::vector<McmcdaItem>& items() const { return items_; }
  [[nodiscard]] const std::vector<TrackId>& best_labels() const { return best_labels_; }
  [[nodiscard]] double best_score() const { return best_score_; }
  [[nodiscard]] const WorldState& state() const { return *state_; }
  /// Item neighbours with a higher index.
  [[nodiscard]] const std::vector<int>& neighbours(int item) const { return nbrs_[item]; }

  /// Applies a partition to the state (no acceptance test).
  void apply(const Partition& next, std::span<const int> touched);
  /// Log probability of move type m being selected in partition p.
  [[nodiscard]] double log_type_prob(MoveType m, const Partition& p) const;
  /// Log probability that a birth proposal from p (where `chain` is free) builds `chain`.
  [[nodiscard]] double birth_log_prob(const Partition& p, std::span<const int> chain) const;
  /// Log probability that an extension of track k in p appends `suffix`.
  [[nodiscard]] double extension_log_prob(const Partition& p, TrackId k,
                                          std::span<const int> suffix) const;
  [[nodiscard]] std::vector<TrackId> merge_partners(const Partition& p, TrackId k) const;
  /// Log probability that a swap in p exchanges x (in track a) with y (in track b).
  [[nodiscard]] double swap_log_prob(const Partition& p, TrackId a, TrackId b, int x, int y) const;

 private:
  [[nodiscard]] bool type_feasible(MoveType m, const Partition& p) const;
  struct Candidates {
    std::vector<int> items;
    std::vector<double> log_p;  // normalised selection log-probabilities
    [[nodiscard]] bool empty() const { return items.empty(); }
    [[nodiscard]] double log_prob_of(int item) const;
  };
  [[nodiscard]] Candidates chain_candidates(const Partition& p, int from,
                                            const std::vector<int>& used_keys) const;
  int pick(const Candidates& c);
  bool build(MoveType m, Proposal& prop);

  WorldState* state_;
  std::vector<McmcdaItem> items_;
  McmcdaOptions opt_;
  Rng rng_;
  Partition part_;
  std::vector<std::vector<int>> nbrs_;
  std::vector<std::vector<double>> nbr_logw_;
  double score_ = 0.0;
  long iteration_ = 0;
  std::vector<TrackId> best_labels_;
  double best_score_ = kNegInf;
};

struct McmcdaResult {
  std::vector<std::vector<TrackId>> samples;  // thinned, when stored
  std::vector<double> trace;                  // score of every sample A^(0..n-1)
  std::vector<char> accepted;                 // per transition
  std::vector<TrackId> map_labels;
  double map_score = kNegInf;
};

/// Items of full mode: one per observation, keyed by view.
std::vector<McmcdaItem> observation_items(const Dataset& data);

/// Runs n_samples - 1 transitions from the all-free start; samples A^(0) ... A^(n-1).
McmcdaResult run_mcmcda(WorldState& state, std::vector<McmcdaItem> items, long n_samples,
                        std::uint64_t seed, const McmcdaOptions& opt = {});

/// Full-mode MCMCDA from the all-FP initialisation.
McmcdaResult run_mcmcda(const Dataset& data, const ModelConfig& cfg, long n_samples,
                        std::uint64_t seed, const McmcdaOptions& opt = {});

struct TwoStageResult {
  std::vector<TrackId> stage1_labels;
  std::vector<ClusterSummary> summaries;
  McmcdaResult stage3;
  std::vector<TrackId> labels;  // MAP over the stage-1 labelling and every stage-3 sample
  double map_score = kNegInf;
};

/// Per-epoch ICM, cluster summaries, summary-level MCMCDA, expansion.
TwoStageResult two_stage(const Dataset& data, const ModelConfig& cfg, long n_samples,
                         std::uint64_t seed, const McmcdaOptions& opt = {},
                         const IcmOptions& icm = {});

}  // namespace wm
