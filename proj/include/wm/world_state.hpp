#pragma once

#include "wm/track_filter.hpp"

#include <map>
#include <optional>
#include <span>
#include <vector>

namespace wm {

/// [1 - sum_a p_fn(a) psi(a)] * P(pose^t in region), the region probability taken
/// per axis from the diagonal of the track's pose belief at t.
double detection_prob(const TrackFit& fit, const Region& region, int t, const ModelConfig& cfg);

/// Full association state: one label per observation (track id, kFalsePositive,
/// or kUnassigned), the tracks those labels induce, and which views are active.
///
/// The score of a state is
///   sum over active views with no unassigned observation of
///       sum_{FP obs} fp density + log Bin(#FP; #obs, p_fp)
///   + sum over tracks k of
///       log alpha + (t_d - t_b) log q(a_hat)
///       + track_chain_loglik - log V
///       + sum over active views v in epochs [t_b, t_d] of the detection / miss term.
/// Inactive views contribute nothing and must hold only unassigned observations.
class WorldState {
 public:
  /// All views active, every observation a false positive.
  WorldState(const Dataset& data, const ModelConfig& cfg);

  [[nodiscard]] const Dataset& data() const { return *data_; }
  [[nodiscard]] const ModelConfig& cfg() const { return *cfg_; }

  [[nodiscard]] TrackId label(ObsId o) const { return labels_[o]; }
  [[nodiscard]] const std::vector<TrackId>& labels() const { return labels_; }
  [[nodiscard]] std::vector<TrackId> view_labels(int slot) const;

  [[nodiscard]] bool active(int slot) const { return active_[slot]; }
  /// Deactivating a view requires all of its observations to be unassigned.
  void set_active(int slot, bool on);

  [[nodiscard]] int num_tracks() const { return static_cast<int>(tracks_.size()); }
  [[nodiscard]] std::vector<TrackId> track_ids() const;
  [[nodiscard]] bool has_track(TrackId k) const { return tracks_.count(k) > 0; }
  [[nodiscard]] const std::vector<ObsId>& members(TrackId k) const;
  [[nodiscard]] const TrackFit& fit(TrackId k) const;
  /// Cached per-track score term S_k.
  [[nodiscard]] double track_score(TrackId k) const;
  /// S for an arbitrary non-empty observation set under the current active views.
  [[nodiscard]] double members_score(std::span<const ObsId> members) const;
  /// Same, with view `skip_slot` treated as inactive.
  [[nodiscard]] double members_score(std::span<const ObsId> members, int skip_slot) const;
  [[nodiscard]] bool track_in_view(TrackId k, int slot) const;

  /// A track id never used before in this state.
  TrackId fresh_id() { return next_id_++; }

  /// Relabels one observation. Track ids that do not exist yet create a track;
  /// tracks left empty are deleted. Throws ContractViolation on a CLC breach or
  /// when the observation's view is inactive and k is not kUnassigned.
  void assign(ObsId o, TrackId k);
  /// Relabels every observation of a view at once; lambda must satisfy the CLC.
  void set_view(int slot, std::span<const TrackId> lambda);
  void clear_view(int slot);

  [[nodiscard]] double fp_density(ObsId o) const { return fp_density_[o]; }
  [[nodiscard]] int fp_count() const;
  /// FP density sum plus binomial term of a complete active view, else 0.
  [[nodiscard]] double view_term(int slot) const;
  [[nodiscard]] double log_score() const;

  // Undo journal. Between begin() and commit()/rollback() every change is
  // recorded; rollback restores labels, tracks and view activity exactly.
  void begin();
  void commit();
  void rollback();

  /// Recomputes every cache from the labels and compares; throws ContractViolation.
  void verify() const;

 private:
  struct TrackRec {
    std::vector<ObsId> members;
    mutable std::optional<TrackFit> fit;
    mutable std::optional<double> score;
  };

  TrackRec& touch_track(TrackId k);
  const TrackRec& rec(TrackId k) const;
  double score_from_fit(const TrackFit& fit, std::span<const ObsId> members,
                        int skip_slot = -1) const;

  const Dataset* data_;
  const ModelConfig* cfg_;
  std::vector<TrackId> labels_;
  std::vector<char> active_;
  std::map<TrackId, TrackRec> tracks_;
  std::vector<double> fp_density_;
  TrackId next_id_ = 1;

  struct Journal {
    std::vector<std::pair<ObsId, TrackId>> labels;
    std::map<TrackId, std::optional<TrackRec>> tracks;
    std::vector<std::pair<int, char>> active;
  };
  std::optional<Journal> journal_;
};

}  // namespace wm
