#pragma once

#include "wm/types.hpp"

#include <optional>
#include <vector>

namespace wm {

/// Fixed hyperparameters of the world model. Type ids are 1-based in files and
/// 0-based (0..num_types-1) in memory.
struct ModelConfig {
  double alpha = 1.0;
  int num_types = 1;
  int pose_dim = 2;
  Eigen::VectorXd type_prior;            // pi(a)
  Eigen::MatrixXd confusion;             // phi(y_d | a), row a
  Mat sense_cov;                         // observation noise
  std::vector<Mat> trans_cov;            // per-type random-walk covariance per epoch
  std::vector<double> survival;          // q(a)
  std::vector<double> p_fn;              // miss probability per type
  double p_fp = 0.1;
  std::optional<double> world_volume;    // resolved against a dataset when unset

  /// Throws InvalidInput describing the first violated invariant.
  void validate() const;

  /// V(world). Throws ContractViolation when it has not been resolved yet.
  [[nodiscard]] double volume() const;

  /// log sum_a phi(y | a) pi(a): the type factor for clutter and new tracks.
  [[nodiscard]] double log_type_marginal(int type_obs) const;
};

struct Observation {
  int type_obs = 0;  // 0-based
  Vec pose;
};

struct Region {
  Vec min;
  Vec max;

  [[nodiscard]] double volume() const;
  [[nodiscard]] bool contains(const Vec& p) const;
};

struct ViewFrame {
  int epoch = 1;       // 1-based
  int view_index = 1;  // unique within the epoch
  Region region;
  std::vector<Observation> observations;
};

/// Ordered epochs of views; immutable once built. Observations get dense global
/// ids in (epoch, view, index) order.
class Dataset {
 public:
  Dataset() = default;
  /// Sorts views by epoch (stable within an epoch) and validates invariants.
  Dataset(std::vector<ViewFrame> views, int pose_dim);

  [[nodiscard]] int num_epochs() const { return num_epochs_; }
  [[nodiscard]] int pose_dim() const { return pose_dim_; }
  [[nodiscard]] int num_views() const { return static_cast<int>(views_.size()); }
  [[nodiscard]] int num_obs() const { return static_cast<int>(obs_view_.size()); }

  [[nodiscard]] const std::vector<ViewFrame>& views() const { return views_; }
  [[nodiscard]] const ViewFrame& view(int slot) const { return views_[slot]; }
  /// View slots of epoch t (1-based).
  [[nodiscard]] const std::vector<int>& epoch_views(int t) const { return epoch_views_[t - 1]; }

  [[nodiscard]] const Observation& obs(ObsId o) const;
  [[nodiscard]] int obs_view(ObsId o) const { return obs_view_[o]; }
  [[nodiscard]] int obs_epoch(ObsId o) const { return views_[obs_view_[o]].epoch; }
  [[nodiscard]] ObsId view_first_obs(int slot) const { return view_offset_[slot]; }
  [[nodiscard]] int view_size(int slot) const {
    return static_cast<int>(views_[slot].observations.size());
  }

  /// Volume of the bounding box of all view regions.
  [[nodiscard]] double region_bbox_volume() const;

  /// Checks type ids and pose dimensions against a config.
  void check_against(const ModelConfig& cfg) const;

 private:
  std::vector<ViewFrame> views_;
  std::vector<std::vector<int>> epoch_views_;
  std::vector<int> obs_view_;
  std::vector<int> obs_index_;
  std::vector<ObsId> view_offset_;
  int num_epochs_ = 0;
  int pose_dim_ = 0;
};

/// Copy of `cfg` whose world volume defaults to the dataset's region bounding box.
ModelConfig resolve_world_volume(ModelConfig cfg, const Dataset& data);

// Generative densities.

/// log[phi(y_d | a) N(y_c; pose, Sigma_s)]; -inf when phi(y_d | a) = 0.
double obs_log_density(const Observation& obs, int attr, const Vec& pose, const ModelConfig& cfg);

/// log[(sum_a phi(y_d | a) pi(a)) / V(world)].
double fp_obs_log_density(const Observation& obs, const ModelConfig& cfg);

/// log N(pose_to; pose_from, dt Q(a)). dt must be >= 1.
double transition_log_density(int attr, const Vec& pose_to, const Vec& pose_from, int dt,
                              const ModelConfig& cfg);

/// q(a)^dt.
double survival_prob(int attr, int dt, const ModelConfig& cfg);

}  // namespace wm
