#pragma once

#include "wm/model.hpp"

#include <cstdint>
#include <map>
#include <string>
#include <vector>

namespace wm {

enum class RegionPolicy { FullDomain, RandomSubBox };
enum class DynamicsMode { VelocityWalk, LocationWalk };
enum class BirthPolicy {
  Staggered,  // a fixed number of objects, each born in the first half of the run
  Replenish,  // each epoch tops the population up to a random target in [min, max]
};

struct SimConfig {
  Vec domain_min;
  Vec domain_max;
  int num_epochs = 10;
  int views_per_epoch = 5;
  RegionPolicy region_policy = RegionPolicy::FullDomain;
  double min_view_fraction = 0.5;  // RandomSubBox: smallest side as a fraction of the domain
  double fp_rate = 5.0;            // Poisson mean per view
  double p_miss = 0.1;
  int num_types = 4;
  double confusion_correct = 0.6;  // off-diagonal mass is shared evenly
  double location_noise_sd = 1.0;
  DynamicsMode dynamics = DynamicsMode::VelocityWalk;
  double velocity_noise_sd = 5.0;
  double step_sd = 0.1;
  double survival = 0.9;
  BirthPolicy birth_policy = BirthPolicy::Staggered;
  int num_objects = 5;
  int min_objects = 5;
  int max_objects = 10;
  std::uint64_t seed = 0;

  /// Throws InvalidInput on out-of-range fields.
  void validate() const;
};

/// Named presets: "sim-default" and "robot-style". Throws InvalidInput otherwise.
SimConfig sim_preset(const std::string& name, std::uint64_t seed);

struct TrueObject {
  int id = 0;  // 1-based
  int type = 0;
  int birth = 0;
  int death = 0;
  std::map<int, Vec> pose;
  std::map<int, Vec> velocity;
};

struct GroundTruth {
  std::vector<TrueObject> objects;
  std::vector<std::vector<int>> sources;  // per view slot: object id per observation, 0 = FP

  /// Per-observation object id in dataset order.
  [[nodiscard]] std::vector<int> labels() const;
};

struct Simulation {
  Dataset data;
  GroundTruth truth;
};

Simulation simulate(const SimConfig& sim);

/// Model hyperparameters matched to a simulation configuration for inference.
ModelConfig inference_config(const SimConfig& sim);

/// Confusion matrix with `correct` on the diagonal and the rest spread evenly.
Eigen::MatrixXd uniform_confusion(int num_types, double correct);

struct GenerativeSample {
  std::vector<int> epoch;       // per observation
  std::vector<int> cluster;     // per observation, 1-based
  std::vector<Observation> obs;
  std::vector<int> cluster_type;
  std::vector<std::map<int, Vec>> cluster_pose;  // per cluster: pose at each instantiated epoch
  [[nodiscard]] int num_clusters() const { return static_cast<int>(cluster_type.size()); }
};

/// Sequential draw from the marginal DDP predictive prior: instantiated
/// clusters by their counts, dormant ones by q^gap times their counts, new ones
/// by alpha (forced when every other weight is zero). New cluster poses are
/// uniform on [0, V^(1/d)]^d.
GenerativeSample generative_ddpmm_sample(const ModelConfig& cfg, int num_epochs, int obs_per_epoch,
                                         std::uint64_t seed);

}  // namespace wm
