#include "wm/simulator.hpp"

#include "wm/exact_gibbs.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

namespace wm {

void SimConfig::validate() const {
  auto require = [](bool ok, const char* what) {
    if (!ok) throw InvalidInput(what);
  };
  require(domain_min.size() >= 1 && domain_min.size() <= kMaxPoseDim, "domain dimension out of range");
  require(domain_min.size() == domain_max.size(), "domain bounds differ in dimension");
  require((domain_max.array() > domain_min.array()).all(), "domain must have positive extent");
  require(num_epochs >= 1, "num_epochs must be >= 1");
  require(views_per_epoch >= 1, "views_per_epoch must be >= 1");
  require(min_view_fraction > 0.0 && min_view_fraction <= 1.0, "min_view_fraction must lie in (0,1]");
  require(fp_rate >= 0.0, "fp_rate must be >= 0");
  require(p_miss >= 0.0 && p_miss <= 1.0, "p_miss must lie in [0,1]");
  require(num_types >= 1, "num_types must be >= 1");
  require(confusion_correct >= 0.0 && confusion_correct <= 1.0, "confusion_correct must lie in [0,1]");
  require(num_types > 1 || confusion_correct == 1.0, "a single type needs confusion_correct = 1");
  require(location_noise_sd >= 0.0, "location_noise_sd must be >= 0");
  require(velocity_noise_sd >= 0.0 && step_sd >= 0.0, "dynamics noise must be >= 0");
  require(survival >= 0.0 && survival <= 1.0, "survival must lie in [0,1]");
  require(num_objects >= 0, "num_objects must be >= 0");
  require(min_objects >= 0 && max_objects >= min_objects, "object bounds must satisfy 0 <= min <= max");
}

SimConfig sim_preset(const std::string& name, std::uint64_t seed) {
  SimConfig s;
  s.seed = seed;
  if (name == "sim-default") {
    s.domain_min = Vec::Zero(2);
    s.domain_max = Vec::Constant(2, 100.0);
    return s;
  }
  if (name == "robot-style") {
    s.domain_min = Vec::Zero(2);
    s.domain_max = Vec(2);
    s.domain_max << 1.2, 0.6;
    s.num_epochs = 5;
    s.views_per_epoch = 3;
    s.region_policy = RegionPolicy::RandomSubBox;
    s.min_view_fraction = 0.6;
    s.fp_rate = 0.1;
    s.location_noise_sd = 0.03;
    s.dynamics = DynamicsMode::LocationWalk;
    s.step_sd = 0.1;
    s.survival = 0.5;
    s.birth_policy = BirthPolicy::Replenish;
    return s;
  }
  throw InvalidInput("unknown preset '" + name + "'");
}

Eigen::MatrixXd uniform_confusion(int num_types, double correct) {
  if (num_types == 1) return Eigen::MatrixXd::Ones(1, 1);
  const double off = (1.0 - correct) / (num_types - 1);
  Eigen::MatrixXd c = Eigen::MatrixXd::Constant(num_types, num_types, off);
  c.diagonal().setConstant(correct);
  return c;
}

std::vector<int> GroundTruth::labels() const {
  std::vector<int> out;
  for (const auto& v : sources) out.insert(out.end(), v.begin(), v.end());
  return out;
}

namespace {

Vec uniform_in(const Vec& lo, const Vec& hi, Rng& rng) {
  Vec p(lo.size());
  for (int j = 0; j < lo.size(); ++j) p[j] = std::uniform_real_distribution<double>(lo[j], hi[j])(rng);
  return p;
}

Vec gaussian(int d, double sd, Rng& rng) {
  std::normal_distribution<double> z(0.0, sd);
  Vec v(d);
  for (int j = 0; j < d; ++j) v[j] = sd > 0.0 ? z(rng) : 0.0;
  return v;
}

// Reflects a position into the box, flipping the matching velocity components.
void reflect(Vec& x, Vec* vel, const Vec& lo, const Vec& hi) {
  for (int j = 0; j < x.size(); ++j) {
    const double w = hi[j] - lo[j];
    for (int guard = 0; guard < 8 && (x[j] < lo[j] || x[j] > hi[j]); ++guard) {
      if (x[j] < lo[j]) x[j] = 2 * lo[j] - x[j];
      if (x[j] > hi[j]) x[j] = 2 * hi[j] - x[j];
      if (vel) (*vel)[j] = -(*vel)[j];
    }
    x[j] = std::clamp(x[j], lo[j], lo[j] + w);
  }
}

}  // namespace

Simulation simulate(const SimConfig& sim) {
  sim.validate();
  Rng rng(sim.seed);
  const int d = static_cast<int>(sim.domain_min.size());
  const int a_count = sim.num_types;
  const Eigen::MatrixXd conf = uniform_confusion(a_count, sim.confusion_correct);
  const Eigen::VectorXd fp_types = conf.colwise().sum().transpose() / a_count;
  std::uniform_int_distribution<int> type_dist(0, a_count - 1);
  std::bernoulli_distribution survive(sim.survival);

  GroundTruth truth;
  auto spawn = [&](int t) {
    TrueObject obj;
    obj.id = static_cast<int>(truth.objects.size()) + 1;
    obj.type = type_dist(rng);
    obj.birth = t;
    obj.death = t;
    obj.pose[t] = uniform_in(sim.domain_min, sim.domain_max, rng);
    if (sim.dynamics == DynamicsMode::VelocityWalk) obj.velocity[t] = gaussian(d, sim.velocity_noise_sd, rng);
    truth.objects.push_back(obj);
  };

  if (sim.birth_policy == BirthPolicy::Staggered) {
    const int latest = (sim.num_epochs + 1) / 2;
    std::vector<int> births(sim.num_objects);
    for (int& b : births) b = std::uniform_int_distribution<int>(1, latest)(rng);
    std::sort(births.begin(), births.end());
    std::size_t next = 0;
    std::vector<char> alive;
    for (int t = 1; t <= sim.num_epochs; ++t) {
      for (auto& obj : truth.objects) {
        if (obj.death != t - 1 || !alive[obj.id - 1]) continue;
        if (!survive(rng)) {
          alive[obj.id - 1] = 0;
          continue;
        }
        Vec x = obj.pose[t - 1];
        if (sim.dynamics == DynamicsMode::VelocityWalk) {
          Vec v = obj.velocity[t - 1] + gaussian(d, sim.velocity_noise_sd, rng);
          x += v;
          reflect(x, &v, sim.domain_min, sim.domain_max);
          obj.velocity[t] = v;
        } else {
          x += gaussian(d, sim.step_sd, rng);
          reflect(x, nullptr, sim.domain_min, sim.domain_max);
        }
        obj.pose[t] = x;
        obj.death = t;
      }
      while (next < births.size() && births[next] == t) {
        spawn(t);
        alive.push_back(1);
        ++next;
      }
    }
  } else {
    std::vector<char> alive;
    for (int t = 1; t <= sim.num_epochs; ++t) {
      int count = 0;
      for (auto& obj : truth.objects) {
        if (!alive[obj.id - 1] || obj.death != t - 1) continue;
        if (!survive(rng)) {
          alive[obj.id - 1] = 0;
          continue;
        }
        Vec x = obj.pose[t - 1];
        if (sim.dynamics == DynamicsMode::VelocityWalk) {
          Vec v = obj.velocity[t - 1] + gaussian(d, sim.velocity_noise_sd, rng);
          x += v;
          reflect(x, &v, sim.domain_min, sim.domain_max);
          obj.velocity[t] = v;
        } else {
          x += gaussian(d, sim.step_sd, rng);
          reflect(x, nullptr, sim.domain_min, sim.domain_max);
        }
        obj.pose[t] = x;
        obj.death = t;
        ++count;
      }
      const int target = std::uniform_int_distribution<int>(sim.min_objects, sim.max_objects)(rng);
      for (; count < target; ++count) {
        spawn(t);
        alive.push_back(1);
      }
    }
  }

  std::vector<ViewFrame> views;
  std::discrete_distribution<int> fp_type_dist(fp_types.data(), fp_types.data() + fp_types.size());
  std::poisson_distribution<int> fp_count(std::max(sim.fp_rate, 1e-12));
  std::bernoulli_distribution detect(1.0 - sim.p_miss);
  for (int t = 1; t <= sim.num_epochs; ++t) {
    for (int v = 1; v <= sim.views_per_epoch; ++v) {
      ViewFrame frame;
      frame.epoch = t;
      frame.view_index = v;
      if (sim.region_policy == RegionPolicy::FullDomain) {
        frame.region = {sim.domain_min, sim.domain_max};
      } else {
        Vec lo(d), hi(d);
        for (int j = 0; j < d; ++j) {
          const double w = sim.domain_max[j] - sim.domain_min[j];
          const double side =
              w * std::uniform_real_distribution<double>(sim.min_view_fraction, 1.0)(rng);
          lo[j] = sim.domain_min[j] + std::uniform_real_distribution<double>(0.0, w - side)(rng);
          hi[j] = lo[j] + side;
        }
        frame.region = {lo, hi};
      }
      std::vector<std::pair<int, Observation>> dets;
      for (const auto& obj : truth.objects) {
        if (t < obj.birth || t > obj.death || !frame.region.contains(obj.pose.at(t))) continue;
        if (!detect(rng)) continue;
        const Eigen::VectorXd probs = conf.row(obj.type).transpose();
        std::discrete_distribution<int> row(probs.data(), probs.data() + a_count);
        Observation o;
        o.type_obs = row(rng);
        o.pose = obj.pose.at(t) + gaussian(d, sim.location_noise_sd, rng);
        dets.emplace_back(obj.id, o);
      }
      const int n_fp = sim.fp_rate > 0.0 ? fp_count(rng) : 0;
      for (int i = 0; i < n_fp; ++i) {
        Observation o;
        o.type_obs = fp_type_dist(rng);
        o.pose = uniform_in(frame.region.min, frame.region.max, rng);
        dets.emplace_back(0, o);
      }
      std::shuffle(dets.begin(), dets.end(), rng);
      std::vector<int> src;
      for (auto& [id, o] : dets) {
        src.push_back(id);
        frame.observations.push_back(std::move(o));
      }
      truth.sources.push_back(std::move(src));
      views.push_back(std::move(frame));
    }
  }
  return {Dataset(std::move(views), d), std::move(truth)};
}

ModelConfig inference_config(const SimConfig& sim) {
  sim.validate();
  const int d = static_cast<int>(sim.domain_min.size());
  ModelConfig cfg;
  cfg.num_types = sim.num_types;
  cfg.pose_dim = d;
  cfg.type_prior = Eigen::VectorXd::Constant(sim.num_types, 1.0 / sim.num_types);
  cfg.confusion = uniform_confusion(sim.num_types, sim.confusion_correct);
  const double sense_sd = std::max(sim.location_noise_sd, 1e-6);
  cfg.sense_cov = Mat::Identity(d, d) * sense_sd * sense_sd;
  // Per-epoch displacement scale of the simulated motion.
  const double step = sim.dynamics == DynamicsMode::VelocityWalk ? 2.4 * sim.velocity_noise_sd
                                                                  : sim.step_sd;
  const double q = std::max(step * step, 1e-12);
  cfg.trans_cov.assign(sim.num_types, Mat::Identity(d, d) * q);
  cfg.survival.assign(sim.num_types, sim.survival);
  cfg.p_fn.assign(sim.num_types, sim.p_miss);
  const double expected_tp = 0.5 * (sim.birth_policy == BirthPolicy::Staggered
                                        ? sim.num_objects
                                        : 0.5 * (sim.min_objects + sim.max_objects)) *
                             (1.0 - sim.p_miss);
  cfg.p_fp = std::clamp(sim.fp_rate / (sim.fp_rate + expected_tp + 1e-9), 0.01, 0.9);
  cfg.alpha = 1.0;
  cfg.world_volume = (sim.domain_max - sim.domain_min).prod();
  cfg.validate();
  return cfg;
}

GenerativeSample generative_ddpmm_sample(const ModelConfig& cfg, int num_epochs, int obs_per_epoch,
                                         std::uint64_t seed) {
  if (num_epochs < 1) throw InvalidInput("num_epochs must be >= 1");
  if (obs_per_epoch < 0) throw InvalidInput("obs_per_epoch must be >= 0");
  Rng rng(seed);
  const int d = cfg.pose_dim;
  const double side = std::pow(cfg.world_volume.value_or(1.0), 1.0 / d);
  GenerativeSample out;
  std::vector<std::vector<int>> counts;  // per cluster, per epoch
  std::vector<int> last_inst;
  for (int t = 1; t <= num_epochs; ++t) {
    for (int n = 0; n < obs_per_epoch; ++n) {
      const int k_count = out.num_clusters();
      std::vector<double> w(k_count + 1, 0.0);
      for (int k = 0; k < k_count; ++k) {
        int upto = 0;
        for (int e = 1; e <= t; ++e) upto += counts[k][e];
        if (counts[k][t] > 0) {
          w[k] = upto;
        } else {
          const int gap = t - last_inst[k];
          w[k] = std::pow(cfg.survival[out.cluster_type[k]], gap) * upto;
        }
      }
      w[k_count] = cfg.alpha;
      const double total = std::accumulate(w.begin(), w.end(), 0.0);
      int pick = k_count;
      if (total > 0.0) pick = std::discrete_distribution<int>(w.begin(), w.end())(rng);
      if (pick == k_count) {
        const int type = std::discrete_distribution<int>(cfg.type_prior.data(),
                                                         cfg.type_prior.data() + cfg.num_types)(rng);
        out.cluster_type.push_back(type);
        out.cluster_pose.push_back({});
        Vec x(d);
        for (int j = 0; j < d; ++j) x[j] = std::uniform_real_distribution<double>(0.0, side)(rng);
        out.cluster_pose.back()[t] = x;
        counts.emplace_back(num_epochs + 1, 0);
        last_inst.push_back(t);
      } else if (counts[pick][t] == 0) {
        const int gap = t - last_inst[pick];
        const Vec& prev = out.cluster_pose[pick].at(last_inst[pick]);
        out.cluster_pose[pick][t] =
            sample_gaussian(prev, Mat(gap * cfg.trans_cov[out.cluster_type[pick]]), rng);
        last_inst[pick] = t;
      }
      ++counts[pick][t];
      const int type = out.cluster_type[pick];
      Observation o;
      const Eigen::VectorXd probs = cfg.confusion.row(type).transpose();
      o.type_obs = std::discrete_distribution<int>(probs.data(), probs.data() + cfg.num_types)(rng);
      o.pose = sample_gaussian(out.cluster_pose[pick].at(t), cfg.sense_cov, rng);
      out.epoch.push_back(t);
      out.cluster.push_back(pick + 1);
      out.obs.push_back(o);
    }
  }
  return out;
}

}  // namespace wm
