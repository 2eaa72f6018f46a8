#include "wm/track_filter.hpp"

#include <algorithm>
#include <map>

namespace wm {

int TypePosterior::argmax() const {
  int best = 0;
  for (int a = 1; a < log_pmf.size(); ++a)
    if (log_pmf[a] > log_pmf[best]) best = a;
  return best;
}

namespace {

Eigen::VectorXd joint_type_log_mass(std::span<const int> type_counts, const ModelConfig& cfg) {
  Eigen::VectorXd lw(cfg.num_types);
  for (int a = 0; a < cfg.num_types; ++a) {
    double acc = cfg.type_prior[a] > 0.0 ? std::log(cfg.type_prior[a]) : kNegInf;
    for (int y = 0; y < static_cast<int>(type_counts.size()) && acc > kNegInf; ++y) {
      if (type_counts[y] == 0) continue;
      const double phi = cfg.confusion(a, y);
      acc = phi > 0.0 ? acc + type_counts[y] * std::log(phi) : kNegInf;
    }
    lw[a] = acc;
  }
  return lw;
}

double lse(const Eigen::VectorXd& v) { return log_sum_exp(std::span<const double>(v.data(), v.size())); }

}  // namespace

TypePosterior type_posterior_from_counts(std::span<const int> type_counts, const ModelConfig& cfg) {
  Eigen::VectorXd lw = joint_type_log_mass(type_counts, cfg);
  const double z = lse(lw);
  if (z == kNegInf) throw NumericalError("degenerate type posterior: every type has zero mass");
  lw.array() -= z;
  return TypePosterior{lw};
}

TypePosterior type_posterior_update(std::span<const int> type_obs, const ModelConfig& cfg) {
  std::vector<int> counts(cfg.num_types, 0);
  for (int y : type_obs) {
    if (y < 0 || y >= cfg.num_types) throw InvalidInput("type id out of range");
    ++counts[y];
  }
  return type_posterior_from_counts(counts, cfg);
}

double type_predictive(const TypePosterior& psi, int y_d, const ModelConfig& cfg) {
  if (y_d < 0 || y_d >= cfg.num_types) throw InvalidInput("type id out of range");
  double p = 0.0;
  for (int a = 0; a < cfg.num_types; ++a) p += cfg.confusion(a, y_d) * std::exp(psi.log_pmf[a]);
  return p > 0.0 ? std::log(p) : kNegInf;
}

std::vector<PoseBelief> kalman_filter(std::span<const EpochEvidence> evidence, int attr,
                                      const ModelConfig& cfg,
                                      const std::optional<GaussianBelief>& explicit_prior) {
  if (evidence.empty()) throw InvalidInput("kalman_filter: no evidence");
  for (std::size_t i = 1; i < evidence.size(); ++i)
    if (evidence[i].epoch <= evidence[i - 1].epoch)
      throw InvalidInput("kalman_filter: epochs must be strictly increasing");
  const int first = evidence.front().epoch;
  const int last = evidence.back().epoch;
  if (!explicit_prior && evidence.front().count < 1)
    throw InvalidInput("kalman_filter: first epoch needs an observation");
  const Mat& q = cfg.trans_cov[attr];

  std::vector<PoseBelief> out(last - first + 1);
  std::size_t next = 0;
  for (int t = first; t <= last; ++t) {
    PoseBelief& b = out[t - first];
    b.epoch = t;
    if (next < evidence.size() && evidence[next].epoch == t) {
      b.count = evidence[next].count;
      if (b.count > 0) b.obs_mean = evidence[next].mean;
      ++next;
    }
    const bool init = t == first && !explicit_prior;
    if (init) {
      b.predicted = {b.obs_mean, Mat(cfg.sense_cov / b.count)};
      b.filtered = b.predicted;
    } else {
      if (t == first) {
        b.predicted = *explicit_prior;
      } else {
        const auto& prev = out[t - first - 1].filtered;
        b.predicted = {prev.mean, symmetrized(prev.cov + q)};
      }
      if (b.count > 0) {
        const Mat r = cfg.sense_cov / b.count;
        const Mat s = b.predicted.cov + r;
        const Eigen::LLT<Mat> llt(s);
        if (llt.info() != Eigen::Success)
          throw NumericalError("singular innovation covariance at epoch " + std::to_string(t));
        const Mat s_inv_pred = llt.solve(b.predicted.cov);  // S^-1 Sigma_hat
        const Vec gain_innov = s_inv_pred.transpose() * (b.obs_mean - b.predicted.mean);
        b.filtered = {b.predicted.mean + gain_innov, symmetrized(r * s_inv_pred)};
      } else {
        b.filtered = b.predicted;
      }
    }
    b.smoothed = b.filtered;
  }
  return out;
}

std::vector<PoseBelief> rts_smooth(std::vector<PoseBelief> beliefs, int attr,
                                   const ModelConfig& cfg) {
  if (beliefs.empty()) return beliefs;
  const Mat& q = cfg.trans_cov[attr];
  beliefs.back().smoothed = beliefs.back().filtered;
  for (int i = static_cast<int>(beliefs.size()) - 2; i >= 0; --i) {
    auto& b = beliefs[i];
    const auto& nb = beliefs[i + 1];
    const Mat pred_cov = b.filtered.cov + q;
    const Eigen::LLT<Mat> llt(pred_cov);
    if (llt.info() != Eigen::Success)
      throw NumericalError("singular smoother gain at epoch " + std::to_string(b.epoch));
    const Mat c = llt.solve(b.filtered.cov).transpose();
    b.smoothed.mean = b.filtered.mean + c * (nb.smoothed.mean - b.filtered.mean);
    b.smoothed.cov = symmetrized(b.filtered.cov + c * (nb.smoothed.cov - pred_cov) * c.transpose());
  }
  return beliefs;
}

TrackEvidence gather_evidence(std::span<const ObsId> members, const Dataset& data,
                              const ModelConfig& cfg) {
  TrackEvidence ev;
  ev.type_counts.assign(cfg.num_types, 0);
  std::map<int, std::vector<ObsId>> by_epoch;
  for (ObsId o : members) by_epoch[data.obs_epoch(o)].push_back(o);
  if (by_epoch.empty()) return ev;
  const Eigen::LLT<Mat> sense(cfg.sense_cov);
  for (const auto& [t, obs] : by_epoch) {
    Vec mean = Vec::Zero(cfg.pose_dim);
    for (ObsId o : obs) {
      mean += data.obs(o).pose;
      ++ev.type_counts[data.obs(o).type_obs];
    }
    mean /= static_cast<double>(obs.size());
    double scatter = 0.0;
    for (ObsId o : obs) {
      const Vec diff = data.obs(o).pose - mean;
      scatter += diff.dot(sense.solve(diff));
    }
    ev.epochs.push_back({t, static_cast<int>(obs.size()), mean});
    ev.scatter.push_back(scatter);
    ev.total += static_cast<int>(obs.size());
  }
  return ev;
}

bool TrackFit::instantiated_at(int t) const {
  return std::binary_search(instantiated.begin(), instantiated.end(), t);
}

GaussianBelief TrackFit::pose_at(int t, const ModelConfig& cfg) const {
  if (spans(t)) return belief(t).smoothed;
  const auto& end = t > death ? beliefs.back().smoothed : beliefs.front().smoothed;
  const int gap = t > death ? t - death : birth - t;
  return {end.mean, Mat(end.cov + gap * cfg.trans_cov[dyn_type])};
}

TrackFit fit_track(const TrackEvidence& evidence, const ModelConfig& cfg) {
  if (evidence.empty()) throw InvalidInput("fit_track: empty track");
  TrackFit fit;
  fit.type_posterior = type_posterior_from_counts(evidence.type_counts, cfg);
  fit.dyn_type = fit.type_posterior.argmax();
  fit.log_type_marginal = lse(joint_type_log_mass(evidence.type_counts, cfg));
  fit.birth = evidence.birth();
  fit.death = evidence.death();
  fit.total = evidence.total;
  for (const auto& e : evidence.epochs) fit.instantiated.push_back(e.epoch);
  fit.beliefs = rts_smooth(kalman_filter(evidence.epochs, fit.dyn_type, cfg), fit.dyn_type, cfg);

  const int d = cfg.pose_dim;
  const double log_det_s = 2.0 * Eigen::LLT<Mat>(cfg.sense_cov).matrixL().toDenseMatrix()
                                     .diagonal().array().log().sum();
  double lp = 0.0;
  for (std::size_t i = 0; i < evidence.epochs.size(); ++i) {
    const auto& e = evidence.epochs[i];
    const double n = e.count;
    lp += -0.5 * d * (n - 1.0) * kLog2Pi - 0.5 * (n - 1.0) * log_det_s - 0.5 * d * std::log(n) -
          0.5 * evidence.scatter[i];
    if (i > 0) {
      const auto& pred = fit.belief(e.epoch).predicted;
      lp += log_normal_pdf(e.mean, pred.mean, Mat(pred.cov + cfg.sense_cov / n));
    }
  }
  fit.log_pose_marginal = lp;
  return fit;
}

double track_marginal_loglik(const TrackFit& fit, std::span<const ObsId> members,
                             const Dataset& data, const ModelConfig& cfg) {
  double total = 0.0;
  for (ObsId o : members) {
    const auto& obs = data.obs(o);
    const auto& b = fit.belief(data.obs_epoch(o)).smoothed;
    total += type_predictive(fit.type_posterior, obs.type_obs, cfg) +
             log_normal_pdf(obs.pose, b.mean, Mat(b.cov + cfg.sense_cov));
  }
  return total;
}

double track_chain_loglik(const TrackFit& fit) {
  if (fit.total == 0) return 0.0;
  return fit.log_type_marginal + fit.log_pose_marginal;
}

double predictive_instantiated(const TrackFit& fit, int t, const Observation& obs,
                               const ModelConfig& cfg) {
  if (!fit.instantiated_at(t))
    throw ContractViolation("predictive_instantiated: epoch " + std::to_string(t) +
                            " is not instantiated");
  const auto& b = fit.belief(t).smoothed;
  return type_predictive(fit.type_posterior, obs.type_obs, cfg) +
         log_normal_pdf(obs.pose, b.mean, Mat(b.cov + cfg.sense_cov));
}

std::optional<int> previous_instantiation(const TrackFit& fit, int t) {
  auto it = std::lower_bound(fit.instantiated.begin(), fit.instantiated.end(), t);
  if (it == fit.instantiated.begin()) return std::nullopt;
  return *std::prev(it);
}

double predictive_dormant(const TrackFit& fit, int t, const Observation& obs,
                          const ModelConfig& cfg) {
  const auto prev = previous_instantiation(fit, t);
  if (!prev) throw ContractViolation("predictive_dormant: no instantiation before epoch " +
                                     std::to_string(t));
  const auto& b = fit.belief(*prev).smoothed;
  const Mat cov = b.cov + (t - *prev) * cfg.trans_cov[fit.dyn_type] + cfg.sense_cov;
  return type_predictive(fit.type_posterior, obs.type_obs, cfg) +
         log_normal_pdf(obs.pose, b.mean, cov);
}

double predictive_new(const Observation& obs, const ModelConfig& cfg) {
  return fp_obs_log_density(obs, cfg);
}

}  // namespace wm
