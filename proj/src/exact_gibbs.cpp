#include "wm/exact_gibbs.hpp"

#include <algorithm>

namespace wm {

GibbsCase classify_case(const TrackParams& params, int t) {
  const auto& inst = params.instantiated;
  if (inst.empty()) return GibbsCase::New;
  if (std::binary_search(inst.begin(), inst.end(), t)) return GibbsCase::Instantiated;
  if (t > inst.back()) return GibbsCase::Revival;
  if (t < inst.front()) return GibbsCase::Backward;
  return GibbsCase::Bridge;
}

GaussianBelief bridge(const Vec& x_prev, const Vec& x_next, int g1, int g2, const Mat& q) {
  if (g1 < 1 || g2 < 1) throw ContractViolation("bridge gaps must be positive");
  const double sum = g1 + g2;
  return {Vec((g2 * x_prev + g1 * x_next) / sum), Mat(q * (g1 * g2 / sum))};
}

double exact_gibbs_case_weight(GibbsCase which, const Observation& obs, int t,
                               const TrackParams* params, const ModelConfig& cfg) {
  if (which == GibbsCase::New)
    return std::log(cfg.alpha) + fp_obs_log_density(obs, cfg);
  if (params == nullptr || params->instantiated.empty())
    throw ContractViolation("existing-track case needs instantiated parameters");
  const TrackParams& p = *params;
  const int a = p.type;
  const double phi = cfg.confusion(a, obs.type_obs);
  if (phi <= 0.0) return kNegInf;
  const double base = std::log(static_cast<double>(p.count)) + std::log(phi);
  const Mat& q = cfg.trans_cov[a];
  const double logq = cfg.survival[a] > 0.0 ? std::log(cfg.survival[a]) : kNegInf;
  const auto& inst = p.instantiated;
  switch (which) {
    case GibbsCase::Instantiated: {
      if (!std::binary_search(inst.begin(), inst.end(), t))
        throw ContractViolation("case 1 needs an instantiation at t");
      return base + log_normal_pdf(obs.pose, p.pose.at(t), cfg.sense_cov);
    }
    case GibbsCase::Revival: {
      const int prev = inst.back();
      if (t <= prev) throw ContractViolation("case 2 needs t after the last instantiation");
      const int g = t - prev;
      return base + g * logq + log_normal_pdf(obs.pose, p.pose.at(prev), Mat(g * q + cfg.sense_cov));
    }
    case GibbsCase::Bridge: {
      auto next = std::upper_bound(inst.begin(), inst.end(), t);
      if (next == inst.begin() || next == inst.end())
        throw ContractViolation("case 3 needs instantiations on both sides of t");
      const int tau_prev = *std::prev(next);
      const int tau_next = *next;
      if (tau_prev >= t || tau_next <= t) throw ContractViolation("case 3 timeline mismatch");
      const GaussianBelief b =
          bridge(p.pose.at(tau_prev), p.pose.at(tau_next), t - tau_prev, tau_next - t, q);
      return base + log_normal_pdf(obs.pose, b.mean, Mat(b.cov + cfg.sense_cov));
    }
    case GibbsCase::Backward: {
      const int tau_next = inst.front();
      if (t >= tau_next) throw ContractViolation("case 4 needs t before the first instantiation");
      const int g = tau_next - t;
      // Flat base measure: H(theta) / H(theta_next) = 1.
      return base + g * logq +
             log_normal_pdf(obs.pose, p.pose.at(tau_next), Mat(g * q + cfg.sense_cov));
    }
    case GibbsCase::New:
      break;
  }
  return kNegInf;
}

Vec sample_gaussian(const Vec& mean, const Mat& cov, Rng& rng) {
  const Eigen::SelfAdjointEigenSolver<Mat> eig(symmetrized(cov));
  const Vec root = eig.eigenvalues().cwiseMax(0.0).cwiseSqrt();
  std::normal_distribution<double> z;
  Vec draw(mean.size());
  for (int j = 0; j < mean.size(); ++j) draw[j] = z(rng);
  return mean + eig.eigenvectors() * root.asDiagonal() * draw;
}

TrackParams sample_track_params(const TrackEvidence& evidence, Rng& rng, const ModelConfig& cfg) {
  if (evidence.empty()) throw InvalidInput("sample_track_params: empty track");
  const TypePosterior psi = type_posterior_from_counts(evidence.type_counts, cfg);
  const int dyn = psi.argmax();
  const auto beliefs = kalman_filter(evidence.epochs, dyn, cfg);
  const Mat& q = cfg.trans_cov[dyn];

  TrackParams out;
  const Eigen::VectorXd pmf = psi.pmf();
  out.type = std::discrete_distribution<int>(pmf.data(), pmf.data() + pmf.size())(rng);
  out.count = evidence.total;
  for (const auto& e : evidence.epochs) out.instantiated.push_back(e.epoch);

  Vec next = sample_gaussian(beliefs.back().filtered.mean, beliefs.back().filtered.cov, rng);
  out.pose[beliefs.back().epoch] = next;
  for (int i = static_cast<int>(beliefs.size()) - 2; i >= 0; --i) {
    const auto& f = beliefs[i].filtered;
    const Mat pred = f.cov + q;
    const Eigen::LLT<Mat> llt(pred);
    const Mat c = llt.solve(f.cov).transpose();
    const Vec mean = f.mean + c * (next - f.mean);
    const Mat cov = f.cov - c * pred * c.transpose();
    next = sample_gaussian(mean, cov, rng);
    out.pose[beliefs[i].epoch] = next;
  }
  return out;
}

}  // namespace wm
