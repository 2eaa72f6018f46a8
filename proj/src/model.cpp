#include "wm/model.hpp"

#include <algorithm>
#include <numeric>
#include <sstream>

namespace wm {

double log_sum_exp(std::span<const double> xs) {
  double hi = kNegInf;
  for (double x : xs) hi = std::max(hi, x);
  if (hi == kNegInf) return kNegInf;
  if (hi == std::numeric_limits<double>::infinity()) return hi;
  double acc = 0.0;
  for (double x : xs) acc += std::exp(x - hi);
  return hi + std::log(acc);
}

double log_add(double a, double b) {
  if (a == kNegInf) return b;
  if (b == kNegInf) return a;
  const double hi = std::max(a, b);
  return hi + std::log1p(std::exp(std::min(a, b) - hi));
}

double log1m_exp(double x) {
  if (x >= 0.0) return kNegInf;
  // Maechler's split keeps precision on both sides of -log 2.
  return x > -0.6931471805599453 ? std::log(-std::expm1(x)) : std::log1p(-std::exp(x));
}

Mat symmetrized(const Mat& m) { return 0.5 * (m + m.transpose()); }

double log_normal_pdf(const Vec& x, const Vec& mean, const Mat& cov) {
  const Eigen::LLT<Mat> llt(cov);
  if (llt.info() != Eigen::Success) throw NumericalError("covariance is not positive definite");
  const Vec diff = x - mean;
  const Vec z = llt.matrixL().solve(diff);
  double log_det = 0.0;
  for (int i = 0; i < cov.rows(); ++i) log_det += std::log(llt.matrixL()(i, i));
  return -0.5 * static_cast<double>(x.size()) * kLog2Pi - log_det - 0.5 * z.squaredNorm();
}

double mahalanobis_sq(const Vec& x, const Vec& mean, const Mat& cov) {
  const Eigen::LLT<Mat> llt(cov);
  if (llt.info() != Eigen::Success) throw NumericalError("covariance is not positive definite");
  const Vec z = llt.matrixL().solve(Vec(x - mean));
  return z.squaredNorm();
}

double normal_cdf(double z) { return 0.5 * std::erfc(-z / std::sqrt(2.0)); }

double log_binomial_pmf(int k, int n, double p) {
  if (k < 0 || k > n) return kNegInf;
  const double log_choose =
      std::lgamma(n + 1.0) - std::lgamma(k + 1.0) - std::lgamma(n - k + 1.0);
  const double fp_part = k == 0 ? 0.0 : k * std::log(p);
  const double tp_part = (n - k) == 0 ? 0.0 : (n - k) * std::log1p(-p);
  return log_choose + fp_part + tp_part;
}

namespace {

void require(bool ok, const std::string& what) {
  if (!ok) throw InvalidInput(what);
}

bool is_spd(const Mat& m) {
  if (m.rows() != m.cols()) return false;
  if ((m - m.transpose()).cwiseAbs().maxCoeff() > 1e-9 * std::max(1.0, m.cwiseAbs().maxCoeff()))
    return false;
  const Eigen::LLT<Mat> llt(m);
  return llt.info() == Eigen::Success;
}

}  // namespace

void ModelConfig::validate() const {
  require(alpha > 0.0, "alpha must be positive");
  require(num_types >= 1, "num_types must be >= 1");
  require(pose_dim >= 1 && pose_dim <= kMaxPoseDim, "pose_dim out of range");
  const auto a = static_cast<Eigen::Index>(num_types);
  require(type_prior.size() == a, "type_prior has wrong length");
  require((type_prior.array() >= 0.0).all(), "type_prior has negative entries");
  require(std::abs(type_prior.sum() - 1.0) <= 1e-12, "type_prior must sum to 1");
  require(confusion.rows() == a && confusion.cols() == a, "confusion must be A x A");
  require((confusion.array() >= 0.0).all(), "confusion has negative entries");
  for (Eigen::Index r = 0; r < a; ++r) {
    std::ostringstream msg;
    msg << "confusion row " << r + 1 << " must sum to 1";
    require(std::abs(confusion.row(r).sum() - 1.0) <= 1e-12, msg.str());
  }
  require(sense_cov.rows() == pose_dim && is_spd(sense_cov), "sense_cov must be d x d SPD");
  require(static_cast<int>(trans_cov.size()) == num_types, "trans_cov needs one matrix per type");
  for (const auto& q : trans_cov)
    require(q.rows() == pose_dim && is_spd(q), "trans_cov entries must be d x d SPD");
  require(static_cast<int>(survival.size()) == num_types, "survival needs one entry per type");
  require(static_cast<int>(p_fn.size()) == num_types, "p_fn needs one entry per type");
  for (double q : survival) require(q >= 0.0 && q <= 1.0, "survival must lie in [0,1]");
  for (double p : p_fn) require(p >= 0.0 && p <= 1.0, "p_fn must lie in [0,1]");
  require(p_fp >= 0.0 && p_fp <= 1.0, "p_fp must lie in [0,1]");
  if (world_volume) require(*world_volume > 0.0, "world_volume must be positive");
}

double ModelConfig::volume() const {
  if (!world_volume) throw ContractViolation("world_volume has not been resolved");
  return *world_volume;
}

double ModelConfig::log_type_marginal(int type_obs) const {
  return std::log(confusion.col(type_obs).dot(type_prior));
}

double Region::volume() const { return (max - min).prod(); }

bool Region::contains(const Vec& p) const {
  return (p.array() >= min.array()).all() && (p.array() <= max.array()).all();
}

Dataset::Dataset(std::vector<ViewFrame> views, int pose_dim)
    : views_(std::move(views)), pose_dim_(pose_dim) {
  std::stable_sort(views_.begin(), views_.end(),
                   [](const ViewFrame& a, const ViewFrame& b) { return a.epoch < b.epoch; });
  num_epochs_ = views_.empty() ? 0 : views_.back().epoch;
  if (!views_.empty() && views_.front().epoch != 1)
    throw InvalidInput("epochs must start at 1");
  epoch_views_.assign(num_epochs_, {});
  for (int slot = 0; slot < num_views(); ++slot) {
    const auto& v = views_[slot];
    if (v.region.min.size() != pose_dim || v.region.max.size() != pose_dim)
      throw InvalidInput("region dimension mismatch");
    if ((v.region.min.array() > v.region.max.array()).any())
      throw InvalidInput("region min exceeds max");
    auto& slots = epoch_views_[v.epoch - 1];
    for (int other : slots)
      if (views_[other].view_index == v.view_index)
        throw InvalidInput("duplicate view index " + std::to_string(v.view_index) +
                           " in epoch " + std::to_string(v.epoch));
    slots.push_back(slot);
    view_offset_.push_back(static_cast<ObsId>(obs_view_.size()));
    for (int i = 0; i < static_cast<int>(v.observations.size()); ++i) {
      if (v.observations[i].pose.size() != pose_dim)
        throw InvalidInput("observation pose dimension mismatch");
      obs_view_.push_back(slot);
      obs_index_.push_back(i);
    }
  }
  for (int t = 1; t <= num_epochs_; ++t)
    if (epoch_views_[t - 1].empty())
      throw InvalidInput("epoch " + std::to_string(t) + " has no views; epochs must be contiguous");
}

const Observation& Dataset::obs(ObsId o) const {
  return views_[obs_view_[o]].observations[obs_index_[o]];
}

double Dataset::region_bbox_volume() const {
  if (views_.empty()) return 1.0;
  Vec lo = views_.front().region.min;
  Vec hi = views_.front().region.max;
  for (const auto& v : views_) {
    lo = lo.cwiseMin(v.region.min);
    hi = hi.cwiseMax(v.region.max);
  }
  return (hi - lo).prod();
}

void Dataset::check_against(const ModelConfig& cfg) const {
  if (!views_.empty() && pose_dim_ != cfg.pose_dim)
    throw InvalidInput("dataset pose dimension " + std::to_string(pose_dim_) +
                       " does not match config pose_dim " + std::to_string(cfg.pose_dim));
  for (ObsId o = 0; o < num_obs(); ++o) {
    const int y = obs(o).type_obs;
    if (y < 0 || y >= cfg.num_types)
      throw InvalidInput("observation type " + std::to_string(y + 1) + " outside 1.." +
                         std::to_string(cfg.num_types));
  }
}

ModelConfig resolve_world_volume(ModelConfig cfg, const Dataset& data) {
  if (!cfg.world_volume) {
    const double v = data.region_bbox_volume();
    cfg.world_volume = v > 0.0 ? v : 1.0;
  }
  return cfg;
}

double obs_log_density(const Observation& obs, int attr, const Vec& pose, const ModelConfig& cfg) {
  if (obs.pose.size() != cfg.pose_dim || pose.size() != cfg.pose_dim)
    throw InvalidInput("obs_log_density: dimension mismatch");
  if (attr < 0 || attr >= cfg.num_types) throw InvalidInput("obs_log_density: bad type id");
  const double phi = cfg.confusion(attr, obs.type_obs);
  if (phi <= 0.0) return kNegInf;
  return std::log(phi) + log_normal_pdf(obs.pose, pose, cfg.sense_cov);
}

double fp_obs_log_density(const Observation& obs, const ModelConfig& cfg) {
  if (obs.pose.size() != cfg.pose_dim) throw InvalidInput("fp_obs_log_density: dimension mismatch");
  return cfg.log_type_marginal(obs.type_obs) - std::log(cfg.volume());
}

double transition_log_density(int attr, const Vec& pose_to, const Vec& pose_from, int dt,
                              const ModelConfig& cfg) {
  if (dt < 1) throw InvalidInput("transition_log_density: dt must be >= 1");
  if (pose_to.size() != cfg.pose_dim || pose_from.size() != cfg.pose_dim)
    throw InvalidInput("transition_log_density: dimension mismatch");
  return log_normal_pdf(pose_to, pose_from, Mat(static_cast<double>(dt) * cfg.trans_cov[attr]));
}

double survival_prob(int attr, int dt, const ModelConfig& cfg) {
  if (dt < 0) throw InvalidInput("survival_prob: negative dt");
  return std::pow(cfg.survival[attr], dt);
}

}  // namespace wm
