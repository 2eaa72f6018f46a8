#pragma once

#include "wm/model.hpp"

#include <map>
#include <optional>
#include <span>
#include <vector>

namespace wm {

/// Discrete posterior psi(a) over object types, stored as log-probabilities.
struct TypePosterior {
  Eigen::VectorXd log_pmf;

  /// Most likely type; ties go to the lowest id.
  [[nodiscard]] int argmax() const;
  [[nodiscard]] Eigen::VectorXd pmf() const {
    return log_pmf.unaryExpr([](double x) { return std::exp(x); });
  }
};

/// psi(a) proportional to pi(a) prod_i phi(y_i | a). Order-independent; an
/// empty input returns pi. Throws NumericalError if every type has zero mass.
TypePosterior type_posterior_update(std::span<const int> type_obs, const ModelConfig& cfg);

/// Same posterior from per-type observation counts.
TypePosterior type_posterior_from_counts(std::span<const int> type_counts, const ModelConfig& cfg);

/// log sum_a phi(y_d | a) psi(a).
double type_predictive(const TypePosterior& psi, int y_d, const ModelConfig& cfg);

struct GaussianBelief {
  Vec mean;
  Mat cov;
};

/// Batched pose evidence for one epoch: N^t observations with sample mean ybar^t.
struct EpochEvidence {
  int epoch = 0;
  int count = 0;
  Vec mean;
};

struct PoseBelief {
  int epoch = 0;
  int count = 0;
  Vec obs_mean;  // valid when count > 0
  GaussianBelief predicted;
  GaussianBelief filtered;
  GaussianBelief smoothed;
};

/// Forward Kalman pass over epochs [first, last] of `evidence` (sorted by epoch;
/// missing epochs are treated as N^t = 0). Without an explicit prior the filter
/// starts from the noninformative limit (ybar, Sigma_s / N) at the first epoch,
/// which must then carry at least one observation. Smoothed fields are left
/// equal to the filtered ones.
std::vector<PoseBelief> kalman_filter(std::span<const EpochEvidence> evidence, int attr,
                                      const ModelConfig& cfg,
                                      const std::optional<GaussianBelief>& explicit_prior = {});

/// Rauch-Tung-Striebel backward pass; fills `smoothed` of every belief.
std::vector<PoseBelief> rts_smooth(std::vector<PoseBelief> beliefs, int attr,
                                   const ModelConfig& cfg);

/// Sufficient statistics of the observations assigned to one track.
struct TrackEvidence {
  std::vector<EpochEvidence> epochs;  // instantiated epochs only, ascending
  std::vector<double> scatter;        // per epoch: sum_i (y_i - ybar)^T Sigma_s^-1 (y_i - ybar)
  std::vector<int> type_counts;       // per observed type
  int total = 0;

  [[nodiscard]] bool empty() const { return total == 0; }
  [[nodiscard]] int birth() const { return epochs.front().epoch; }
  [[nodiscard]] int death() const { return epochs.back().epoch; }
};

/// Builds evidence from a set of observations (grouped by epoch or not).
TrackEvidence gather_evidence(std::span<const ObsId> members, const Dataset& data,
                              const ModelConfig& cfg);

/// Posterior of one track: type pmf and smoothed pose beliefs on [birth, death].
struct TrackFit {
  TypePosterior type_posterior;
  int dyn_type = 0;  // most likely type, drives Q(a) and q(a)
  int birth = 0;
  int death = 0;
  std::vector<PoseBelief> beliefs;  // epochs birth..death
  std::vector<int> instantiated;    // epochs with N^t > 0
  double log_type_marginal = 0.0;   // log sum_a pi(a) prod_i phi(y_i | a)
  double log_pose_marginal = 0.0;   // flat-prior Gaussian evidence, see track_chain_loglik
  int total = 0;

  [[nodiscard]] const PoseBelief& belief(int t) const { return beliefs[t - birth]; }
  [[nodiscard]] bool spans(int t) const { return t >= birth && t <= death; }
  [[nodiscard]] bool instantiated_at(int t) const;
  /// Smoothed pose belief at t inside the lifetime; outside it, the belief of the
  /// nearest end propagated by the random walk of the most likely type.
  [[nodiscard]] GaussianBelief pose_at(int t, const ModelConfig& cfg) const;
};

/// Filters, smooths and scores a track. `evidence` must be non-empty.
TrackFit fit_track(const TrackEvidence& evidence, const ModelConfig& cfg);

/// Plug-in marginal log-likelihood of a track's observations: every observation
/// scored under the smoothed belief of its epoch, log N(y_c; mu^t, Sigma^t +
/// Sigma_s), plus its type predictive under the full type posterior. Empty -> 0.
double track_marginal_loglik(const TrackFit& fit, std::span<const ObsId> members,
                             const Dataset& data, const ModelConfig& cfg);

/// Exact evidence of a track under a flat initial pose prior: the type marginal
/// plus the chain rule of Kalman innovations over per-epoch sample means and the
/// within-epoch scatter terms. The flat prior's normalisation (1/V(world) in the
/// score) is left to the caller.
double track_chain_loglik(const TrackFit& fit);

/// Case 1: t is an instantiated epoch of the track.
double predictive_instantiated(const TrackFit& fit, int t, const Observation& obs,
                               const ModelConfig& cfg);

/// Case 2: t lies after the track's last instantiation before t (tau_prev). The
/// survival weight is applied by the caller.
double predictive_dormant(const TrackFit& fit, int t, const Observation& obs,
                          const ModelConfig& cfg);

/// Case 3: new track; identical to the clutter density.
double predictive_new(const Observation& obs, const ModelConfig& cfg);

/// Last instantiated epoch strictly before t, if any.
std::optional<int> previous_instantiation(const TrackFit& fit, int t);

}  // namespace wm
