#pragma once

#include "wm/association.hpp"

#include <map>

namespace wm {

/// Explicit (un-collapsed) parameters of one track.
struct TrackParams {
  int type = 0;
  std::map<int, Vec> pose;        // one draw per epoch of [birth, death]
  std::vector<int> instantiated;  // epochs with assigned observations, ascending
  int count = 0;                  // assigned observations, all epochs

  [[nodiscard]] int birth() const { return pose.begin()->first; }
  [[nodiscard]] int death() const { return pose.rbegin()->first; }
};

enum class GibbsCase { Instantiated = 1, Revival = 2, Bridge = 3, Backward = 4, New = 5 };

/// Which case of the five-case conditional applies to a track at epoch t.
GibbsCase classify_case(const TrackParams& params, int t);

/// Pose prior at t between instantiations at t - g1 and t + g2:
/// N((g2 x_prev + g1 x_next) / (g1 + g2), g1 g2 / (g1 + g2) Q).
GaussianBelief bridge(const Vec& x_prev, const Vec& x_next, int g1, int g2, const Mat& q);

/// Log weight of assigning `obs` (epoch t) under the given case. `params` is
/// ignored for GibbsCase::New. Count prefactors use params.count, which the
/// caller must exclude the observation from. Throws ContractViolation when the
/// case does not match the track's timeline.
double exact_gibbs_case_weight(GibbsCase which, const Observation& obs, int t,
                               const TrackParams* params, const ModelConfig& cfg);

/// Forward-filter backward-sample draw of a track's pose chain given its
/// evidence; the type is drawn from the type posterior.
TrackParams sample_track_params(const TrackEvidence& evidence, Rng& rng, const ModelConfig& cfg);

/// Draw from N(mean, cov) using a symmetric square root (tolerates PSD cov).
Vec sample_gaussian(const Vec& mean, const Mat& cov, Rng& rng);

}  // namespace wm
