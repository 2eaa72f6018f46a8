#include "doctest.h"
#include "support.hpp"

#include "wm/world_state.hpp"

#include <cmath>

using namespace wm;
using namespace wmtest;

namespace {

EpochEvidence ev(int t, int n, Vec mean) { return {t, n, std::move(mean)}; }

ModelConfig scalar_config() {
  ModelConfig c = config(1, 1);
  c.sense_cov = eye(1);
  c.trans_cov = {eye(1)};
  return c;
}

TrackFit fit_of(const Dataset& d, const ModelConfig& c, std::vector<ObsId> members) {
  return fit_track(gather_evidence(members, d, c), c);
}

}  // namespace

TEST_CASE("type posterior") {
  const ModelConfig uni = config(4, 2);
  const TypePosterior empty = type_posterior_update({}, uni);
  CHECK(empty.pmf().isApprox(uni.type_prior));

  const ModelConfig ident = config(4, 2, 1.0);
  const std::vector<int> one{1};
  const Eigen::VectorXd p = type_posterior_update(one, ident).pmf();
  CHECK(p(1) == doctest::Approx(1.0));
  CHECK(p(0) == 0.0);

  ModelConfig loose = config(4, 2);
  loose.confusion = Eigen::MatrixXd::Constant(4, 4, 0.1);
  loose.confusion.diagonal().setConstant(0.6);
  const std::vector<int> three{0, 0, 0};
  const double want = 0.216 / (0.216 + 3 * 0.001);
  CHECK(type_posterior_update(three, loose).pmf()(0) == doctest::Approx(want).epsilon(1e-12));
  CHECK(want == doctest::Approx(0.9863).epsilon(1e-4));

  // order independence, and counts agree with sequences
  const std::vector<int> a{0, 2, 1, 2}, b{2, 2, 0, 1}, counts{1, 1, 2, 0};
  const ModelConfig c6 = config(4, 2, 0.6);
  CHECK(type_posterior_update(a, c6).pmf().isApprox(type_posterior_update(b, c6).pmf(), 1e-14));
  CHECK(type_posterior_from_counts(counts, c6).pmf().isApprox(type_posterior_update(a, c6).pmf(), 1e-14));

  const std::vector<int> clash{0, 1};
  CHECK_THROWS_AS(type_posterior_update(clash, ident), NumericalError);
}

TEST_CASE("type predictive") {
  const ModelConfig ident = config(3, 2, 1.0);
  const std::vector<int> one{2};
  CHECK(type_predictive(type_posterior_update(one, ident), 2, ident) == doctest::Approx(0.0));

  const ModelConfig c = config(3, 2, 0.7);
  const TypePosterior uniform = type_posterior_update({}, c);
  CHECK(type_predictive(uniform, 1, c) == doctest::Approx(std::log(c.confusion.col(1).mean())));

  const ModelConfig single = config(1, 2);
  CHECK(type_predictive(type_posterior_update({}, single), 0, single) == doctest::Approx(0.0));
}

TEST_CASE("kalman filter examples") {
  const ModelConfig c2 = config(1, 2);
  const std::vector<EpochEvidence> single{ev(1, 3, vec({1, 2}))};
  const auto b = kalman_filter(single, 0, c2);
  REQUIRE(b.size() == 1);
  CHECK(b[0].filtered.mean.isApprox(vec({1, 2})));
  CHECK(b[0].filtered.cov.isApprox(eye(2, 1.0 / 3)));

  const std::vector<EpochEvidence> gap{ev(1, 1, vec({1, 2})), ev(2, 0, Vec())};
  const auto g = kalman_filter(gap, 0, c2);
  REQUIRE(g.size() == 2);
  CHECK(g[1].filtered.mean.isApprox(g[0].filtered.mean));
  CHECK(g[1].filtered.cov.isApprox(g[0].filtered.cov + eye(2)));

  const ModelConfig c1 = scalar_config();
  const std::vector<EpochEvidence> chain{ev(1, 1, vec({0})), ev(2, 1, vec({2}))};
  auto f = kalman_filter(chain, 0, c1);
  CHECK(f[1].filtered.mean(0) == doctest::Approx(4.0 / 3));
  CHECK(f[1].filtered.cov(0, 0) == doctest::Approx(2.0 / 3));

  const auto s = rts_smooth(f, 0, c1);
  CHECK(s[0].smoothed.mean(0) == doctest::Approx(2.0 / 3));
  CHECK(s[0].smoothed.cov(0, 0) == doctest::Approx(2.0 / 3));
  CHECK(s[1].smoothed.mean(0) == doctest::Approx(s[1].filtered.mean(0)));
}

TEST_CASE("smoother base case and static limit") {
  const ModelConfig c2 = config(1, 2);
  const std::vector<EpochEvidence> single{ev(1, 2, vec({3, -1}))};
  const auto s = rts_smooth(kalman_filter(single, 0, c2), 0, c2);
  CHECK(s[0].smoothed.mean.isApprox(s[0].filtered.mean));
  CHECK(s[0].smoothed.cov.isApprox(s[0].filtered.cov));

  ModelConfig still = config(1, 2);
  still.trans_cov = {eye(2, 1e-12)};
  const std::vector<EpochEvidence> chain{ev(1, 1, vec({0, 0})), ev(2, 2, vec({1, 3})),
                                         ev(3, 0, Vec()), ev(4, 1, vec({-2, 1}))};
  const auto r = rts_smooth(kalman_filter(chain, 0, still), 0, still);
  for (const auto& x : r) CHECK((x.smoothed.mean - r[0].smoothed.mean).norm() < 1e-4);
  // consensus is the pooled mean
  CHECK(r[0].smoothed.mean.isApprox(vec({0, 7.0 / 4}), 1e-6));
}

TEST_CASE("explicit prior is the predicted belief") {
  const ModelConfig c1 = scalar_config();
  const std::vector<EpochEvidence> e{ev(1, 1, vec({2}))};
  const auto b = kalman_filter(e, 0, c1, GaussianBelief{vec({0}), eye(1)});
  CHECK(b[0].filtered.mean(0) == doctest::Approx(1.0));
  CHECK(b[0].filtered.cov(0, 0) == doctest::Approx(0.5));
}

TEST_CASE("evidence and fits") {
  const ModelConfig c = config(1, 2);
  const Dataset d = dataset(2, {{1, {ob(0, {0, 0})}}, {1, {ob(0, {2, 0})}}, {3, {ob(0, {5, 5})}},
                                {2, {}}});
  const std::vector<ObsId> all{0, 1, 2};
  const TrackEvidence e = gather_evidence(all, d, c);
  REQUIRE(e.epochs.size() == 2);
  CHECK(e.birth() == 1);
  CHECK(e.death() == 3);
  CHECK(e.epochs[0].count == 2);
  CHECK(e.epochs[0].mean.isApprox(vec({1, 0})));
  CHECK(e.scatter[0] == doctest::Approx(2.0));
  CHECK(e.total == 3);

  const TrackFit f = fit_track(e, c);
  CHECK(f.beliefs.size() == 3);
  CHECK(f.instantiated_at(1));
  CHECK_FALSE(f.instantiated_at(2));
  CHECK(f.spans(2));
  CHECK(previous_instantiation(f, 3) == 1);
  CHECK_FALSE(previous_instantiation(f, 1).has_value());
  const GaussianBelief after = f.pose_at(5, c);
  CHECK(after.cov.isApprox(f.belief(3).smoothed.cov + eye(2, 2.0)));
}

TEST_CASE("marginal likelihoods") {
  const ModelConfig c = config(1, 2);
  const Dataset d = dataset(2, {{1, {ob(0, {1, 1})}}, {1, {ob(0, {2, 3})}}, {2, {ob(0, {0, 4})}}});

  const std::vector<ObsId> one{0};
  const TrackFit f1 = fit_of(d, c, one);
  CHECK(track_marginal_loglik(f1, one, d, c) ==
        doctest::Approx(-kLog2Pi - 0.5 * std::log(4.0)));
  CHECK(track_marginal_loglik(f1, {}, d, c) == 0.0);

  // chain rule against hand-built sequential predictives (flat prior)
  const std::vector<ObsId> same{0, 1};
  CHECK(track_chain_loglik(fit_of(d, c, same)) ==
        doctest::Approx(log_normal_pdf(vec({2, 3}), vec({1, 1}), eye(2, 2.0))));
  const std::vector<ObsId> across{0, 2};
  CHECK(track_chain_loglik(fit_of(d, c, across)) ==
        doctest::Approx(log_normal_pdf(vec({0, 4}), vec({1, 1}), eye(2, 3.0))));
  const std::vector<ObsId> three{0, 1, 2};
  const double seq = log_normal_pdf(vec({2, 3}), vec({1, 1}), eye(2, 2.0)) +
                     log_normal_pdf(vec({0, 4}), vec({1.5, 2}), eye(2, 0.5 + 1 + 1));
  CHECK(track_chain_loglik(fit_of(d, c, three)) == doctest::Approx(seq));

  // type part: sum_a pi(a) phi(y1|a) phi(y2|a)
  const ModelConfig c3 = config(3, 2, 0.6);
  const Dataset dt = dataset(2, {{1, {ob(0, {0, 0})}}, {1, {ob(1, {0, 0})}}});
  const std::vector<ObsId> pair{0, 1};
  double type_part = 0;
  for (int a = 0; a < 3; ++a) type_part += c3.confusion(a, 0) * c3.confusion(a, 1) / 3;
  CHECK(track_chain_loglik(fit_of(dt, c3, pair)) ==
        doctest::Approx(std::log(type_part) + log_normal_pdf(vec({0, 0}), vec({0, 0}), eye(2, 2.0))));
}

TEST_CASE("predictives") {
  const ModelConfig c = config(1, 2);
  const Dataset d = dataset(2, {{1, {ob(0, {1, 1})}}});
  const std::vector<ObsId> one{0};
  const TrackFit f = fit_of(d, c, one);
  CHECK(predictive_instantiated(f, 1, ob(0, {1, 1}), c) == doctest::Approx(-std::log(4 * M_PI)));
  const double far = predictive_instantiated(f, 1, ob(0, {1 + std::sqrt(200.0), 1}), c);
  CHECK(far == doctest::Approx(-std::log(4 * M_PI) - 50.0));
  CHECK_THROWS_AS(predictive_instantiated(f, 2, ob(0, {1, 1}), c), ContractViolation);

  const ModelConfig ident = config(2, 2, 1.0);
  const Dataset d2 = dataset(2, {{1, {ob(0, {1, 1})}}});
  const TrackFit f2 = fit_of(d2, ident, one);
  CHECK(predictive_instantiated(f2, 1, ob(1, {1, 1}), ident) == kNegInf);

  const ModelConfig c1 = scalar_config();
  const Dataset d1 = dataset(1, {{1, {ob(0, {0})}}, {2, {}}, {3, {}}});
  const TrackFit g = fit_of(d1, c1, one);
  CHECK(predictive_dormant(g, 3, ob(0, {1}), c1) == doctest::Approx(log_normal_pdf(vec({1}), vec({0}), eye(1, 4.0))));
  CHECK_THROWS_AS(predictive_dormant(g, 1, ob(0, {1}), c1), ContractViolation);

  ModelConfig still = config(1, 2);
  still.trans_cov = {eye(2, 1e-12)};
  const Dataset ds = dataset(2, {{1, {ob(0, {1, 1})}}, {2, {}}});
  const TrackFit h = fit_of(ds, still, one);
  CHECK(predictive_dormant(h, 2, ob(0, {2, 1}), still) ==
        doctest::Approx(predictive_instantiated(h, 1, ob(0, {2, 1}), still)).epsilon(1e-9));

  ModelConfig vol = config(1, 2);
  vol.world_volume = 100.0;
  CHECK(predictive_new(ob(0, {3, 3}), vol) == doctest::Approx(-std::log(100.0)));
}
