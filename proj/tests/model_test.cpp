#include "doctest.h"
#include "support.hpp"

#include <cmath>

using namespace wm;
using namespace wmtest;

namespace {

ModelConfig loose_confusion() {
  // 0.6 diagonal, 0.1 elsewhere: columns sum to 0.9
  ModelConfig c = config(4, 2);
  c.confusion = Eigen::MatrixXd::Constant(4, 4, 0.1);
  c.confusion.diagonal().setConstant(0.6);
  return c;
}

}  // namespace

TEST_CASE("obs density at the mean") {
  const ModelConfig c = config(1, 2);
  CHECK(obs_log_density({0, vec({0, 0})}, 0, vec({0, 0}), c) == doctest::Approx(-1.837877).epsilon(1e-6));
}

TEST_CASE("obs density with zero confusion entry") {
  const ModelConfig c = config(2, 2, 1.0);
  CHECK(obs_log_density({1, vec({0, 0})}, 0, vec({0, 0}), c) == kNegInf);
}

TEST_CASE("obs density with offset") {
  const ModelConfig c = loose_confusion();
  const double want = std::log(0.6) - std::log(2 * M_PI) - 0.5;
  CHECK(obs_log_density({2, vec({1, 0})}, 2, vec({0, 0}), c) == doctest::Approx(want).epsilon(1e-12));
}

TEST_CASE("obs density rejects dimension mismatch") {
  const ModelConfig c = config(1, 2);
  CHECK_THROWS_AS(obs_log_density({0, vec({0, 0, 0})}, 0, vec({0, 0}), c), InvalidInput);
}

TEST_CASE("fp density") {
  ModelConfig c = loose_confusion();
  CHECK(fp_obs_log_density({0, vec({5, 5})}, c) == doctest::Approx(std::log(0.225) - std::log(1e4)));
  ModelConfig one = config(1, 2);
  one.world_volume = 100.0;
  CHECK(fp_obs_log_density({0, vec({1, 2})}, one) == doctest::Approx(-std::log(100.0)));
  one.world_volume = 1.0;
  CHECK(fp_obs_log_density({0, vec({1, 2})}, one) == doctest::Approx(0.0));
}

TEST_CASE("transition density") {
  const ModelConfig c = config(1, 2);
  CHECK(transition_log_density(0, vec({1, 1}), vec({1, 1}), 1, c) == doctest::Approx(-kLog2Pi));
  CHECK(transition_log_density(0, vec({2, 0}), vec({0, 0}), 4, c) ==
        doctest::Approx(-kLog2Pi - std::log(4.0) - 0.5));
  CHECK_THROWS_AS(transition_log_density(0, vec({0, 0}), vec({0, 0}), 0, c), InvalidInput);
}

TEST_CASE("survival") {
  ModelConfig c = config(1, 2);
  c.survival = {0.9};
  CHECK(survival_prob(0, 1, c) == doctest::Approx(0.9));
  c.survival = {1.0};
  CHECK(survival_prob(0, 17, c) == 1.0);
  c.survival = {0.5};
  CHECK(survival_prob(0, 3, c) == doctest::Approx(0.125));
}

TEST_CASE("config validation") {
  ModelConfig c = config(3, 2, 0.6);
  CHECK_NOTHROW(c.validate());
  c.confusion(0, 0) = 0.7;
  CHECK_THROWS_AS(c.validate(), InvalidInput);
  c = config(3, 2, 0.6);
  c.sense_cov(0, 0) = -1;
  CHECK_THROWS_AS(c.validate(), InvalidInput);
  c = config(3, 2, 0.6);
  c.survival.pop_back();
  CHECK_THROWS_AS(c.validate(), InvalidInput);
  c = config(3, 2, 0.6);
  c.world_volume.reset();
  CHECK_THROWS_AS((void)c.volume(), ContractViolation);
}

TEST_CASE("dataset invariants") {
  CHECK_THROWS_AS(dataset(2, {{2, {}}}), InvalidInput);  // epochs start at 1
  CHECK_THROWS_AS(dataset(2, {{1, {}}, {3, {}}}), InvalidInput);
  CHECK_THROWS_AS(dataset(2, {{1, {ob(0, {1, 2, 3})}}}), InvalidInput);
  const Dataset d = dataset(2, {{1, {ob(0, {1, 2}), ob(0, {3, 4})}}, {2, {ob(0, {5, 6})}}, {1, {}}});
  CHECK(d.num_epochs() == 2);
  CHECK(d.num_views() == 3);
  CHECK(d.epoch_views(1).size() == 2);
  CHECK(d.obs_epoch(2) == 2);
  ModelConfig c = config(1, 2);
  c.world_volume.reset();
  CHECK(resolve_world_volume(c, d).volume() == doctest::Approx(4e12));
  ModelConfig three = config(1, 3);
  CHECK_THROWS_AS(d.check_against(three), InvalidInput);
}

TEST_CASE("numeric helpers") {
  const std::vector<double> xs{kNegInf, std::log(1.0), std::log(3.0)};
  CHECK(log_sum_exp(xs) == doctest::Approx(std::log(4.0)));
  CHECK(log_sum_exp(std::vector<double>{}) == kNegInf);
  CHECK(log_binomial_pmf(0, 3, 0.0) == 0.0);
  CHECK(log_binomial_pmf(2, 4, 0.5) == doctest::Approx(std::log(6.0 / 16.0)));
  CHECK(normal_cdf(0.0) == doctest::Approx(0.5));
}
