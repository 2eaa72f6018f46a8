#include "doctest.h"
#include "support.hpp"

#include "wm/icm.hpp"

#include <algorithm>
#include <numeric>

using namespace wm;
using namespace wmtest;

TEST_CASE("assignment examples") {
  Eigen::MatrixXd a(2, 2);
  a << 0, -1, -1, 0;
  const AssignmentSolution s = solve_assignment(a);
  CHECK(s.col_of_row == std::vector<int>{0, 1});
  CHECK(s.total == 0.0);

  Eigen::MatrixXd b(2, 2);
  b << kNegInf, 3, 2, kNegInf;
  const AssignmentSolution t = solve_assignment(b);
  CHECK(t.col_of_row == std::vector<int>{1, 0});
  CHECK(t.total == 5.0);

  Eigen::MatrixXd c(2, 2);
  c << kNegInf, kNegInf, 1, 2;
  CHECK_THROWS_AS(solve_assignment(c), Infeasible);
  Eigen::MatrixXd d(2, 2);
  d << kNegInf, 1, kNegInf, 2;
  CHECK_THROWS_AS(solve_assignment(d), Infeasible);

  // ties: lexicographically smallest
  const AssignmentSolution u = solve_assignment(Eigen::MatrixXd::Zero(3, 3));
  CHECK(u.col_of_row == std::vector<int>{0, 1, 2});
}

TEST_CASE("assignment against brute force") {
  Rng rng(2);
  std::uniform_real_distribution<double> val(-5.0, 5.0);
  for (int rep = 0; rep < 200; ++rep) {
    const int n = 1 + rep % 6;
    Eigen::MatrixXd m(n, n);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) m(i, j) = val(rng);
    std::vector<int> p(n);
    std::iota(p.begin(), p.end(), 0);
    double best = kNegInf;
    do {
      double s = 0;
      for (int i = 0; i < n; ++i) s += m(i, p[i]);
      best = std::max(best, s);
    } while (std::next_permutation(p.begin(), p.end()));
    CHECK(solve_assignment(m).total == doctest::Approx(best).epsilon(1e-12));
  }
}

TEST_CASE("payoff of a lone observation") {
  const ModelConfig c = config(1, 2);
  const Dataset d = dataset(2, {{1, {ob(0, {1, 1})}}});
  WorldState s(d, c);
  s.clear_view(0);
  for (PayoffKind kind : {PayoffKind::Forward, PayoffKind::Exact}) {
    const PayoffMatrix p = build_payoff(s, 0, kind);
    CHECK(p.side() == 2);
    CHECK(p.k() == 0);
    const AssignmentSolution sol = solve_assignment(p.value);
    const DecodedView v = decode_assignment(p, sol, s);
    REQUIRE(v.lambda.size() == 1);
  }
  const PayoffMatrix fwd = build_payoff(s, 0, PayoffKind::Forward);
  const CaseWeights w = case_log_weights(s, 0, 0);
  CHECK(fwd.value(fwd.new_row(0), 0) == doctest::Approx(w.new_track));
  CHECK(fwd.value(fwd.fp_row(0), 0) == doctest::Approx(w.fp));
}

TEST_CASE("payoff with a dead track") {
  const ModelConfig c = config(1, 2);
  const Dataset d = dataset(2, {{1, {ob(0, {0, 0})}}, {2, {}}, {3, {ob(0, {0, 1})}}});
  WorldState s(d, c);
  s.assign(0, 1);
  s.clear_view(2);
  const PayoffMatrix p = build_payoff(s, 2, PayoffKind::Forward);
  REQUIRE(p.k() == 1);
  const CaseWeights w = case_log_weights(s, 2, 0);
  REQUIRE(w.tracks.size() == 1);
  CHECK(p.value(0, 0) == doctest::Approx(w.tracks[0].second));
  CHECK(p.value(0, p.m) == 0.0);  // not alive: no miss cost
}

TEST_CASE("exact payoff optimum is the conditional mode") {
  const ModelConfig c = config(2, 2, 0.8);
  const Dataset d = dataset(2, {{1, {ob(0, {0, 0}), ob(1, {6, 6})}},
                                {2, {ob(0, {0.5, 0}), ob(1, {6, 5}), ob(0, {-8, 3})}}});
  WorldState s(d, c);
  s.assign(0, 1);
  s.assign(1, 2);
  s.clear_view(1);
  const PayoffMatrix p = build_payoff(s, 1, PayoffKind::Exact);
  const ViewProblem vp = build_view_problem(s, 1, {});
  double best = kNegInf;
  std::vector<int> cur(3);
  auto rec = [&](auto&& self, int i) -> void {
    if (i == 3) {
      best = std::max(best, vp.objective(cur));
      return;
    }
    for (int ch = -2; ch < static_cast<int>(vp.tracks.size()); ++ch) {
      if (ch >= 0 && std::find(cur.begin(), cur.begin() + i, ch) != cur.begin() + i) continue;
      cur[i] = ch;
      self(self, i + 1);
    }
  };
  rec(rec, 0);
  const DecodedView v = decode_assignment(p, solve_assignment(p.value), s);
  const std::vector<int> ch = vp.choice_of(v.lambda);
  CHECK(vp.objective(ch) == doctest::Approx(best));
}

TEST_CASE("ICM converges and is idempotent") {
  const Simulation sim = simulate(sim_preset("sim-default", 4));
  const ModelConfig c = inference_config(sim_preset("sim-default", 4));
  WorldState s(sim.data, c);
  reset_inactive(s);
  const IcmResult r = icm_until_convergence(s);
  CHECK(r.converged);
  CHECK(std::is_sorted(r.commits.begin(), r.commits.end()));
  CHECK(global_log_score(state_from_labels(sim.data, c, s.labels())) == doctest::Approx(r.trace.back()));

  const IcmResult again = icm_until_convergence(s);
  CHECK(again.sweeps == 1);
  CHECK(again.commits.empty());
  CHECK(again.converged);
}
