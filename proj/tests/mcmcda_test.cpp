#include "doctest.h"
#include "support.hpp"

#include "wm/mcmcda.hpp"

#include <cmath>
#include <map>

using namespace wm;
using namespace wmtest;

namespace {

// Relabels tracks by first appearance.
std::vector<TrackId> canonical(std::span<const TrackId> labels) {
  std::map<TrackId, TrackId> ren;
  std::vector<TrackId> out;
  for (TrackId k : labels) {
    if (k <= 0) {
      out.push_back(k);
      continue;
    }
    auto [it, fresh] = ren.emplace(k, static_cast<TrackId>(ren.size() + 1));
    out.push_back(it->second);
  }
  return out;
}

}  // namespace

TEST_CASE("mh acceptance edge cases") {
  Rng rng(1);
  for (int i = 0; i < 1000; ++i) REQUIRE(mh_accept(-3.0, -3.0, 0.0, 0.0, rng));
  for (int i = 0; i < 1000; ++i) REQUIRE_FALSE(mh_accept(-3.0, kNegInf, 0.0, 0.0, rng));
  REQUIRE_FALSE(mh_accept(-3.0, std::nan(""), 0.0, 0.0, rng));
}

TEST_CASE("one sample is the all-FP start; runs are reproducible") {
  const Simulation sim = simulate(sim_preset("sim-default", 2));
  const ModelConfig c = inference_config(sim_preset("sim-default", 2));
  const McmcdaResult one = run_mcmcda(sim.data, c, 1, 5);
  CHECK(std::all_of(one.map_labels.begin(), one.map_labels.end(), [](TrackId k) { return k == kFalsePositive; }));
  CHECK(one.trace.size() == 1);
  CHECK(one.map_score == doctest::Approx(WorldState(sim.data, c).log_score()));

  McmcdaOptions opt;
  opt.store_samples = true;
  const McmcdaResult a = run_mcmcda(sim.data, c, 3000, 8, opt);
  const McmcdaResult b = run_mcmcda(sim.data, c, 3000, 8, opt);
  CHECK(a.trace == b.trace);
  CHECK(a.samples == b.samples);
  CHECK(a.map_labels == b.map_labels);
  CHECK(a.map_score == doctest::Approx(global_log_score(state_from_labels(sim.data, c, a.map_labels))));
}

TEST_CASE("partition bookkeeping") {
  Partition p;
  p.item_track.assign(4, Partition::kFree);
  p.add(3, 0);
  p.add(3, 2);
  CHECK(p.num_tracks() == 1);
  CHECK(p.free_items() == std::vector<int>{1, 3});
  p.remove(0);
  p.remove(2);
  CHECK(p.num_tracks() == 0);
}

TEST_CASE("chain samples the score restricted to its state space") {
  ModelConfig c = config(1, 1);
  c.p_fp = 0.3;
  const Dataset d = dataset(1, {{1, {ob(0, {0.0}), ob(0, {1.5})}}, {2, {ob(0, {0.4})}},
                                {3, {ob(0, {0.2}), ob(0, {1.2})}}});
  const int n = d.num_obs();

  // every labelling whose tracks hold >= 2 observations from distinct views
  std::map<std::vector<TrackId>, double> target;
  std::vector<TrackId> cur(n, 0);
  auto rec = [&](auto&& self, int i, int used) -> void {
    if (i == n) {
      std::map<TrackId, int> size;
      for (TrackId k : cur)
        if (k > 0) ++size[k];
      for (auto [k, s] : size)
        if (s < 2) return;
      target[cur] = global_log_score(state_from_labels(d, c, cur));
      return;
    }
    for (TrackId k = 0; k <= used + 1; ++k) {
      bool clash = false;
      for (int j = 0; j < i; ++j) clash |= k > 0 && cur[j] == k && d.obs_view(j) == d.obs_view(i);
      if (clash) continue;
      cur[i] = k;
      self(self, i + 1, std::max(used, static_cast<int>(k)));
    }
  };
  rec(rec, 0, 0);
  std::vector<double> logs;
  for (auto& [k, v] : target) logs.push_back(v);
  const double z = log_sum_exp(logs);

  WorldState s(d, c);
  McmcdaChain chain(s, observation_items(d), McmcdaOptions{}, 21);
  std::map<std::vector<TrackId>, long> hits;
  const long steps = 300000;
  for (long i = 0; i < steps; ++i) {
    chain.mh_step();
    ++hits[canonical(chain.state().labels())];
  }
  double tv = 0;
  for (auto& [k, v] : target) {
    const auto it = hits.find(k);
    const double emp = it == hits.end() ? 0.0 : it->second / double(steps);
    tv += std::abs(emp - std::exp(v - z));
  }
  for (auto& [k, v] : hits) CHECK(target.count(k) == 1);
  CHECK(tv / 2 < 0.03);
}

TEST_CASE("two-stage on one epoch is the stage-1 ICM result") {
  const ModelConfig c = config(1, 2);
  const Dataset d = dataset(2, {{1, {ob(0, {0, 0}), ob(0, {5, 5})}}, {1, {ob(0, {0.2, 0}), ob(0, {5, 5.3})}},
                                {1, {ob(0, {40, 40})}}});
  const TwoStageResult r = two_stage(d, c, 500, 3);
  CHECK(r.labels == r.stage1_labels);
  CHECK(r.map_score == doctest::Approx(global_log_score(state_from_labels(d, c, r.labels))));
}
