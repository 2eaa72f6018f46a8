#include "doctest.h"
#include "support.hpp"

#include <set>

using namespace wm;
using namespace wmtest;

TEST_CASE("noiseless simulation") {
  SimConfig s = sim_preset("sim-default", 3);
  s.fp_rate = 0.0;
  s.p_miss = 0.0;
  s.confusion_correct = 1.0;
  const Simulation sim = simulate(s);
  double ss = 0;
  long n = 0;
  for (int slot = 0; slot < sim.data.num_views(); ++slot) {
    const ViewFrame& v = sim.data.view(slot);
    int alive = 0;
    for (const auto& o : sim.truth.objects) alive += v.epoch >= o.birth && v.epoch <= o.death;
    CHECK(static_cast<int>(v.observations.size()) == alive);
    for (std::size_t i = 0; i < v.observations.size(); ++i) {
      const int id = sim.truth.sources[slot][i];
      REQUIRE(id > 0);
      const TrueObject& obj = sim.truth.objects[id - 1];
      CHECK(v.observations[i].type_obs == obj.type);
      ss += (v.observations[i].pose - obj.pose.at(v.epoch)).squaredNorm();
      n += 2;
    }
  }
  CHECK(ss / n == doctest::Approx(1.0).epsilon(0.1));
}

TEST_CASE("presets") {
  const Simulation d = simulate(sim_preset("sim-default", 7));
  CHECK(d.data.num_epochs() == 10);
  CHECK(d.data.num_views() == 50);
  CHECK(d.truth.objects.size() == 5);

  const Simulation r = simulate(sim_preset("robot-style", 1));
  CHECK(r.data.num_epochs() == 5);
  for (int t = 1; t <= 5; ++t) {
    int alive = 0;
    for (const auto& o : r.truth.objects) alive += t >= o.birth && t <= o.death;
    CHECK(alive >= 5);
    CHECK(alive <= 10);
  }
  CHECK_THROWS_AS(sim_preset("nope", 1), InvalidInput);
}

TEST_CASE("simulation is deterministic") {
  const Simulation a = simulate(sim_preset("sim-default", 11));
  const Simulation b = simulate(sim_preset("sim-default", 11));
  REQUIRE(a.data.num_obs() == b.data.num_obs());
  for (ObsId o = 0; o < a.data.num_obs(); ++o) CHECK(a.data.obs(o).pose == b.data.obs(o).pose);
  CHECK(a.truth.labels() == b.truth.labels());
}

TEST_CASE("invalid configs") {
  SimConfig s = sim_preset("sim-default", 1);
  s.p_miss = 1.5;
  CHECK_THROWS_AS(s.validate(), InvalidInput);
  s = sim_preset("sim-default", 1);
  s.num_epochs = 0;
  CHECK_THROWS_AS(simulate(s), InvalidInput);
}

TEST_CASE("generative prior limits") {
  ModelConfig c = config(1, 2);
  c.alpha = 1e-12;
  const GenerativeSample one = generative_ddpmm_sample(c, 3, 6, 4);
  CHECK(one.num_clusters() == 1);

  ModelConfig gone = config(1, 2);
  gone.survival = {0.0};
  const GenerativeSample g = generative_ddpmm_sample(gone, 4, 5, 9);
  std::map<int, std::set<int>> epochs_of;
  for (std::size_t i = 0; i < g.cluster.size(); ++i) epochs_of[g.cluster[i]].insert(g.epoch[i]);
  for (auto& [k, e] : epochs_of) CHECK(e.size() == 1);

  // CRP count with alpha = 2, n = 12
  ModelConfig crp = config(1, 2);
  crp.alpha = 2.0;
  crp.survival = {1.0};
  double want = 0;
  for (int i = 1; i <= 12; ++i) want += 2.0 / (2.0 + i - 1);
  const int reps = 2000;
  double s = 0, ss = 0;
  for (int r = 0; r < reps; ++r) {
    const double k = generative_ddpmm_sample(crp, 1, 12, 100 + r).num_clusters();
    s += k;
    ss += k * k;
  }
  const double mean = s / reps, se = std::sqrt((ss / reps - mean * mean) / reps);
  CHECK(std::abs(mean - want) < 3 * se);
}
