#include "wm/association.hpp"

#include <algorithm>
#include <cmath>

namespace wm {

namespace {

double safe_log(double x) { return x > 0.0 ? std::log(x) : kNegInf; }

int count_upto(const WorldState& state, TrackId k, int t, bool inclusive) {
  int n = 0;
  for (ObsId o : state.members(k)) {
    const int e = state.data().obs_epoch(o);
    if (e < t || (inclusive && e == t)) ++n;
  }
  return n;
}

void require_cleared(const WorldState& state, int slot) {
  const ObsId first = state.data().view_first_obs(slot);
  for (int i = 0; i < state.data().view_size(slot); ++i)
    if (state.label(first + i) != kUnassigned)
      throw ContractViolation("view must be excluded (observations unassigned)");
}

int draw_categorical(std::span<const double> logw, Rng& rng) {
  const double z = log_sum_exp(logw);
  if (!(z > kNegInf)) throw NumericalError("no candidate with positive probability");
  double u = std::uniform_real_distribution<double>(0.0, 1.0)(rng);
  int last_ok = -1;
  for (int j = 0; j < static_cast<int>(logw.size()); ++j) {
    if (logw[j] == kNegInf) continue;
    last_ok = j;
    u -= std::exp(logw[j] - z);
    if (u <= 0.0) return j;
  }
  return last_ok;
}

}  // namespace

CaseWeights case_log_weights(const WorldState& state, int slot, int index) {
  require_cleared(state, slot);
  const Dataset& data = state.data();
  const ModelConfig& cfg = state.cfg();
  const int t = data.view(slot).epoch;
  const Observation& obs = data.obs(data.view_first_obs(slot) + index);
  const double log_tp = std::log1p(-cfg.p_fp);
  CaseWeights out;
  for (TrackId k : state.track_ids()) {
    const TrackFit& f = state.fit(k);
    if (f.instantiated_at(t)) {
      out.tracks.emplace_back(k, std::log(count_upto(state, k, t, true)) +
                                     predictive_instantiated(f, t, obs, cfg) + log_tp);
    } else if (const auto prev = previous_instantiation(f, t)) {
      const double logq = (t - *prev) * safe_log(cfg.survival[f.dyn_type]);
      out.tracks.emplace_back(k, logq + std::log(count_upto(state, k, t, false)) +
                                     predictive_dormant(f, t, obs, cfg) + log_tp);
    }
  }
  out.new_track = std::log(cfg.alpha) + predictive_new(obs, cfg) + log_tp;
  const int n0 = state.fp_count();
  out.fp = std::log(n0 > 0 ? static_cast<double>(n0) : cfg.alpha) +
           state.fp_density(data.view_first_obs(slot) + index) + safe_log(cfg.p_fp);
  return out;
}

double view_joint_log_prob(const WorldState& state, int slot, std::span<const TrackId> lambda) {
  const Dataset& data = state.data();
  const ModelConfig& cfg = state.cfg();
  const int m = data.view_size(slot);
  if (static_cast<int>(lambda.size()) != m) throw InvalidInput("lambda has wrong length");
  for (TrackId k : lambda)
    if (k < 0) throw InvalidInput("invalid label " + std::to_string(k));
  for (int i = 0; i < m; ++i)
    for (int j = i + 1; j < m; ++j)
      if (lambda[i] > 0 && lambda[i] == lambda[j]) return kNegInf;
  require_cleared(state, slot);

  const int t = data.view(slot).epoch;
  const int n0 = state.fp_count();
  const ObsId first = data.view_first_obs(slot);
  double total = 0.0;
  int fp_seen = 0;
  for (int i = 0; i < m; ++i) {
    const CaseWeights cw = case_log_weights(state, slot, i);
    if (lambda[i] == kFalsePositive) {
      const int n = n0 + fp_seen;
      total += std::log(n > 0 ? static_cast<double>(n) : cfg.alpha) + state.fp_density(first + i) +
               safe_log(cfg.p_fp);
      ++fp_seen;
    } else if (!state.has_track(lambda[i])) {
      total += cw.new_track;
    } else {
      auto it = std::find_if(cw.tracks.begin(), cw.tracks.end(),
                             [&](const auto& p) { return p.first == lambda[i]; });
      if (it == cw.tracks.end()) return kNegInf;
      total += it->second;
    }
  }
  for (TrackId k : state.track_ids()) {
    const TrackFit& f = state.fit(k);
    if (!f.spans(t)) continue;
    const double p = detection_prob(f, data.view(slot).region, t, cfg);
    const bool hit = std::find(lambda.begin(), lambda.end(), k) != lambda.end();
    total += hit ? safe_log(p) : std::log1p(-p);
  }
  return total;
}

double ViewProblem::weight(int i, int c) const {
  if (c == kNew) return w_new[i];
  if (c == kFp) return w_fp[i];
  return w(i, c);
}

double ViewProblem::objective(std::span<const int> choice) const {
  double s = 0.0;
  int fp = 0;
  std::vector<char> used(tracks.size(), 0);
  for (int i = 0; i < m; ++i) {
    s += weight(i, choice[i]);
    if (choice[i] == kFp) ++fp;
    if (choice[i] >= 0) used[choice[i]] = 1;
  }
  for (std::size_t c = 0; c < tracks.size(); ++c)
    if (!used[c]) s += miss[c];
  return s + binom[fp];
}

std::vector<int> ViewProblem::choice_of(std::span<const TrackId> lambda) const {
  std::vector<int> c(m);
  for (int i = 0; i < m; ++i) {
    if (lambda[i] == kFalsePositive) {
      c[i] = kFp;
      continue;
    }
    auto it = std::lower_bound(tracks.begin(), tracks.end(), lambda[i]);
    c[i] = (it != tracks.end() && *it == lambda[i]) ? static_cast<int>(it - tracks.begin()) : kNew;
  }
  return c;
}

long ViewProblem::count_valid(long cap) const {
  const int k = static_cast<int>(tracks.size());
  std::vector<char> used(k, 0);
  long count = 0;
  auto rec = [&](auto&& self, int i) -> void {
    if (count >= cap) return;
    if (i == m) {
      ++count;
      return;
    }
    self(self, i + 1);  // new
    self(self, i + 1);  // fp
    for (int c = 0; c < k; ++c) {
      if (used[c] || w(i, c) == kNegInf) continue;
      used[c] = 1;
      self(self, i + 1);
      used[c] = 0;
    }
  };
  rec(rec, 0);
  return count;
}

ViewProblem build_view_problem(const WorldState& state, int slot, const SamplerOptions& opt,
                               std::span<const std::pair<int, TrackId>> keep) {
  if (!state.active(slot)) throw ContractViolation("view problem needs an active view");
  require_cleared(state, slot);
  const Dataset& data = state.data();
  const ModelConfig& cfg = state.cfg();
  ViewProblem p;
  p.slot = slot;
  p.m = data.view_size(slot);
  const int t = data.view(slot).epoch;
  const ObsId first = data.view_first_obs(slot);
  for (int j = 0; j <= p.m; ++j) p.binom.push_back(log_binomial_pmf(j, p.m, cfg.p_fp));

  const std::vector<TrackId> all = state.track_ids();
  const bool gate_free = static_cast<int>(all.size()) <= opt.gate_free_tracks;
  std::vector<std::vector<char>> gated(all.size(), std::vector<char>(p.m, 0));
  for (std::size_t c = 0; c < all.size(); ++c) {
    std::optional<GaussianBelief> pred;
    for (int i = 0; i < p.m; ++i) {
      bool ok = gate_free;
      if (!ok) {
        if (!pred) {
          pred = state.fit(all[c]).pose_at(t, cfg);
          pred->cov += cfg.sense_cov;
        }
        ok = mahalanobis_sq(data.obs(first + i).pose, pred->mean, pred->cov) <= opt.gate;
      }
      gated[c][i] = ok;
    }
  }
  for (const auto& [i, k] : keep) {
    auto it = std::lower_bound(all.begin(), all.end(), k);
    if (it != all.end() && *it == k) gated[it - all.begin()][i] = 1;
  }

  std::vector<std::size_t> chosen;
  for (std::size_t c = 0; c < all.size(); ++c)
    if (std::find(gated[c].begin(), gated[c].end(), 1) != gated[c].end()) chosen.push_back(c);
  p.w = Eigen::MatrixXd::Constant(p.m, static_cast<Eigen::Index>(chosen.size()), kNegInf);
  std::vector<ObsId> buf;
  for (std::size_t j = 0; j < chosen.size(); ++j) {
    const TrackId k = all[chosen[j]];
    p.tracks.push_back(k);
    const TrackFit& f = state.fit(k);
    const double miss = f.spans(t) ? std::log1p(-detection_prob(f, data.view(slot).region, t, cfg)) : 0.0;
    const double base = miss > kNegInf ? state.track_score(k) - miss : state.members_score(state.members(k), slot);
    p.miss.push_back(miss);
    for (int i = 0; i < p.m; ++i) {
      if (!gated[chosen[j]][i]) continue;
      buf = state.members(k);
      buf.push_back(first + i);
      p.w(i, static_cast<Eigen::Index>(j)) = state.members_score(buf) - base;
    }
  }
  for (int i = 0; i < p.m; ++i) {
    const ObsId o = first + i;
    p.w_new.push_back(state.members_score(std::span<const ObsId>(&o, 1)));
    p.w_fp.push_back(state.fp_density(o));
  }
  return p;
}

CorrespondenceVector apply_choice(WorldState& state, const ViewProblem& problem,
                                  std::span<const int> choice) {
  CorrespondenceVector lambda(problem.m);
  for (int i = 0; i < problem.m; ++i) {
    if (choice[i] == ViewProblem::kFp)
      lambda[i] = kFalsePositive;
    else if (choice[i] == ViewProblem::kNew)
      lambda[i] = state.fresh_id();
    else
      lambda[i] = problem.tracks[choice[i]];
  }
  state.set_view(problem.slot, lambda);
  return lambda;
}

namespace {

// Sequential masked proposal. With `forced` set, evaluates the log probability
// of proposing that choice instead of drawing one.
double sequential_proposal(const ViewProblem& p, Rng* rng, std::vector<int>& choice,
                           bool forced) {
  const int k = static_cast<int>(p.tracks.size());
  std::vector<char> used(k, 0);
  if (!forced) choice.assign(p.m, ViewProblem::kFp);
  int fp = 0;
  double logq = 0.0;
  std::vector<double> logw;
  std::vector<int> opts;
  for (int i = 0; i < p.m; ++i) {
    logw.clear();
    opts.clear();
    for (int c = 0; c < k; ++c) {
      if (used[c] || p.w(i, c) == kNegInf) continue;
      opts.push_back(c);
      logw.push_back(p.w(i, c) - std::max(p.miss[c], -700.0));
    }
    opts.push_back(ViewProblem::kNew);
    logw.push_back(p.w_new[i]);
    opts.push_back(ViewProblem::kFp);
    logw.push_back(p.w_fp[i] + p.binom[fp + 1] - p.binom[fp]);
    for (double& x : logw)
      if (std::isnan(x)) x = kNegInf;
    const double z = log_sum_exp(logw);
    int pick;
    if (forced) {
      pick = static_cast<int>(std::find(opts.begin(), opts.end(), choice[i]) - opts.begin());
      if (pick == static_cast<int>(opts.size())) return kNegInf;
    } else {
      pick = draw_categorical(logw, *rng);
    }
    logq += logw[pick] - z;
    const int c = opts[pick];
    choice[i] = c;
    if (c >= 0) used[c] = 1;
    if (c == ViewProblem::kFp) ++fp;
  }
  return logq;
}

}  // namespace

CorrespondenceVector sample_view(WorldState& state, int slot, Rng& rng, const SamplerOptions& opt) {
  const std::vector<TrackId> prev = state.view_labels(slot);
  const bool prev_complete =
      state.active(slot) && std::find(prev.begin(), prev.end(), kUnassigned) == prev.end();
  state.clear_view(slot);
  state.set_active(slot, true);
  std::vector<std::pair<int, TrackId>> keep;
  for (int i = 0; i < static_cast<int>(prev.size()); ++i)
    if (prev[i] > 0 && state.has_track(prev[i])) keep.emplace_back(i, prev[i]);
  const ViewProblem p = build_view_problem(state, slot, opt, keep);

  const bool small = p.m <= opt.max_enum_obs && static_cast<int>(p.tracks.size()) <= opt.max_enum_tracks &&
                     p.count_valid(opt.max_enum_size + 1) <= opt.max_enum_size;
  if (small) {
    std::vector<std::vector<int>> configs;
    std::vector<double> logw;
    std::vector<int> cur(p.m);
    std::vector<char> used(p.tracks.size(), 0);
    auto rec = [&](auto&& self, int i) -> void {
      if (i == p.m) {
        configs.push_back(cur);
        logw.push_back(p.objective(cur));
        return;
      }
      for (int c = 0; c < static_cast<int>(p.tracks.size()); ++c) {
        if (used[c] || p.w(i, c) == kNegInf) continue;
        used[c] = 1;
        cur[i] = c;
        self(self, i + 1);
        used[c] = 0;
      }
      cur[i] = ViewProblem::kNew;
      self(self, i + 1);
      cur[i] = ViewProblem::kFp;
      self(self, i + 1);
    };
    rec(rec, 0);
    for (double& x : logw)
      if (std::isnan(x)) x = kNegInf;
    return apply_choice(state, p, configs[draw_categorical(logw, rng)]);
  }

  std::vector<int> proposal;
  const double logq_new = sequential_proposal(p, &rng, proposal, false);
  if (prev_complete) {
    std::vector<int> old = p.choice_of(prev);
    const double logq_old = sequential_proposal(p, nullptr, old, true);
    const double log_ratio = p.objective(proposal) - p.objective(old) + logq_old - logq_new;
    const double u = std::uniform_real_distribution<double>(0.0, 1.0)(rng);
    if (!(std::log(u) < log_ratio)) return apply_choice(state, p, old);
  }
  return apply_choice(state, p, proposal);
}

void reset_inactive(WorldState& state) {
  for (ObsId o = 0; o < state.data().num_obs(); ++o) state.assign(o, kUnassigned);
  for (int slot = 0; slot < state.data().num_views(); ++slot) state.set_active(slot, false);
}

void gibbs_sweep(WorldState& state, Rng& rng, const SamplerOptions& opt) {
  for (int slot = 0; slot < state.data().num_views(); ++slot) sample_view(state, slot, rng, opt);
}

double global_log_score(const WorldState& state) {
  for (int slot = 0; slot < state.data().num_views(); ++slot)
    if (!state.active(slot)) throw ContractViolation("score of a state with an inactive view");
  for (TrackId k : state.labels())
    if (k == kUnassigned) throw ContractViolation("score of a state with unassigned observations");
  return state.log_score();
}

GibbsResult run_gibbs(const Dataset& data, const ModelConfig& cfg, int sweeps, std::uint64_t seed,
                      const SamplerOptions& opt) {
  if (sweeps < 1) throw InvalidInput("sweeps must be >= 1");
  WorldState state(data, cfg);
  reset_inactive(state);
  Rng rng(seed);
  GibbsResult r;
  for (int s = 0; s < sweeps; ++s) {
    gibbs_sweep(state, rng, opt);
    const double score = state.log_score();
    r.trace.push_back(score);
    if (score > r.best_score || r.best_labels.empty()) {
      r.best_score = score;
      r.best_labels = state.labels();
    }
  }
  r.labels = state.labels();
  return r;
}

WorldState state_from_labels(const Dataset& data, const ModelConfig& cfg,
                             std::span<const TrackId> labels) {
  if (static_cast<int>(labels.size()) != data.num_obs())
    throw InvalidInput("label count does not match observation count");
  WorldState state(data, cfg);
  for (ObsId o = 0; o < data.num_obs(); ++o) {
    if (labels[o] < 0) throw InvalidInput("labels must be >= 0");
    state.assign(o, labels[o]);
  }
  return state;
}

}  // namespace wm
