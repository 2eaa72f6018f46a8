#include "wm/mcmcda.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace wm {

std::vector<int> Partition::free_items() const {
  std::vector<int> out;
  for (int i = 0; i < static_cast<int>(item_track.size()); ++i)
    if (item_track[i] == kFree) out.push_back(i);
  return out;
}

void Partition::add(TrackId k, int item) {
  auto& v = tracks[k];
  v.insert(std::upper_bound(v.begin(), v.end(), item), item);
  item_track[item] = k;
}

void Partition::remove(int item) {
  const TrackId k = item_track[item];
  if (k == kFree) return;
  auto& v = tracks.at(k);
  v.erase(std::find(v.begin(), v.end(), item));
  if (v.empty()) tracks.erase(k);
  item_track[item] = kFree;
}

bool mh_accept(double cur_score, double cand_score, double log_fwd, double log_rev, Rng& rng) {
  if (!std::isfinite(cand_score)) return false;
  const double log_a = cand_score - cur_score + log_rev - log_fwd;
  if (std::isnan(log_a)) return false;
  if (log_a >= 0.0) return true;
  return std::log(std::uniform_real_distribution<double>(0.0, 1.0)(rng)) < log_a;
}

namespace {

int uniform_index(Rng& rng, std::size_t n) {
  return static_cast<int>(std::uniform_int_distribution<std::size_t>(0, n - 1)(rng));
}

double log_of(std::size_t n) { return std::log(static_cast<double>(n)); }

}  // namespace

McmcdaChain::McmcdaChain(WorldState& state, std::vector<McmcdaItem> items, const McmcdaOptions& opt,
                         std::uint64_t seed)
    : state_(&state), items_(std::move(items)), opt_(opt), rng_(seed) {
  std::stable_sort(items_.begin(), items_.end(), [](const McmcdaItem& a, const McmcdaItem& b) {
    if (a.epoch != b.epoch) return a.epoch < b.epoch;
    if (a.key != b.key) return a.key < b.key;
    return a.obs.front() < b.obs.front();
  });
  part_.item_track.assign(items_.size(), Partition::kFree);
  for (const auto& it : items_)
    for (ObsId o : it.obs)
      if (state.label(o) != it.free_label) state.assign(o, it.free_label);

  const ModelConfig& cfg = state.cfg();
  int widest = 0;
  for (int a = 1; a < cfg.num_types; ++a)
    if (cfg.trans_cov[a].trace() > cfg.trans_cov[widest].trace()) widest = a;
  const Mat& qmax = cfg.trans_cov[widest];
  const int n = static_cast<int>(items_.size());
  nbrs_.assign(n, {});
  nbr_logw_.assign(n, {});
  for (int i = 0; i < n; ++i) {
    for (int j = i + 1; j < n; ++j) {
      const int gap = items_[j].epoch - items_[i].epoch;
      if (gap > opt_.max_gap) break;
      if (items_[j].key == items_[i].key) continue;
      const Mat cov = gap * qmax + cfg.sense_cov / items_[i].count + cfg.sense_cov / items_[j].count;
      if (mahalanobis_sq(items_[j].mean, items_[i].mean, cov) <= opt_.gate) {
        nbrs_[i].push_back(j);
        nbr_logw_[i].push_back(
            opt_.proximity_weighted ? log_normal_pdf(items_[j].mean, items_[i].mean, cov) : 0.0);
      }
    }
  }
  score_ = state.log_score();
  best_score_ = score_;
  best_labels_ = state.labels();
}

McmcdaChain::Candidates McmcdaChain::chain_candidates(const Partition& p, int from,
                                                     const std::vector<int>& used_keys) const {
  Candidates out;
  for (std::size_t n = 0; n < nbrs_[from].size(); ++n) {
    const int j = nbrs_[from][n];
    if (p.item_track[j] != Partition::kFree) continue;
    if (std::find(used_keys.begin(), used_keys.end(), items_[j].key) != used_keys.end()) continue;
    out.items.push_back(j);
    out.log_p.push_back(nbr_logw_[from][n]);
  }
  const double norm = log_sum_exp(out.log_p);
  for (double& l : out.log_p) l -= norm;
  return out;
}

double McmcdaChain::Candidates::log_prob_of(int item) const {
  const auto it = std::find(items.begin(), items.end(), item);
  return it == items.end() ? kNegInf : log_p[it - items.begin()];
}

int McmcdaChain::pick(const Candidates& c) {
  double u = std::uniform_real_distribution<double>(0.0, 1.0)(rng_);
  for (std::size_t n = 0; n + 1 < c.items.size(); ++n) {
    u -= std::exp(c.log_p[n]);
    if (u < 0.0) return c.items[n];
  }
  return c.items.back();
}

std::vector<TrackId> McmcdaChain::merge_partners(const Partition& p, TrackId k) const {
  std::vector<TrackId> out;
  const auto& a = p.tracks.at(k);
  std::vector<int> ka;
  for (int i : a) ka.push_back(items_[i].key);
  std::sort(ka.begin(), ka.end());
  for (const auto& [id, b] : p.tracks) {
    if (id == k) continue;
    if (!(a.back() < b.front() || b.back() < a.front())) continue;
    bool clash = false;
    for (int i : b)
      if (std::binary_search(ka.begin(), ka.end(), items_[i].key)) {
        clash = true;
        break;
      }
    if (!clash) out.push_back(id);
  }
  return out;
}

bool McmcdaChain::type_feasible(MoveType m, const Partition& p) const {
  const int ntr = p.num_tracks();
  auto any_len = [&](std::size_t len) {
    return std::any_of(p.tracks.begin(), p.tracks.end(),
                       [&](const auto& kv) { return kv.second.size() >= len; });
  };
  switch (m) {
    case MoveType::Birth:
      return p.free_items().size() >= 2;
    case MoveType::Death:
      return ntr >= 1;
    case MoveType::Split:
      return any_len(4);
    case MoveType::Merge:
      for (const auto& kv : p.tracks)
        if (!merge_partners(p, kv.first).empty()) return true;
      return false;
    case MoveType::Extension:
      return ntr >= 1 && !p.free_items().empty();
    case MoveType::Reduction:
      return any_len(3);
    case MoveType::Swap:
      return ntr >= 2;
    case MoveType::Update:
      return !items_.empty();
  }
  return false;
}

double McmcdaChain::log_type_prob(MoveType m, const Partition& p) const {
  if (!type_feasible(m, p)) return kNegInf;
  int f = 0;
  for (int t = 0; t < kNumMoveTypes; ++t)
    if (!type_feasible(static_cast<MoveType>(t), p)) ++f;
  const double r = f / static_cast<double>(kNumMoveTypes);
  const double p_sel = f == 0 ? 1.0 / kNumMoveTypes
                              : (1.0 - std::pow(r, kNumMoveTypes)) / (1.0 - r) / kNumMoveTypes;
  return std::log(p_sel);
}

double McmcdaChain::birth_log_prob(const Partition& p, std::span<const int> chain) const {
  if (chain.size() < 2) return kNegInf;
  const auto free = p.free_items();
  if (p.item_track[chain[0]] != Partition::kFree) return kNegInf;
  double lq = -log_of(free.size());
  std::vector<int> keys{items_[chain[0]].key};
  for (std::size_t j = 0; j + 1 < chain.size(); ++j) {
    const double lp = chain_candidates(p, chain[j], keys).log_prob_of(chain[j + 1]);
    if (lp == kNegInf) return kNegInf;
    if (j >= 1) lq += std::log1p(-opt_.stop_prob);
    lq += lp;
    keys.push_back(items_[chain[j + 1]].key);
  }
  if (!chain_candidates(p, chain.back(), keys).empty()) lq += std::log(opt_.stop_prob);
  return lq;
}

double McmcdaChain::extension_log_prob(const Partition& p, TrackId k,
                                       std::span<const int> suffix) const {
  if (suffix.empty() || !p.tracks.count(k)) return kNegInf;
  double lq = -log_of(p.tracks.size());
  std::vector<int> keys;
  for (int i : p.tracks.at(k)) keys.push_back(items_[i].key);
  int last = p.tracks.at(k).back();
  for (std::size_t j = 0; j < suffix.size(); ++j) {
    const double lp = chain_candidates(p, last, keys).log_prob_of(suffix[j]);
    if (lp == kNegInf) return kNegInf;
    if (j >= 1) lq += std::log1p(-opt_.stop_prob);
    lq += lp;
    keys.push_back(items_[suffix[j]].key);
    last = suffix[j];
  }
  if (!chain_candidates(p, last, keys).empty()) lq += std::log(opt_.stop_prob);
  return lq;
}

double McmcdaChain::swap_log_prob(const Partition& p, TrackId a, TrackId b, int x, int y) const {
  const int ntr = p.num_tracks();
  auto pick_pair = [&](TrackId from, TrackId to, int u, int w) {
    const auto& vf = p.tracks.at(from);
    const auto& vt = p.tracks.at(to);
    double lp = -log_of(vf.size());
    const bool keyed = std::any_of(vt.begin(), vt.end(),
                                   [&](int j) { return items_[j].key == items_[u].key; });
    if (keyed) {
      if (items_[w].key != items_[u].key) return kNegInf;
    } else {
      lp -= log_of(vt.size());
    }
    return lp;
  };
  const double order = -std::log(ntr) - std::log(ntr - 1.0);
  return order + log_add(pick_pair(a, b, x, y), pick_pair(b, a, y, x));
}

bool McmcdaChain::build(MoveType m, Proposal& prop) {
  const Partition& p = part_;
  Partition& next = prop.next;
  next = p;
  const double u_stop = opt_.stop_prob;
  auto draw_u = [&] { return std::uniform_real_distribution<double>(0.0, 1.0)(rng_); };
  auto tracks_with = [&](const Partition& q, std::size_t len) {
    std::vector<TrackId> out;
    for (const auto& [id, v] : q.tracks)
      if (v.size() >= len) out.push_back(id);
    return out;
  };
  auto track_at = [&](const Partition& q, int idx) {
    auto it = q.tracks.begin();
    std::advance(it, idx);
    return it->first;
  };

  switch (m) {
    case MoveType::Birth: {
      const auto free = p.free_items();
      std::vector<int> chain{free[uniform_index(rng_, free.size())]};
      std::vector<int> keys{items_[chain[0]].key};
      while (true) {
        const auto cand = chain_candidates(p, chain.back(), keys);
        if (chain.size() >= 2 && (cand.empty() || draw_u() < u_stop)) break;
        if (cand.empty()) return false;
        chain.push_back(pick(cand));
        keys.push_back(items_[chain.back()].key);
      }
      const TrackId k = state_->fresh_id();
      for (int i : chain) next.add(k, i);
      prop.touched = chain;
      prop.log_fwd = birth_log_prob(p, chain);
      prop.log_rev = -log_of(next.tracks.size());
      break;
    }
    case MoveType::Death: {
      const TrackId k = track_at(p, uniform_index(rng_, p.tracks.size()));
      const std::vector<int> chain = p.tracks.at(k);
      for (int i : chain) next.remove(i);
      prop.touched = chain;
      prop.log_fwd = -log_of(p.tracks.size());
      prop.log_rev = birth_log_prob(next, chain);
      break;
    }
    case MoveType::Split: {
      const auto cands = tracks_with(p, 4);
      const TrackId k = cands[uniform_index(rng_, cands.size())];
      const auto& v = p.tracks.at(k);
      const int len = static_cast<int>(v.size());
      const int r = 2 + uniform_index(rng_, len - 3);
      const TrackId k2 = state_->fresh_id();
      for (int j = r; j < len; ++j) {
        next.remove(v[j]);
        next.add(k2, v[j]);
        prop.touched.push_back(v[j]);
      }
      prop.log_fwd = -log_of(cands.size()) - std::log(len - 3.0);
      prop.log_rev = -log_of(next.tracks.size()) +
                     std::log(1.0 / merge_partners(next, k).size() +
                              1.0 / merge_partners(next, k2).size());
      break;
    }
    case MoveType::Merge: {
      const TrackId a = track_at(p, uniform_index(rng_, p.tracks.size()));
      const auto pa = merge_partners(p, a);
      if (pa.empty()) return false;
      const TrackId b = pa[uniform_index(rng_, pa.size())];
      const auto pb = merge_partners(p, b);
      const bool a_first = p.tracks.at(a).front() < p.tracks.at(b).front();
      const TrackId keep = a_first ? a : b;
      const TrackId gone = a_first ? b : a;
      for (int i : p.tracks.at(gone)) {
        next.remove(i);
        next.add(keep, i);
        prop.touched.push_back(i);
      }
      const int len = static_cast<int>(next.tracks.at(keep).size());
      prop.log_fwd = -log_of(p.tracks.size()) + std::log(1.0 / pa.size() + 1.0 / pb.size());
      prop.log_rev = -log_of(tracks_with(next, 4).size()) - std::log(len - 3.0);
      break;
    }
    case MoveType::Extension: {
      const TrackId k = track_at(p, uniform_index(rng_, p.tracks.size()));
      std::vector<int> keys;
      for (int i : p.tracks.at(k)) keys.push_back(items_[i].key);
      int last = p.tracks.at(k).back();
      std::vector<int> suffix;
      while (true) {
        const auto cand = chain_candidates(p, last, keys);
        if (!suffix.empty() && (cand.empty() || draw_u() < u_stop)) break;
        if (cand.empty()) return false;
        last = pick(cand);
        suffix.push_back(last);
        keys.push_back(items_[last].key);
      }
      for (int i : suffix) next.add(k, i);
      prop.touched = suffix;
      prop.log_fwd = extension_log_prob(p, k, suffix);
      const int len = static_cast<int>(next.tracks.at(k).size());
      prop.log_rev = -log_of(tracks_with(next, 3).size()) - std::log(len - 2.0);
      break;
    }
    case MoveType::Reduction: {
      const auto cands = tracks_with(p, 3);
      const TrackId k = cands[uniform_index(rng_, cands.size())];
      const auto v = p.tracks.at(k);
      const int len = static_cast<int>(v.size());
      const int r = 2 + uniform_index(rng_, len - 2);
      const std::vector<int> suffix(v.begin() + r, v.end());
      for (int i : suffix) next.remove(i);
      prop.touched = suffix;
      prop.log_fwd = -log_of(cands.size()) - std::log(len - 2.0);
      prop.log_rev = extension_log_prob(next, k, suffix);
      break;
    }
    case MoveType::Swap: {
      const int ntr = p.num_tracks();
      const int ia = uniform_index(rng_, ntr);
      int ib = uniform_index(rng_, ntr - 1);
      if (ib >= ia) ++ib;
      const TrackId a = track_at(p, ia);
      const TrackId b = track_at(p, ib);
      const auto& va = p.tracks.at(a);
      const auto& vb = p.tracks.at(b);
      const int x = va[uniform_index(rng_, va.size())];
      const auto same = std::find_if(vb.begin(), vb.end(),
                                     [&](int j) { return items_[j].key == items_[x].key; });
      const int y = same != vb.end() ? *same : vb[uniform_index(rng_, vb.size())];
      for (int i : va)
        if (i != x && items_[i].key == items_[y].key) return false;
      for (int i : vb)
        if (i != y && items_[i].key == items_[x].key) return false;
      next.remove(x);
      next.remove(y);
      next.add(b, x);
      next.add(a, y);
      prop.touched = {x, y};
      prop.log_fwd = swap_log_prob(p, a, b, x, y);
      prop.log_rev = swap_log_prob(next, a, b, y, x);
      break;
    }
    case MoveType::Update: {
      const int n = static_cast<int>(items_.size());
      const int i = uniform_index(rng_, n);
      auto destinations = [&](const Partition& q) {
        std::vector<TrackId> d;
        const TrackId src = q.item_track[i];
        if (src != Partition::kFree) d.push_back(Partition::kFree);
        for (const auto& [id, v] : q.tracks) {
          if (id == src) continue;
          bool clash = false;
          for (int j : v)
            if (items_[j].key == items_[i].key) clash = true;
          if (!clash) d.push_back(id);
        }
        return d;
      };
      const TrackId src = p.item_track[i];
      if (src != Partition::kFree && p.tracks.at(src).size() <= 2) return false;
      const auto d = destinations(p);
      if (d.empty()) return false;
      const TrackId dest = d[uniform_index(rng_, d.size())];
      next.remove(i);
      if (dest != Partition::kFree) next.add(dest, i);
      prop.touched = {i};
      prop.log_fwd = -std::log(n) - log_of(d.size());
      prop.log_rev = -std::log(n) - log_of(destinations(next).size());
      break;
    }
  }
  static constexpr MoveType kReverse[] = {MoveType::Death,     MoveType::Birth,  MoveType::Merge,
                                          MoveType::Split,     MoveType::Reduction,
                                          MoveType::Extension, MoveType::Swap,   MoveType::Update};
  prop.log_fwd += log_type_prob(m, p);
  prop.log_rev += log_type_prob(kReverse[static_cast<int>(m)], next);
  return true;
}

Proposal McmcdaChain::propose() {
  Proposal prop;
  for (int attempt = 0; attempt < kNumMoveTypes; ++attempt) {
    const auto m = static_cast<MoveType>(uniform_index(rng_, kNumMoveTypes));
    if (!type_feasible(m, part_)) continue;
    prop.type = m;
    prop.identity = !build(m, prop);
    if (prop.identity) {
      prop.touched.clear();
      prop.log_fwd = prop.log_rev = 0.0;
    }
    return prop;
  }
  return prop;
}

void McmcdaChain::apply(const Partition& next, std::span<const int> touched) {
  for (int i : touched)
    for (ObsId o : items_[i].obs) state_->assign(o, kUnassigned);
  for (int i : touched) {
    const TrackId k = next.item_track[i];
    const TrackId label = k == Partition::kFree ? items_[i].free_label : k;
    for (ObsId o : items_[i].obs) state_->assign(o, label);
  }
}

bool McmcdaChain::mh_step() {
  Proposal prop = propose();
  ++iteration_;
  if (prop.identity) return true;
  state_->begin();
  apply(prop.next, prop.touched);
  const double cand = state_->log_score();
  if (!mh_accept(score_, cand, prop.log_fwd, prop.log_rev, rng_)) {
    state_->rollback();
    return false;
  }
  state_->commit();
  part_ = std::move(prop.next);
  score_ = cand;
  if (score_ > best_score_) {
    best_score_ = score_;
    best_labels_ = state_->labels();
  }
  return true;
}

std::vector<McmcdaItem> observation_items(const Dataset& data) {
  std::vector<McmcdaItem> items;
  items.reserve(data.num_obs());
  for (ObsId o = 0; o < data.num_obs(); ++o)
    items.push_back({{o}, data.obs_view(o), data.obs_epoch(o), data.obs(o).pose, 1, kFalsePositive});
  return items;
}

McmcdaResult run_mcmcda(WorldState& state, std::vector<McmcdaItem> items, long n_samples,
                        std::uint64_t seed, const McmcdaOptions& opt) {
  if (n_samples < 1) throw InvalidInput("n_samples must be >= 1");
  McmcdaChain chain(state, std::move(items), opt, seed);
  McmcdaResult r;
  r.trace.push_back(chain.score());
  if (opt.store_samples) r.samples.push_back(state.labels());
  for (long s = 1; s < n_samples; ++s) {
    r.accepted.push_back(chain.mh_step() ? 1 : 0);
    r.trace.push_back(chain.score());
    if (opt.store_samples && opt.thin > 0 && s % opt.thin == 0) r.samples.push_back(state.labels());
  }
  r.map_labels = chain.best_labels();
  r.map_score = chain.best_score();
  return r;
}

McmcdaResult run_mcmcda(const Dataset& data, const ModelConfig& cfg, long n_samples,
                        std::uint64_t seed, const McmcdaOptions& opt) {
  WorldState state(data, cfg);
  return run_mcmcda(state, observation_items(data), n_samples, seed, opt);
}

TwoStageResult two_stage(const Dataset& data, const ModelConfig& cfg, long n_samples,
                         std::uint64_t seed, const McmcdaOptions& opt, const IcmOptions& icm) {
  TwoStageResult out;
  out.stage1_labels.assign(data.num_obs(), kFalsePositive);
  std::map<TrackId, ClusterSummary> clusters;
  TrackId next_id = 1;
  for (int t = 1; t <= data.num_epochs(); ++t) {
    WorldState st(data, cfg);
    reset_inactive(st);
    icm_views(st, data.epoch_views(t), icm);
    std::map<TrackId, TrackId> remap;
    for (int slot : data.epoch_views(t)) {
      const ObsId first = data.view_first_obs(slot);
      for (int i = 0; i < data.view_size(slot); ++i) {
        const TrackId k = st.label(first + i);
        if (k <= 0) continue;
        auto [it, fresh] = remap.emplace(k, next_id);
        if (fresh) ++next_id;
        out.stage1_labels[first + i] = it->second;
        auto& c = clusters[it->second];
        c.epoch = t;
        c.source = it->second;
        c.members.push_back(first + i);
        c.type_obs.push_back(data.obs(first + i).type_obs);
      }
    }
  }
  std::vector<McmcdaItem> items;
  for (auto& [id, c] : clusters) {
    c.count = static_cast<int>(c.members.size());
    c.mean = Vec::Zero(cfg.pose_dim);
    for (ObsId o : c.members) c.mean += data.obs(o).pose;
    c.mean /= c.count;
    items.push_back({c.members, c.epoch, c.epoch, c.mean, c.count, kFalsePositive});
    out.summaries.push_back(c);
  }

  WorldState st(data, cfg);
  for (ObsId o = 0; o < data.num_obs(); ++o) st.assign(o, out.stage1_labels[o]);
  const double stage1_score = st.log_score();
  out.stage3 = run_mcmcda(st, std::move(items), n_samples, seed, opt);
  out.labels = out.stage3.map_labels;
  out.map_score = out.stage3.map_score;
  // stage-1 clusters are a configuration too; one-epoch tracks are not in stage 3's space
  if (stage1_score > out.map_score || data.num_epochs() <= 1) {
    out.labels = out.stage1_labels;
    out.map_score = stage1_score;
  }
  return out;
}

}  // namespace wm
