#include "wm/world_state.hpp"

#include <algorithm>
#include <cmath>

namespace wm {

double detection_prob(const TrackFit& fit, const Region& region, int t, const ModelConfig& cfg) {
  double hit = 1.0;
  const Eigen::VectorXd psi = fit.type_posterior.pmf();
  for (int a = 0; a < cfg.num_types; ++a) hit -= cfg.p_fn[a] * psi[a];
  hit = std::clamp(hit, 0.0, 1.0);
  const GaussianBelief b = fit.pose_at(t, cfg);
  double inside = 1.0;
  for (int j = 0; j < cfg.pose_dim; ++j) {
    const double sd = std::sqrt(b.cov(j, j));
    inside *= std::max(0.0, normal_cdf((region.max[j] - b.mean[j]) / sd) -
                                normal_cdf((region.min[j] - b.mean[j]) / sd));
  }
  return std::clamp(hit * inside, 0.0, 1.0);
}

WorldState::WorldState(const Dataset& data, const ModelConfig& cfg)
    : data_(&data),
      cfg_(&cfg),
      labels_(data.num_obs(), kFalsePositive),
      active_(data.num_views(), 1),
      fp_density_(data.num_obs()) {
  for (ObsId o = 0; o < data.num_obs(); ++o) fp_density_[o] = fp_obs_log_density(data.obs(o), cfg);
}

std::vector<TrackId> WorldState::view_labels(int slot) const {
  const ObsId first = data_->view_first_obs(slot);
  return {labels_.begin() + first, labels_.begin() + first + data_->view_size(slot)};
}

void WorldState::set_active(int slot, bool on) {
  if (static_cast<bool>(active_[slot]) == on) return;
  if (!on) {
    const ObsId first = data_->view_first_obs(slot);
    for (int i = 0; i < data_->view_size(slot); ++i)
      if (labels_[first + i] != kUnassigned)
        throw ContractViolation("cannot deactivate a view with assigned observations");
  }
  if (journal_) journal_->active.emplace_back(slot, active_[slot]);
  active_[slot] = on;
  for (auto& [id, r] : tracks_) r.score.reset();
}

std::vector<TrackId> WorldState::track_ids() const {
  std::vector<TrackId> ids;
  ids.reserve(tracks_.size());
  for (const auto& [id, r] : tracks_) ids.push_back(id);
  return ids;
}

const WorldState::TrackRec& WorldState::rec(TrackId k) const {
  auto it = tracks_.find(k);
  if (it == tracks_.end()) throw InvalidInput("unknown track id " + std::to_string(k));
  return it->second;
}

const std::vector<ObsId>& WorldState::members(TrackId k) const { return rec(k).members; }

const TrackFit& WorldState::fit(TrackId k) const {
  const auto& r = rec(k);
  if (!r.fit) r.fit = fit_track(gather_evidence(r.members, *data_, *cfg_), *cfg_);
  return *r.fit;
}

double WorldState::track_score(TrackId k) const {
  const auto& r = rec(k);
  if (!r.score) r.score = score_from_fit(fit(k), r.members);
  return *r.score;
}

double WorldState::members_score(std::span<const ObsId> members) const {
  if (members.empty()) throw InvalidInput("members_score: empty set");
  const TrackFit f = fit_track(gather_evidence(members, *data_, *cfg_), *cfg_);
  return score_from_fit(f, members);
}

double WorldState::members_score(std::span<const ObsId> members, int skip_slot) const {
  if (members.empty()) throw InvalidInput("members_score: empty set");
  const TrackFit f = fit_track(gather_evidence(members, *data_, *cfg_), *cfg_);
  return score_from_fit(f, members, skip_slot);
}

double WorldState::score_from_fit(const TrackFit& f, std::span<const ObsId> members,
                                  int skip_slot) const {
  const ModelConfig& cfg = *cfg_;
  const double q = cfg.survival[f.dyn_type];
  const int span = f.death - f.birth;
  double s = std::log(cfg.alpha) - std::log(cfg.volume()) + track_chain_loglik(f);
  if (span > 0) s += q > 0.0 ? span * std::log(q) : kNegInf;
  if (s == kNegInf) return s;

  std::vector<int> seen;
  seen.reserve(members.size());
  for (ObsId o : members) seen.push_back(data_->obs_view(o));
  std::sort(seen.begin(), seen.end());
  for (int t = f.birth; t <= f.death; ++t) {
    for (int slot : data_->epoch_views(t)) {
      if (!active_[slot] || slot == skip_slot) continue;
      const double p = detection_prob(f, data_->view(slot).region, t, cfg);
      const bool hit = std::binary_search(seen.begin(), seen.end(), slot);
      const double term = hit ? std::log(p) : std::log1p(-p);
      s += term;
    }
  }
  return s;
}

bool WorldState::track_in_view(TrackId k, int slot) const {
  for (ObsId o : rec(k).members)
    if (data_->obs_view(o) == slot) return true;
  return false;
}

WorldState::TrackRec& WorldState::touch_track(TrackId k) {
  if (journal_ && !journal_->tracks.count(k)) {
    auto it = tracks_.find(k);
    journal_->tracks.emplace(k, it == tracks_.end() ? std::nullopt
                                                    : std::optional<TrackRec>(it->second));
  }
  auto& r = tracks_[k];
  r.fit.reset();
  r.score.reset();
  return r;
}

void WorldState::assign(ObsId o, TrackId k) {
  const TrackId old = labels_[o];
  if (old == k) return;
  const int slot = data_->obs_view(o);
  if (k != kUnassigned && !active_[slot])
    throw ContractViolation("assigning an observation of an inactive view");
  if (k > 0 && has_track(k) && track_in_view(k, slot))
    throw ContractViolation("cannot-link violation: track " + std::to_string(k) +
                            " already has an observation in this view");
  if (k < kUnassigned) throw InvalidInput("invalid track id " + std::to_string(k));
  if (journal_) journal_->labels.emplace_back(o, old);
  if (old > 0) {
    auto& r = touch_track(old);
    r.members.erase(std::find(r.members.begin(), r.members.end(), o));
    if (r.members.empty()) tracks_.erase(old);
  }
  if (k > 0) {
    touch_track(k).members.push_back(o);
    next_id_ = std::max(next_id_, k + 1);
  }
  labels_[o] = k;
}

void WorldState::set_view(int slot, std::span<const TrackId> lambda) {
  if (static_cast<int>(lambda.size()) != data_->view_size(slot))
    throw InvalidInput("correspondence vector has wrong length");
  for (std::size_t i = 0; i < lambda.size(); ++i)
    for (std::size_t j = i + 1; j < lambda.size(); ++j)
      if (lambda[i] > 0 && lambda[i] == lambda[j])
        throw ContractViolation("cannot-link violation within correspondence vector");
  clear_view(slot);
  const ObsId first = data_->view_first_obs(slot);
  for (std::size_t i = 0; i < lambda.size(); ++i) assign(first + static_cast<ObsId>(i), lambda[i]);
}

void WorldState::clear_view(int slot) {
  const ObsId first = data_->view_first_obs(slot);
  for (int i = 0; i < data_->view_size(slot); ++i) assign(first + i, kUnassigned);
}

int WorldState::fp_count() const {
  return static_cast<int>(std::count(labels_.begin(), labels_.end(), kFalsePositive));
}

double WorldState::view_term(int slot) const {
  if (!active_[slot]) return 0.0;
  const ObsId first = data_->view_first_obs(slot);
  const int m = data_->view_size(slot);
  double s = 0.0;
  int fp = 0;
  for (int i = 0; i < m; ++i) {
    const TrackId k = labels_[first + i];
    if (k == kUnassigned) return 0.0;
    if (k == kFalsePositive) {
      s += fp_density_[first + i];
      ++fp;
    }
  }
  return s + log_binomial_pmf(fp, m, cfg_->p_fp);
}

double WorldState::log_score() const {
  double s = 0.0;
  for (int slot = 0; slot < data_->num_views(); ++slot) s += view_term(slot);
  for (const auto& [id, r] : tracks_) s += track_score(id);
  return s;
}

void WorldState::begin() {
  if (journal_) throw ContractViolation("nested transaction");
  journal_.emplace();
}

void WorldState::commit() {
  if (!journal_) throw ContractViolation("commit without transaction");
  journal_.reset();
}

void WorldState::rollback() {
  if (!journal_) throw ContractViolation("rollback without transaction");
  Journal j = std::move(*journal_);
  journal_.reset();
  for (auto it = j.labels.rbegin(); it != j.labels.rend(); ++it) labels_[it->first] = it->second;
  for (auto& [k, old] : j.tracks) {
    if (old)
      tracks_[k] = std::move(*old);
    else
      tracks_.erase(k);
  }
  if (!j.active.empty()) {
    for (auto it = j.active.rbegin(); it != j.active.rend(); ++it) active_[it->first] = it->second;
    for (auto& [id, r] : tracks_) r.score.reset();
  }
}

void WorldState::verify() const {
  std::map<TrackId, std::vector<ObsId>> rebuilt;
  for (ObsId o = 0; o < data_->num_obs(); ++o) {
    const TrackId k = labels_[o];
    if (k != kUnassigned && !active_[data_->obs_view(o)])
      throw ContractViolation("assigned observation in inactive view");
    if (k > 0) rebuilt[k].push_back(o);
  }
  if (rebuilt.size() != tracks_.size()) throw ContractViolation("track set out of sync");
  for (auto& [k, obs] : rebuilt) {
    auto it = tracks_.find(k);
    if (it == tracks_.end()) throw ContractViolation("missing track " + std::to_string(k));
    std::vector<ObsId> cached = it->second.members;
    std::sort(cached.begin(), cached.end());
    if (cached != obs) throw ContractViolation("members of track " + std::to_string(k) + " out of sync");
    std::vector<int> slots;
    for (ObsId o : obs) slots.push_back(data_->obs_view(o));
    std::sort(slots.begin(), slots.end());
    if (std::adjacent_find(slots.begin(), slots.end()) != slots.end())
      throw ContractViolation("cannot-link violation in track " + std::to_string(k));
    if (it->second.score) {
      const double fresh = members_score(obs);
      const double cached_score = *it->second.score;
      const bool both_inf = fresh == kNegInf && cached_score == kNegInf;
      if (!both_inf && std::abs(fresh - cached_score) > 1e-6 * std::max(1.0, std::abs(fresh)))
        throw ContractViolation("score cache of track " + std::to_string(k) + " is stale");
    }
  }
}

}  // namespace wm
