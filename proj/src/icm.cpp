#include "wm/icm.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iomanip>

namespace wm {

PayoffMatrix build_payoff(const WorldState& state, int slot, PayoffKind kind,
                          const SamplerOptions& gating,
                          std::span<const std::pair<int, TrackId>> keep) {
  const Dataset& data = state.data();
  const ModelConfig& cfg = state.cfg();
  PayoffMatrix p;
  p.kind = kind;
  p.slot = slot;
  p.m = data.view_size(slot);
  const int m = p.m;

  if (kind == PayoffKind::Exact) {
    const ViewProblem vp = build_view_problem(state, slot, gating, keep);
    p.tracks = vp.tracks;
    const int k = p.k();
    p.value = Eigen::MatrixXd::Zero(2 * m + k, 2 * m + k);
    for (int r = 0; r < k; ++r) {
      bool any = false;
      for (int i = 0; i < m; ++i) {
        p.value(r, i) = vp.w(i, r);
        any |= vp.w(i, r) > kNegInf;
      }
      // a certain detection with no admissible observation is -inf either way
      const double miss = any ? vp.miss[r] : 0.0;
      for (int c = m; c < 2 * m + k; ++c) p.value(r, c) = miss;
    }
    for (int j = 0; j < m; ++j)
      for (int i = 0; i < m; ++i) {
        p.value(p.new_row(j), i) = vp.w_new[i];
        const double inc = vp.binom[j + 1] - vp.binom[j];
        p.value(p.fp_row(j), i) = vp.w_fp[i] + (std::isnan(inc) ? kNegInf : inc);
      }
    return p;
  }

  p.tracks = state.track_ids();
  const int k = p.k();
  const int t = data.view(slot).epoch;
  p.value = Eigen::MatrixXd::Zero(2 * m + k, 2 * m + k);
  std::vector<double> detect(k, 0.0), miss(k, 0.0);
  for (int r = 0; r < k; ++r) {
    const TrackFit& f = state.fit(p.tracks[r]);
    if (!f.spans(t)) continue;
    const double pd = detection_prob(f, data.view(slot).region, t, cfg);
    detect[r] = pd > 0.0 ? std::log(pd) : kNegInf;
    miss[r] = std::log1p(-pd);
  }
  for (int r = 0; r < k; ++r)
    for (int c = m; c < 2 * m + k; ++c) p.value(r, c) = miss[r];
  for (int i = 0; i < m; ++i) {
    const CaseWeights cw = case_log_weights(state, slot, i);
    for (int r = 0; r < k; ++r) p.value(r, i) = kNegInf;
    for (const auto& [id, w] : cw.tracks) {
      const int r = static_cast<int>(std::lower_bound(p.tracks.begin(), p.tracks.end(), id) -
                                     p.tracks.begin());
      p.value(r, i) = w + detect[r];
    }
    for (int j = 0; j < m; ++j) {
      p.value(p.new_row(j), i) = cw.new_track;
      p.value(p.fp_row(j), i) = cw.fp;
    }
  }
  return p;
}

AssignmentSolution solve_assignment(const Eigen::MatrixXd& payoff) {
  const int n = static_cast<int>(payoff.rows());
  if (payoff.cols() != n) throw InvalidInput("payoff must be square");
  if (n == 0) return {};
  double maxabs = 0.0;
  for (int i = 0; i < n; ++i) {
    bool finite_row = false;
    for (int j = 0; j < n; ++j) {
      const double x = payoff(i, j);
      if (std::isnan(x) || x == std::numeric_limits<double>::infinity())
        throw InvalidInput("payoff entries must be finite or -inf");
      if (x > kNegInf) {
        finite_row = true;
        maxabs = std::max(maxabs, std::abs(x));
      }
    }
    if (!finite_row) throw Infeasible("payoff row " + std::to_string(i) + " has no finite entry");
  }
  // Forbidden entries get a cost larger than any difference between finite
  // matchings, which keeps the dual potentials at the scale of the data.
  const double big = 1.0 + 2.0 * n * (maxabs + 1.0);
  Eigen::MatrixXd cost(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) cost(i, j) = payoff(i, j) == kNegInf ? big : -payoff(i, j);

  // Shortest augmenting path Kuhn-Munkres; 1-based with a virtual column 0.
  const double inf = std::numeric_limits<double>::infinity();
  std::vector<double> u(n + 1, 0.0), v(n + 1, 0.0);
  std::vector<int> owner(n + 1, 0), way(n + 1, 0);
  for (int i = 1; i <= n; ++i) {
    owner[0] = i;
    int j0 = 0;
    std::vector<double> minv(n + 1, inf);
    std::vector<char> used(n + 1, 0);
    do {
      used[j0] = 1;
      const int i0 = owner[j0];
      double delta = inf;
      int j1 = 0;
      for (int j = 1; j <= n; ++j) {
        if (used[j]) continue;
        const double cur = cost(i0 - 1, j - 1) - u[i0] - v[j];
        if (cur < minv[j]) {
          minv[j] = cur;
          way[j] = j0;
        }
        if (minv[j] < delta) {
          delta = minv[j];
          j1 = j;
        }
      }
      for (int j = 0; j <= n; ++j) {
        if (used[j]) {
          u[owner[j]] += delta;
          v[j] -= delta;
        } else {
          minv[j] -= delta;
        }
      }
      j0 = j1;
    } while (owner[j0] != 0);
    do {
      const int j1 = way[j0];
      owner[j0] = owner[j1];
      j0 = j1;
    } while (j0 != 0);
  }

  std::vector<int> col(n), row(n);
  for (int j = 1; j <= n; ++j) {
    col[owner[j] - 1] = j - 1;
    row[j - 1] = owner[j] - 1;
  }
  for (int i = 0; i < n; ++i)
    if (payoff(i, col[i]) == kNegInf) throw Infeasible("no finite perfect matching exists");

  // Lexicographic tie-break over the tight subgraph of the optimal duals.
  const double tol = 1e-9 * (1.0 + maxabs) * n;
  auto tight = [&](int i, int j) {
    return payoff(i, j) > kNegInf && cost(i, j) - u[i + 1] - v[j + 1] <= tol;
  };
  std::vector<char> fixed_row(n, 0), fixed_col(n, 0), seen(n, 0);
  std::function<bool(int, int, int, int)> augment = [&](int x, int target, int banned_row,
                                                        int banned_col) -> bool {
    for (int y = 0; y < n; ++y) {
      if (fixed_col[y] || seen[y] || y == banned_col || !tight(x, y)) continue;
      seen[y] = 1;
      if (y == target || (row[y] != banned_row && augment(row[y], target, banned_row, banned_col))) {
        col[x] = y;
        row[y] = x;
        return true;
      }
    }
    return false;
  };
  for (int r = 0; r < n; ++r) {
    for (int c = 0; c < n; ++c) {
      if (fixed_col[c] || !tight(r, c)) continue;
      if (c == col[r]) break;
      const int target = col[r];
      const int other = row[c];
      std::fill(seen.begin(), seen.end(), 0);
      if (augment(other, target, r, c)) {
        col[r] = c;
        row[c] = r;
        break;
      }
    }
    fixed_row[r] = 1;
    fixed_col[col[r]] = 1;
  }

  AssignmentSolution sol;
  sol.col_of_row = col;
  for (int i = 0; i < n; ++i) sol.total += payoff(i, col[i]);
  return sol;
}

DecodedView decode_assignment(const PayoffMatrix& payoff, const AssignmentSolution& sol,
                              WorldState& state) {
  DecodedView out;
  out.lambda.assign(payoff.m, kFalsePositive);
  for (int r = 0; r < payoff.side(); ++r) {
    const int c = sol.col_of_row[r];
    if (r < payoff.k()) {
      if (c < payoff.m)
        out.lambda[c] = payoff.tracks[r];
      else
        out.missed.push_back(payoff.tracks[r]);
    } else if (r < payoff.k() + payoff.m) {
      if (c < payoff.m) out.lambda[c] = state.fresh_id();
    }
  }
  return out;
}

namespace {

void dump_payoff(const PayoffMatrix& p, const std::string& dir, int sweep, const Dataset& data) {
  std::filesystem::create_directories(dir);
  const auto& v = data.view(p.slot);
  std::ofstream out(dir + "/sweep" + std::to_string(sweep) + "_epoch" + std::to_string(v.epoch) +
                    "_view" + std::to_string(v.view_index) + ".csv");
  out << std::setprecision(17);
  for (int r = 0; r < p.side(); ++r) {
    for (int c = 0; c < p.side(); ++c) {
      if (c) out << ',';
      if (p.value(r, c) == kNegInf)
        out << "-inf";
      else
        out << p.value(r, c);
    }
    out << '\n';
  }
}

// Label categories after the view was cleared: FP, a surviving track, or new.
std::vector<TrackId> canonical(const WorldState& state, std::span<const TrackId> lambda) {
  std::vector<TrackId> c(lambda.begin(), lambda.end());
  for (auto& k : c)
    if (k > 0 && !state.has_track(k)) k = kUnassigned;
  return c;
}

}  // namespace

IcmResult icm_views(WorldState& state, std::span<const int> slots, const IcmOptions& opt) {
  IcmResult res;
  auto complete = [&](int s) {
    if (!state.active(s)) return false;
    for (TrackId k : state.view_labels(s))
      if (k == kUnassigned) return false;
    return true;
  };
  bool initialised = std::all_of(slots.begin(), slots.end(), complete);
  if (!initialised && opt.init == IcmInit::AllNew) {
    for (int slot : slots) {
      if (complete(slot)) continue;
      state.clear_view(slot);
      state.set_active(slot, true);
      const ObsId first = state.data().view_first_obs(slot);
      for (int i = 0; i < state.data().view_size(slot); ++i) state.assign(first + i, state.fresh_id());
    }
    initialised = true;
  }
  double last = initialised ? state.log_score() : kNegInf;
  for (int sweep = 1; sweep <= opt.max_sweeps; ++sweep) {
    int changes = 0;
    for (int slot : slots) {
      const std::vector<TrackId> prev = state.view_labels(slot);
      const bool prev_complete =
          state.active(slot) && std::find(prev.begin(), prev.end(), kUnassigned) == prev.end();
      const double before = prev_complete ? state.log_score() : kNegInf;

      state.begin();
      state.clear_view(slot);
      state.set_active(slot, true);
      std::vector<std::pair<int, TrackId>> keep;
      for (int i = 0; i < static_cast<int>(prev.size()); ++i)
        if (prev[i] > 0 && state.has_track(prev[i])) keep.emplace_back(i, prev[i]);
      PayoffMatrix payoff = build_payoff(state, slot, opt.kind, opt.gating, keep);
      if (!prev_complete && opt.init == IcmInit::Sequential)
        for (int j = 0; j < payoff.m; ++j) payoff.value.row(payoff.fp_row(j)).head(payoff.m).setConstant(kNegInf);
      if (opt.dump_dir) dump_payoff(payoff, *opt.dump_dir, sweep, state.data());
      const AssignmentSolution sol = solve_assignment(payoff.value);
      const DecodedView dv = decode_assignment(payoff, sol, state);

      if (prev_complete && canonical(state, dv.lambda) == canonical(state, prev)) {
        state.rollback();
        continue;
      }
      state.set_view(slot, dv.lambda);
      if (prev_complete) {
        const double after = state.log_score();
        if (!(after > before + 1e-9 * std::max(1.0, std::abs(before)))) {
          state.rollback();
          continue;
        }
      }
      state.commit();
      ++changes;
      if (initialised) {
        const double now = state.log_score();
        if (now < last - opt.tolerance)
          throw ContractViolation("ICM commit lowered the score from " + std::to_string(last) +
                                  " to " + std::to_string(now));
        res.commits.push_back(now);
        last = now;
      }
    }
    res.sweeps = sweep;
    const double score = state.log_score();
    res.trace.push_back(score);
    if (initialised && changes == 0) {
      res.converged = true;
      break;
    }
    initialised = true;
    last = score;
  }
  return res;
}

IcmResult icm_until_convergence(WorldState& state, const IcmOptions& opt) {
  std::vector<int> slots(state.data().num_views());
  for (int s = 0; s < state.data().num_views(); ++s) slots[s] = s;
  return icm_views(state, slots, opt);
}

}  // namespace wm
