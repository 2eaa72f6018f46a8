#pragma once

#include "wm/association.hpp"

#include <optional>
#include <string>

namespace wm {

enum class PayoffKind {
  Forward,  // forward case weights with frozen N0 and alive-gated detection terms
  Exact,  // exact score differences; FP rows carry the binomial increments
};

/// Square payoff of side 2M + K. Rows: K tracks (ascending id), M "new" rows,
/// M "fp" rows. Columns: M observations, then M + K "fn" pads.
struct PayoffMatrix {
  PayoffKind kind = PayoffKind::Exact;
  int slot = 0;
  int m = 0;
  std::vector<TrackId> tracks;
  Eigen::MatrixXd value;

  [[nodiscard]] int k() const { return static_cast<int>(tracks.size()); }
  [[nodiscard]] int side() const { return static_cast<int>(value.rows()); }
  [[nodiscard]] int new_row(int j) const { return k() + j; }
  [[nodiscard]] int fp_row(int j) const { return k() + m + j; }
};

/// `state` must hold the view active with its observations unassigned.
/// Forward: track x obs = case weight + alive-gated log P(detect); track x fn =
/// alive-gated log P(miss); new x obs and fp x obs = their case weights.
/// Exact: candidate tracks of the view problem; track x obs = w(i, k), track x fn
/// = miss(k); new x obs = w(i, new); fp row j x obs i = clutter density + B(j + 1) - B(j) with B the
/// view's binomial term, so the optimum is the exact conditional mode.
PayoffMatrix build_payoff(const WorldState& state, int slot, PayoffKind kind,
                          const SamplerOptions& gating = {},
                          std::span<const std::pair<int, TrackId>> keep = {});

struct AssignmentSolution {
  std::vector<int> col_of_row;
  double total = 0.0;
};

/// Maximum-total perfect matching of a square payoff (-inf forbidden). Among
/// optimal matchings returns the lexicographically smallest col_of_row. Throws
/// Infeasible when a row has no finite entry or no finite perfect matching exists.
AssignmentSolution solve_assignment(const Eigen::MatrixXd& payoff);

struct DecodedView {
  CorrespondenceVector lambda;  // fresh ids for new tracks
  std::vector<TrackId> missed;  // track rows matched to fn pads
};

DecodedView decode_assignment(const PayoffMatrix& payoff, const AssignmentSolution& sol,
                              WorldState& state);

enum class IcmInit {
  Sequential,  // incomplete views are solved in order, first without the clutter option
  AllNew,      // incomplete views start with every observation on its own new track
  Forward,     // incomplete views are solved in order during the first sweep
};

struct IcmOptions {
  int max_sweeps = 50;
  IcmInit init = IcmInit::Sequential;
  PayoffKind kind = PayoffKind::Forward;
  SamplerOptions gating;
  double tolerance = 1e-6;
  std::optional<std::string> dump_dir;  // CSV payoff dumps
};

struct IcmResult {
  std::vector<double> trace;  // score after each sweep
  std::vector<double> commits;  // score after each refinement commit
  int sweeps = 0;
  bool converged = false;
};

/// Coordinate ascent over the given views. Incomplete views are first
/// initialised per `opt.init`; afterwards a view's labels change
/// only when the solved correspondence vector raises the score. Throws
/// ContractViolation if a refinement commit lowers the score by more than the
/// tolerance.
IcmResult icm_views(WorldState& state, std::span<const int> slots, const IcmOptions& opt = {});

/// icm_views over every view of the dataset.
IcmResult icm_until_convergence(WorldState& state, const IcmOptions& opt = {});

}  // namespace wm
