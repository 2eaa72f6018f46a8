#pragma once

#include "wm/model.hpp"

#include <span>
#include <vector>

namespace wm {

/// Pairwise co-assignment counts over observation pairs. Label 0 (clutter) never
/// co-assigns, in either labelling.
struct PairCounts {
  long long tp = 0;  // same in both
  long long fp = 0;  // same in predicted only
  long long fn = 0;  // same in truth only

  [[nodiscard]] double precision() const;
  [[nodiscard]] double recall() const;
  [[nodiscard]] double f1() const;
};

PairCounts pair_counts(std::span<const int> predicted, std::span<const int> truth);

struct AccuracyReport {
  PairCounts pooled;
  std::vector<PairCounts> per_epoch;
  std::vector<int> count_error;  // per epoch: predicted tracks seen minus true objects seen
};

/// Throws InvalidInput when the label vectors do not match the dataset.
AccuracyReport accuracy(const Dataset& data, std::span<const int> predicted,
                        std::span<const int> truth);

/// Per epoch, number of distinct non-clutter labels among its observations.
std::vector<int> labels_per_epoch(const Dataset& data, std::span<const int> labels);

}  // namespace wm
