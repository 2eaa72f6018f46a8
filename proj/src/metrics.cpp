#include "wm/metrics.hpp"

#include <map>
#include <set>

namespace wm {

namespace {

long long choose2(long long n) { return n * (n - 1) / 2; }

double ratio(long long a, long long b) { return b == 0 ? 1.0 : static_cast<double>(a) / b; }

}  // namespace

double PairCounts::precision() const { return ratio(tp, tp + fp); }
double PairCounts::recall() const { return ratio(tp, tp + fn); }

double PairCounts::f1() const {
  const long long denom = 2 * tp + fp + fn;
  return denom == 0 ? 1.0 : 2.0 * tp / denom;
}

PairCounts pair_counts(std::span<const int> predicted, std::span<const int> truth) {
  if (predicted.size() != truth.size()) throw InvalidInput("label vectors differ in length");
  std::map<int, long long> pred_size, true_size;
  std::map<std::pair<int, int>, long long> joint;
  for (std::size_t i = 0; i < predicted.size(); ++i) {
    if (predicted[i] > 0) ++pred_size[predicted[i]];
    if (truth[i] > 0) ++true_size[truth[i]];
    if (predicted[i] > 0 && truth[i] > 0) ++joint[{predicted[i], truth[i]}];
  }
  long long same_pred = 0, same_true = 0, both = 0;
  for (const auto& [k, n] : pred_size) same_pred += choose2(n);
  for (const auto& [k, n] : true_size) same_true += choose2(n);
  for (const auto& [k, n] : joint) both += choose2(n);
  return {both, same_pred - both, same_true - both};
}

std::vector<int> labels_per_epoch(const Dataset& data, std::span<const int> labels) {
  std::vector<std::set<int>> seen(data.num_epochs());
  for (ObsId o = 0; o < data.num_obs(); ++o)
    if (labels[o] > 0) seen[data.obs_epoch(o) - 1].insert(labels[o]);
  std::vector<int> out;
  for (const auto& s : seen) out.push_back(static_cast<int>(s.size()));
  return out;
}

AccuracyReport accuracy(const Dataset& data, std::span<const int> predicted,
                        std::span<const int> truth) {
  if (static_cast<int>(predicted.size()) != data.num_obs() ||
      static_cast<int>(truth.size()) != data.num_obs())
    throw InvalidInput("label count does not match the dataset");
  AccuracyReport r;
  r.pooled = pair_counts(predicted, truth);
  for (int t = 1; t <= data.num_epochs(); ++t) {
    std::vector<int> p, g;
    for (int slot : data.epoch_views(t))
      for (int i = 0; i < data.view_size(slot); ++i) {
        const ObsId o = data.view_first_obs(slot) + i;
        p.push_back(predicted[o]);
        g.push_back(truth[o]);
      }
    r.per_epoch.push_back(pair_counts(p, g));
  }
  const auto np = labels_per_epoch(data, predicted);
  const auto nt = labels_per_epoch(data, truth);
  for (std::size_t t = 0; t < np.size(); ++t) r.count_error.push_back(np[t] - nt[t]);
  return r;
}

}  // namespace wm
