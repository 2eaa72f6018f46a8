#pragma once

#include "wm/association.hpp"
#include "wm/simulator.hpp"

#include <vector>

namespace wmtest {

using wm::Mat;
using wm::Vec;

inline Vec vec(std::initializer_list<double> xs) {
  Vec v(static_cast<Eigen::Index>(xs.size()));
  int i = 0;
  for (double x : xs) v(i++) = x;
  return v;
}

inline Mat eye(int d, double s = 1.0) { return Mat::Identity(d, d) * s; }

// A types, pose dim d, uniform prior, confusion with `correct` on the diagonal.
inline wm::ModelConfig config(int a, int d, double correct = 1.0) {
  wm::ModelConfig c;
  c.num_types = a;
  c.pose_dim = d;
  c.type_prior = Eigen::VectorXd::Constant(a, 1.0 / a);
  c.confusion = a == 1 ? Eigen::MatrixXd::Ones(1, 1) : wm::uniform_confusion(a, correct);
  c.sense_cov = eye(d);
  c.trans_cov.assign(a, eye(d));
  c.survival.assign(a, 0.9);
  c.p_fn.assign(a, 0.1);
  c.p_fp = 0.1;
  c.world_volume = 1e4;
  return c;
}

inline wm::Region box(int d, double lo, double hi) {
  return {Vec::Constant(d, lo), Vec::Constant(d, hi)};
}

struct ViewSpec {
  int epoch;
  std::vector<wm::Observation> obs;
};

inline wm::Dataset dataset(int d, const std::vector<ViewSpec>& views, double half = 1e6) {
  std::vector<wm::ViewFrame> frames;
  std::vector<int> next(64, 1);
  for (const auto& v : views) {
    wm::ViewFrame f;
    f.epoch = v.epoch;
    f.view_index = next[v.epoch]++;
    f.region = box(d, -half, half);
    f.observations = v.obs;
    frames.push_back(std::move(f));
  }
  return wm::Dataset(std::move(frames), d);
}

inline wm::Observation ob(int type, std::initializer_list<double> pose) { return {type, vec(pose)}; }

}  // namespace wmtest
