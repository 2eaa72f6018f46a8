#include "wm/plot.hpp"

#include <algorithm>
#include <array>
#include <cstdio>
#include <numbers>
#include <sstream>

namespace wm {

namespace {

constexpr std::array<const char*, 10> kPalette = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd",
                                                  "#ff7f0e", "#8c564b", "#e377c2", "#17becf",
                                                  "#bcbd22", "#7f7f7f"};

std::string num(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6g", std::abs(x) < 1e-12 ? 0.0 : x);
  return buf;
}

struct Box {
  double x0 = INFINITY, y0 = INFINITY, x1 = -INFINITY, y1 = -INFINITY;
  void add(double x, double y) {
    x0 = std::min(x0, x);
    y0 = std::min(y0, y);
    x1 = std::max(x1, x);
    y1 = std::max(y1, y);
  }
  [[nodiscard]] bool empty() const { return !(x0 <= x1 && y0 <= y1); }
};

struct Ellipse {
  double rx, ry, angle_deg;
};

Ellipse two_sigma(const Mat& cov) {
  Eigen::SelfAdjointEigenSolver<Eigen::Matrix2d> es(Eigen::Matrix2d(cov.topLeftCorner(2, 2)));
  const Eigen::Vector2d l = es.eigenvalues().cwiseMax(0.0);
  const Eigen::Vector2d major = es.eigenvectors().col(1);
  double angle = std::atan2(major.y(), major.x()) * 180.0 / std::numbers::pi;
  if (std::abs(l[1] - l[0]) < 1e-12 * std::max(1.0, l[1])) angle = 0.0;
  return {2.0 * std::sqrt(l[1]), 2.0 * std::sqrt(l[0]), angle};
}

}  // namespace

std::string render_svg(std::span<const TrackReport> tracks, const Dataset* data,
                       const GroundTruth* truth, const PlotOptions& opt) {
  if (data && data->num_views() > 0 && data->pose_dim() != 2)
    throw Unsupported("plotting supports 2-D poses only");
  for (const auto& t : tracks)
    for (const auto& e : t.epochs)
      if (e.mean.size() != 2) throw Unsupported("plotting supports 2-D poses only");
  if (truth && !data) throw InvalidInput("truth needs a dataset");
  auto in_range = [&](int t) { return t >= opt.epoch_from && t <= opt.epoch_to; };

  Box box;
  if (data)
    for (const auto& v : data->views())
      if (in_range(v.epoch)) {
        box.add(v.region.min[0], v.region.min[1]);
        box.add(v.region.max[0], v.region.max[1]);
      }
  for (const auto& t : tracks)
    for (const auto& e : t.epochs)
      if (in_range(e.epoch)) {
        const Ellipse el = two_sigma(e.cov);
        const double r = std::max(el.rx, el.ry);
        box.add(e.mean[0] - r, e.mean[1] - r);
        box.add(e.mean[0] + r, e.mean[1] + r);
      }
  if (box.empty()) box = {0.0, 0.0, 1.0, 1.0};
  double span = std::max(box.x1 - box.x0, box.y1 - box.y0);
  if (span <= 0.0) span = 1.0;
  const double pad = 0.08 * span;
  const double font = 0.03 * span;
  const double dot = 0.006 * span;

  std::ostringstream s;
  s << "<svg xmlns=\"http://www.w3.org/2000/svg\" viewBox=\"" << num(box.x0 - pad) << ' '
    << num(box.y0 - pad) << ' ' << num(box.x1 - box.x0 + 2 * pad) << ' '
    << num(box.y1 - box.y0 + 2 * pad) << "\" width=\"800\" height=\""
    << num(800.0 * (box.y1 - box.y0 + 2 * pad) / (box.x1 - box.x0 + 2 * pad)) << "\">\n";
  if (!opt.title.empty())
    s << "<title>" << opt.title << "</title>\n";
  s << "<g id=\"axes\" stroke=\"#000\" fill=\"none\" vector-effect=\"non-scaling-stroke\">\n"
    << "<rect x=\"" << num(box.x0) << "\" y=\"" << num(box.y0) << "\" width=\""
    << num(box.x1 - box.x0) << "\" height=\"" << num(box.y1 - box.y0)
    << "\" stroke-width=\"1\" vector-effect=\"non-scaling-stroke\"/>\n</g>\n";
  s << "<g id=\"ticks\" font-size=\"" << num(font) << "\" fill=\"#000\">\n";
  for (int i = 0; i <= 4; ++i) {
    const double x = box.x0 + (box.x1 - box.x0) * i / 4.0;
    const double y = box.y0 + (box.y1 - box.y0) * i / 4.0;
    s << "<text x=\"" << num(x) << "\" y=\"" << num(box.y1 + 0.8 * pad)
      << "\" text-anchor=\"middle\">" << num(x) << "</text>\n";
    s << "<text x=\"" << num(box.x0 - 0.15 * pad) << "\" y=\"" << num(y)
      << "\" text-anchor=\"end\">" << num(y) << "</text>\n";
  }
  s << "</g>\n";

  if (data) {
    s << "<g id=\"observations\">\n";
    for (int slot = 0; slot < data->num_views(); ++slot) {
      const auto& v = data->view(slot);
      if (!in_range(v.epoch)) continue;
      for (int i = 0; i < data->view_size(slot); ++i) {
        const Vec& p = v.observations[i].pose;
        const bool clutter = truth && truth->sources[slot][i] == 0;
        if (clutter) {
          s << "<path class=\"fp\" d=\"M" << num(p[0] - dot) << ' ' << num(p[1] - dot) << " L"
            << num(p[0] + dot) << ' ' << num(p[1] + dot) << " M" << num(p[0] - dot) << ' '
            << num(p[1] + dot) << " L" << num(p[0] + dot) << ' ' << num(p[1] - dot)
            << "\" stroke=\"#888\" stroke-width=\"1\" vector-effect=\"non-scaling-stroke\"/>\n";
        } else {
          s << "<circle class=\"obs\" cx=\"" << num(p[0]) << "\" cy=\"" << num(p[1]) << "\" r=\""
            << num(dot) << "\" fill=\"#444\"/>\n";
        }
      }
    }
    s << "</g>\n";
  }

  s << "<g id=\"tracks\" fill=\"none\">\n";
  for (const auto& t : tracks) {
    const char* colour = kPalette[t.argmax_type() % kPalette.size()];
    std::vector<const EpochBeliefReport*> shown;
    for (const auto& e : t.epochs)
      if (in_range(e.epoch)) shown.push_back(&e);
    if (shown.empty()) continue;
    s << "<g class=\"track\" data-id=\"" << t.id << "\" data-type=\"" << t.argmax_type() + 1
      << "\" stroke=\"" << colour << "\">\n<polyline points=\"";
    for (std::size_t i = 0; i < shown.size(); ++i)
      s << (i ? " " : "") << num(shown[i]->mean[0]) << ',' << num(shown[i]->mean[1]);
    s << "\" stroke-width=\"1.5\" vector-effect=\"non-scaling-stroke\"/>\n";
    for (const auto* e : shown) {
      const Ellipse el = two_sigma(e->cov);
      s << "<ellipse cx=\"" << num(e->mean[0]) << "\" cy=\"" << num(e->mean[1]) << "\" rx=\""
        << num(el.rx) << "\" ry=\"" << num(el.ry) << "\" transform=\"rotate(" << num(el.angle_deg)
        << ' ' << num(e->mean[0]) << ' ' << num(e->mean[1])
        << ")\" stroke-width=\"3\" vector-effect=\"non-scaling-stroke\"/>\n";
    }
    s << "</g>\n";
  }
  s << "</g>\n</svg>\n";
  return s.str();
}

}  // namespace wm
