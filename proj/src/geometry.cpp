#include "gmg/geometry.hpp"

#include <cmath>
#include <numbers>
#include <string>

#include "gmg/errors.hpp"

namespace gmg {

namespace {

bool finite(const Point& p) { return std::isfinite(p.x) && std::isfinite(p.y); }

double wrap_angle(double a) {
  // atan2 can return -pi for (-0, negative x); the half-open range excludes it.
  return a <= -std::numbers::pi ? std::numbers::pi : a;
}

}  // namespace

LandmarkFrame::LandmarkFrame(std::vector<Point> points) : points_(std::move(points)) {
  if (points_.size() != kFaceLandmarks) {
    throw ParameterError("landmark frame needs 68 points, got " + std::to_string(points_.size()));
  }
  for (std::size_t i = 0; i < points_.size(); ++i) {
    if (!finite(points_[i])) throw ParameterError("landmark " + std::to_string(i) + " is not finite");
  }
}

void KeyTriplet::validate() const {
  const std::size_t n = frames[0].size();
  if (n == 0) throw ParameterError("key triplet has no nodes");
  for (const auto& f : frames) {
    if (f.size() != n) throw ParameterError("key triplet frames disagree on node count");
    for (const auto& p : f)
      if (!finite(p)) throw ParameterError("key triplet holds a non-finite coordinate");
  }
}

std::size_t feature_channels(FeatureType type) { return type == FeatureType::type_b ? 4 : 2; }

std::vector<Point> select_landmarks(const LandmarkFrame& frame) {
  std::vector<Point> out;
  out.reserve(kGraphNodes);
  for (std::size_t idx : kSelectedLandmarks) out.push_back(frame[idx]);
  return out;
}

KeyTriplet select_triplet(const LandmarkFrame& onset, const LandmarkFrame& apex, const LandmarkFrame& offset) {
  return KeyTriplet{{select_landmarks(onset), select_landmarks(apex), select_landmarks(offset)}};
}

KeyTriplet normalize_coordinates(const KeyTriplet& t) {
  t.validate();
  if (t.num_nodes() != kGraphNodes) {
    throw ParameterError("normalization expects the 14-node layout, got " + std::to_string(t.num_nodes()));
  }
  const auto& onset = t.frames[KeyTriplet::onset];
  const Point anchor = onset[kAnchorNode];
  const double scale = std::hypot(onset[kInnerBrowLeft].x - onset[kInnerBrowRight].x,
                                  onset[kInnerBrowLeft].y - onset[kInnerBrowRight].y);
  if (scale < 1e-9) throw NumericError("degenerate face: inner-brow distance below 1e-9");

  KeyTriplet out = t;
  for (auto& frame : out.frames)
    for (auto& p : frame) p = Point{(p.x - anchor.x) / scale, (p.y - anchor.y) / scale};
  return out;
}

KeyTriplet amplify_motion(const KeyTriplet& t, double k) {
  if (!(k >= 1.0)) throw ParameterError("amplification factor must be >= 1, got " + std::to_string(k));
  t.validate();
  KeyTriplet out = t;
  const auto& onset = t.frames[KeyTriplet::onset];
  for (std::size_t f : {std::size_t{KeyTriplet::apex}, std::size_t{KeyTriplet::offset}}) {
    for (std::size_t i = 0; i < onset.size(); ++i) {
      const Point& p = t.frames[f][i];
      out.frames[f][i] = Point{onset[i].x + k * (p.x - onset[i].x), onset[i].y + k * (p.y - onset[i].y)};
    }
  }
  return out;
}

KeyTriplet jitter_augment(const KeyTriplet& t, double sigma, std::mt19937_64& rng) {
  if (!(sigma >= 0.0)) throw ParameterError("jitter sigma must be >= 0, got " + std::to_string(sigma));
  if (sigma == 0.0) return t;
  std::normal_distribution<double> noise(0.0, sigma);
  KeyTriplet out = t;
  for (auto& frame : out.frames)
    for (auto& p : frame) {
      p.x += noise(rng);
      p.y += noise(rng);
    }
  return out;
}

KeyTriplet jitter_augment(const KeyTriplet& t, double sigma, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  return jitter_augment(t, sigma, rng);
}

const std::vector<std::size_t>& default_neighbor_map() {
  // Regions: brow-left {0,1,2}, brow-right {3,4,5}, nose {6..9}, mouth {10..13}.
  static const std::vector<std::size_t> map{1, 2, 0, 4, 5, 3, 7, 8, 9, 6, 11, 12, 13, 10};
  return map;
}

GeometryFeatures compute_geometry_features(std::span<const Point> frame, std::span<const std::size_t> neighbors) {
  if (neighbors.size() != frame.size()) {
    throw ParameterError("neighbour map covers " + std::to_string(neighbors.size()) + " nodes, frame has " +
                         std::to_string(frame.size()));
  }
  GeometryFeatures out;
  out.distance.resize(frame.size());
  out.angle.resize(frame.size());
  for (std::size_t i = 0; i < frame.size(); ++i) {
    const std::size_t j = neighbors[i];
    if (j >= frame.size()) throw ParameterError("neighbour index out of range");
    const double dx = frame[i].x - frame[j].x;
    const double dy = frame[i].y - frame[j].y;
    if (dx == 0.0 && dy == 0.0) {
      out.distance[i] = 0.0;
      out.angle[i] = 0.0;
      out.degenerate_nodes.push_back(i);
      continue;
    }
    out.distance[i] = dx * dx + dy * dy;
    out.angle[i] = wrap_angle(std::atan2(dy, dx));
  }
  return out;
}

GeometryFeatures compute_geometry_features(std::span<const Point> frame) {
  return compute_geometry_features(frame, default_neighbor_map());
}

Tensor build_node_features(const KeyTriplet& t, FeatureType type) {
  t.validate();
  const std::size_t n = t.num_nodes();
  const std::size_t c = feature_channels(type);
  std::vector<double> values(kKeyFrames * n * c);
  for (std::size_t f = 0; f < kKeyFrames; ++f) {
    const auto& frame = t.frames[f];
    GeometryFeatures geo;
    if (type != FeatureType::type_a) geo = compute_geometry_features(frame);
    for (std::size_t i = 0; i < n; ++i) {
      double* v = values.data() + (f * n + i) * c;
      switch (type) {
        case FeatureType::type_a:
          v[0] = frame[i].x;
          v[1] = frame[i].y;
          break;
        case FeatureType::type_b:
          v[0] = frame[i].x;
          v[1] = frame[i].y;
          v[2] = geo.distance[i];
          v[3] = geo.angle[i];
          break;
        case FeatureType::distance_angle:
          v[0] = geo.distance[i];
          v[1] = geo.angle[i];
          break;
      }
    }
  }
  return Tensor::from({kKeyFrames, n, c}, std::move(values));
}

}  // namespace gmg
