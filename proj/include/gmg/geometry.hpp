#pragma once

// Landmark preprocessing: 68 -> 14 point selection, face normalization,
// linear motion amplification, jitter augmentation and the per-node
// coordinate / distance-angle features.

#include <array>
#include <cstddef>
#include <cstdint>
#include <random>
#include <span>
#include <vector>

#include "gmg/tensor.hpp"

namespace gmg {

struct Point {
  double x = 0.0;
  double y = 0.0;

  friend bool operator==(const Point&, const Point&) = default;
};

inline constexpr std::size_t kFaceLandmarks = 68;
inline constexpr std::size_t kGraphNodes = 14;
inline constexpr std::size_t kKeyFrames = 3;

/// Source indices (68-point scheme) of the graph nodes, in node order:
/// left brow 0-2, right brow 3-5, nose 6-9, mouth 10-13.
inline constexpr std::array<std::size_t, kGraphNodes> kSelectedLandmarks{17, 19, 21, 22, 24, 26, 30,
                                                                        31, 33, 35, 48, 51, 54, 57};

/// Node used as the translation anchor (nose tip, source index 30).
inline constexpr std::size_t kAnchorNode = 6;
/// Inner brow nodes whose distance sets the scale.
inline constexpr std::size_t kInnerBrowLeft = 2;
inline constexpr std::size_t kInnerBrowRight = 3;

/// A full 68-point detection.
class LandmarkFrame {
 public:
  explicit LandmarkFrame(std::vector<Point> points);

  std::span<const Point> points() const noexcept { return points_; }
  const Point& operator[](std::size_t i) const { return points_[i]; }

 private:
  std::vector<Point> points_;
};

/// Onset, apex and offset frames restricted to the graph nodes.
struct KeyTriplet {
  enum Frame : std::size_t { onset = 0, apex = 1, offset = 2 };

  std::array<std::vector<Point>, kKeyFrames> frames;

  std::size_t num_nodes() const { return frames[0].size(); }
  /// Throws ParameterError unless all frames share a node count and are finite.
  void validate() const;
};

enum class FeatureType {
  type_a,          ///< (x, y)
  type_b,          ///< (x, y, D, alpha)
  distance_angle,  ///< (D, alpha): the high-order half of type B
};

std::size_t feature_channels(FeatureType type);

std::vector<Point> select_landmarks(const LandmarkFrame& frame);
KeyTriplet select_triplet(const LandmarkFrame& onset, const LandmarkFrame& apex, const LandmarkFrame& offset);

/// Moves the onset nose tip to the origin and divides by the onset
/// inner-brow distance; the same transform is applied to all frames.
/// Throws NumericError if the inner-brow distance is below 1e-9.
KeyTriplet normalize_coordinates(const KeyTriplet& t);

/// p' = p_onset + k (p - p_onset) for apex and offset. Requires k >= 1.
KeyTriplet amplify_motion(const KeyTriplet& t, double k);

/// Adds i.i.d. N(0, sigma^2) noise to every coordinate.
KeyTriplet jitter_augment(const KeyTriplet& t, double sigma, std::mt19937_64& rng);
KeyTriplet jitter_augment(const KeyTriplet& t, double sigma, std::uint64_t seed);

/// Neighbour of each node for the distance/angle features: the next node
/// along the node's region chain, wrapping to the region's first node.
const std::vector<std::size_t>& default_neighbor_map();

struct GeometryFeatures {
  std::vector<double> distance;  ///< squared distance to the neighbour
  std::vector<double> angle;     ///< atan2(dy, dx), in (-pi, pi]
  std::vector<std::size_t> degenerate_nodes;  ///< nodes coinciding with their neighbour
};

GeometryFeatures compute_geometry_features(std::span<const Point> frame,
                                           std::span<const std::size_t> neighbors);
GeometryFeatures compute_geometry_features(std::span<const Point> frame);

/// [3, N, C] feature tensor for one triplet.
Tensor build_node_features(const KeyTriplet& t, FeatureType type);

}  // namespace gmg
