#pragma once

// Samples, the JSONL sample format, and the synthetic dataset generator.

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "gmg/geometry.hpp"

namespace gmg {

struct Sample {
  std::string id;
  std::string subject_id;
  std::size_t me_label = 0;
  std::vector<int> au_labels;
  /// Onset, apex, offset; 68 points each, or 14 for pre-selected input.
  std::array<std::vector<Point>, kKeyFrames> frames;

  /// The 14-node triplet (selection applied when frames hold 68 points).
  KeyTriplet key_triplet() const;
};

/// One sample per line:
///   {"subject_id": "...", "me_label": 0, "au_labels": [0,1,...],
///    "frames": {"onset": [[x,y]...], "apex": [...], "offset": [...]}}
/// An optional leading {"points": 14} record switches to 14-point frames.
/// An optional "id" field names the sample; otherwise "sample<line>".
/// Throws ParseError with the 1-based line number.
std::vector<Sample> read_samples_jsonl(std::istream& in, const std::string& source = "<stream>");
std::vector<Sample> read_samples_jsonl(const std::filesystem::path& path);

void write_samples_jsonl(std::ostream& out, const std::vector<Sample>& samples);
void write_samples_jsonl(const std::filesystem::path& path, const std::vector<Sample>& samples);

/// Canonical neutral face in pixel coordinates (image y pointing down).
std::vector<Point> neutral_face_template();

struct ClassPattern {
  std::vector<std::size_t> moving_nodes;  ///< graph node indices
  double direction = 0.0;                 ///< displacement angle, radians
  std::vector<int> au_labels;             ///< multi-hot over the AU vocabulary
};

/// Class i moves nodes {n : n mod c == i} along angle -pi/2 + 2 pi i / c and
/// activates AUs {i mod K, (i + 1) mod K}.
std::vector<ClassPattern> class_patterns(std::size_t num_classes, std::size_t au_vocab);

struct SynthSpec {
  std::size_t num_subjects = 4;
  std::size_t samples_per_subject = 10;
  std::size_t num_classes = 3;
  std::size_t au_vocab = 4;
  double motion_pixels = 2.0;  ///< apex displacement at intensity 1
  double intensity_min = 0.7;
  double intensity_max = 1.3;
  double noise_sigma = 0.0;    ///< pixel noise on every coordinate
  double subject_scale_jitter = 0.15;
  double subject_shift_pixels = 15.0;
  std::uint64_t seed = 0;
};

/// Onset = subject template, apex = template + class motion, offset =
/// template + 0.3 * apex displacement, then noise. Classes cycle within
/// each subject. Deterministic under spec.seed.
std::vector<Sample> synth_dataset(const SynthSpec& spec);

}  // namespace gmg
