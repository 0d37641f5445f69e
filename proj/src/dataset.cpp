#include "gmg/dataset.hpp"

#include <cmath>
#include <fstream>
#include <iomanip>
#include <numbers>
#include <random>
#include <sstream>

#include <json.hpp>

#include "gmg/errors.hpp"

namespace gmg {

using nlohmann::json;

namespace {

constexpr std::array<const char*, kKeyFrames> kFrameNames{"onset", "apex", "offset"};

std::vector<Point> parse_frame(const json& j, std::size_t expected, const std::string& source, std::size_t line,
                               const char* name) {
  if (!j.is_array()) throw ParseError(source, line, std::string("frame '") + name + "' must be an array");
  if (j.size() != expected) {
    throw ParseError(source, line, std::string("frame '") + name + "' has " + std::to_string(j.size()) +
                                       " points, expected " + std::to_string(expected));
  }
  std::vector<Point> pts;
  pts.reserve(expected);
  for (const auto& p : j) {
    if (!p.is_array() || p.size() != 2 || !p[0].is_number() || !p[1].is_number()) {
      throw ParseError(source, line, std::string("frame '") + name + "' holds a point that is not [x, y]");
    }
    Point q{p[0].get<double>(), p[1].get<double>()};
    if (!std::isfinite(q.x) || !std::isfinite(q.y)) {
      throw ParseError(source, line, std::string("frame '") + name + "' holds a non-finite coordinate");
    }
    pts.push_back(q);
  }
  return pts;
}

Sample parse_sample(const json& j, std::size_t points, const std::string& source, std::size_t line) {
  if (!j.is_object()) throw ParseError(source, line, "sample record must be a JSON object");
  for (const char* key : {"subject_id", "me_label", "au_labels", "frames"})
    if (!j.contains(key)) throw ParseError(source, line, std::string("missing field '") + key + "'");

  Sample s;
  if (!j["subject_id"].is_string()) throw ParseError(source, line, "subject_id must be a string");
  s.subject_id = j["subject_id"].get<std::string>();
  s.id = j.contains("id") && j["id"].is_string() ? j["id"].get<std::string>() : "sample" + std::to_string(line);

  if (!j["me_label"].is_number_integer() || j["me_label"].get<long long>() < 0) {
    throw ParseError(source, line, "me_label must be a non-negative integer");
  }
  s.me_label = j["me_label"].get<std::size_t>();

  if (!j["au_labels"].is_array()) throw ParseError(source, line, "au_labels must be an array");
  for (const auto& v : j["au_labels"]) {
    if (!v.is_number_integer() || (v.get<int>() != 0 && v.get<int>() != 1)) {
      throw ParseError(source, line, "au_labels entries must be 0 or 1");
    }
    s.au_labels.push_back(v.get<int>());
  }

  const json& frames = j["frames"];
  if (!frames.is_object()) throw ParseError(source, line, "frames must be an object");
  for (std::size_t f = 0; f < kKeyFrames; ++f) {
    if (!frames.contains(kFrameNames[f])) {
      throw ParseError(source, line, std::string("missing frame '") + kFrameNames[f] + "'");
    }
    s.frames[f] = parse_frame(frames[kFrameNames[f]], points, source, line, kFrameNames[f]);
  }
  return s;
}

}  // namespace

KeyTriplet Sample::key_triplet() const {
  if (frames[0].size() == kFaceLandmarks) {
    return select_triplet(LandmarkFrame(frames[0]), LandmarkFrame(frames[1]), LandmarkFrame(frames[2]));
  }
  KeyTriplet t{frames};
  t.validate();
  if (t.num_nodes() != kGraphNodes) {
    throw ParameterError("sample '" + id + "' has " + std::to_string(t.num_nodes()) + " points per frame");
  }
  return t;
}

std::vector<Sample> read_samples_jsonl(std::istream& in, const std::string& source) {
  std::vector<Sample> out;
  std::size_t points = kFaceLandmarks;
  std::string text;
  std::size_t line = 0;
  bool first_record = true;
  while (std::getline(in, text)) {
    ++line;
    if (text.find_first_not_of(" \t\r") == std::string::npos) continue;
    json j;
    try {
      j = json::parse(text);
    } catch (const json::parse_error& e) {
      throw ParseError(source, line, std::string("invalid JSON: ") + e.what());
    }
    if (first_record && j.is_object() && j.contains("points") && !j.contains("frames")) {
      if (!j["points"].is_number_integer()) throw ParseError(source, line, "header 'points' must be an integer");
      points = j["points"].get<std::size_t>();
      if (points != kFaceLandmarks && points != kGraphNodes) {
        throw ParseError(source, line, "header 'points' must be 68 or 14");
      }
      first_record = false;
      continue;
    }
    first_record = false;
    out.push_back(parse_sample(j, points, source, line));
  }
  return out;
}

std::vector<Sample> read_samples_jsonl(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  return read_samples_jsonl(in, path.string());
}

void write_samples_jsonl(std::ostream& out, const std::vector<Sample>& samples) {
  if (!samples.empty() && samples.front().frames[0].size() == kGraphNodes) out << json{{"points", 14}}.dump() << '\n';
  for (const auto& s : samples) {
    json frames = json::object();
    for (std::size_t f = 0; f < kKeyFrames; ++f) {
      json pts = json::array();
      for (const auto& p : s.frames[f]) pts.push_back({p.x, p.y});
      frames[kFrameNames[f]] = std::move(pts);
    }
    json rec{{"id", s.id}, {"subject_id", s.subject_id}, {"me_label", s.me_label}, {"au_labels", s.au_labels},
             {"frames", std::move(frames)}};
    out << rec.dump() << '\n';
  }
}

void write_samples_jsonl(const std::filesystem::path& path, const std::vector<Sample>& samples) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  write_samples_jsonl(out, samples);
}

std::vector<Point> neutral_face_template() {
  using std::numbers::pi;
  std::vector<Point> p(kFaceLandmarks);
  // Jaw 0-16.
  for (std::size_t i = 0; i <= 16; ++i) {
    const double a = pi * static_cast<double>(i) / 16.0;
    p[i] = {100.0 - 55.0 * std::cos(a), 90.0 + 95.0 * std::sin(a)};
  }
  // Brows 17-21 and 22-26, slightly arched.
  for (std::size_t i = 0; i < 5; ++i) {
    const double arch = 6.0 * std::sin(pi * static_cast<double>(i) / 4.0);
    p[17 + i] = {55.0 + 8.75 * static_cast<double>(i), 62.0 - arch};
    p[22 + i] = {110.0 + 8.75 * static_cast<double>(i), 62.0 - arch};
  }
  // Nose bridge 27-30, lower nose 31-35.
  for (std::size_t i = 0; i < 4; ++i) p[27 + i] = {100.0, 75.0 + 12.0 * static_cast<double>(i)};
  for (std::size_t i = 0; i < 5; ++i) {
    const double dx = static_cast<double>(i) - 2.0;
    p[31 + i] = {100.0 + 6.0 * dx, 122.0 + 3.0 * (1.0 - std::abs(dx) / 2.0)};
  }
  // Eyes 36-41 and 42-47.
  for (std::size_t i = 0; i < 6; ++i) {
    const double a = pi - 2.0 * pi * static_cast<double>(i) / 6.0;
    p[36 + i] = {72.0 + 12.0 * std::cos(a), 80.0 - 5.0 * std::sin(a)};
    p[42 + i] = {128.0 + 12.0 * std::cos(a), 80.0 - 5.0 * std::sin(a)};
  }
  // Outer lip 48-59 (48 left corner, 51 top, 54 right corner, 57 bottom),
  // inner lip 60-67.
  for (std::size_t i = 0; i < 12; ++i) {
    const double a = pi - 2.0 * pi * static_cast<double>(i) / 12.0;
    p[48 + i] = {100.0 + 24.0 * std::cos(a), 150.0 - 10.0 * std::sin(a)};
  }
  for (std::size_t i = 0; i < 8; ++i) {
    const double a = pi - 2.0 * pi * static_cast<double>(i) / 8.0;
    p[60 + i] = {100.0 + 16.0 * std::cos(a), 150.0 - 4.0 * std::sin(a)};
  }
  return p;
}

std::vector<ClassPattern> class_patterns(std::size_t num_classes, std::size_t au_vocab) {
  std::vector<ClassPattern> out(num_classes);
  for (std::size_t i = 0; i < num_classes; ++i) {
    for (std::size_t n = 0; n < kGraphNodes; ++n)
      if (n % num_classes == i) out[i].moving_nodes.push_back(n);
    out[i].direction = -std::numbers::pi / 2.0 + 2.0 * std::numbers::pi * static_cast<double>(i) /
                                                     static_cast<double>(num_classes);
    out[i].au_labels.assign(au_vocab, 0);
    if (au_vocab > 0) {
      out[i].au_labels[i % au_vocab] = 1;
      out[i].au_labels[(i + 1) % au_vocab] = 1;
    }
  }
  return out;
}

std::vector<Sample> synth_dataset(const SynthSpec& spec) {
  if (spec.num_classes == 0) throw ParameterError("synthetic dataset needs at least one class");
  if (spec.au_vocab == 0) throw ParameterError("synthetic dataset needs at least one AU");
  if (spec.num_classes > kGraphNodes) throw ParameterError("at most 14 classes: each needs its own moving nodes");
  if (!(spec.noise_sigma >= 0.0)) throw ParameterError("noise sigma must be >= 0");
  if (!(spec.intensity_min <= spec.intensity_max)) throw ParameterError("intensity range is empty");

  const auto patterns = class_patterns(spec.num_classes, spec.au_vocab);
  const auto base = neutral_face_template();
  std::mt19937_64 rng(spec.seed);
  std::uniform_real_distribution<double> unit(-1.0, 1.0);
  std::uniform_real_distribution<double> intensity(spec.intensity_min, spec.intensity_max);
  std::normal_distribution<double> noise(0.0, spec.noise_sigma > 0.0 ? spec.noise_sigma : 1.0);

  std::vector<Sample> out;
  out.reserve(spec.num_subjects * spec.samples_per_subject);
  for (std::size_t s = 0; s < spec.num_subjects; ++s) {
    const double scale = 1.0 + spec.subject_scale_jitter * unit(rng);
    const double tx = spec.subject_shift_pixels * unit(rng);
    const double ty = spec.subject_shift_pixels * unit(rng);
    std::vector<Point> face(base.size());
    for (std::size_t i = 0; i < base.size(); ++i)
      face[i] = {100.0 + scale * (base[i].x - 100.0) + tx, 100.0 + scale * (base[i].y - 100.0) + ty};

    std::ostringstream sid;
    sid << "sub" << std::setw(2) << std::setfill('0') << s + 1;
    for (std::size_t k = 0; k < spec.samples_per_subject; ++k) {
      const std::size_t label = k % spec.num_classes;
      const ClassPattern& pat = patterns[label];
      const double amount =
          (spec.intensity_min == spec.intensity_max ? spec.intensity_min : intensity(rng)) * spec.motion_pixels * scale;
      const Point step{amount * std::cos(pat.direction), amount * std::sin(pat.direction)};

      Sample smp;
      std::ostringstream id;
      id << sid.str() << '_' << std::setw(3) << std::setfill('0') << k;
      smp.id = id.str();
      smp.subject_id = sid.str();
      smp.me_label = label;
      smp.au_labels = pat.au_labels;
      smp.frames = {face, face, face};
      for (std::size_t node : pat.moving_nodes) {
        const std::size_t idx = kSelectedLandmarks[node];
        smp.frames[KeyTriplet::apex][idx].x += step.x;
        smp.frames[KeyTriplet::apex][idx].y += step.y;
        smp.frames[KeyTriplet::offset][idx].x += 0.3 * step.x;
        smp.frames[KeyTriplet::offset][idx].y += 0.3 * step.y;
      }
      if (spec.noise_sigma > 0.0) {
        for (auto& frame : smp.frames)
          for (auto& p : frame) {
            p.x += noise(rng);
            p.y += noise(rng);
          }
      }
      out.push_back(std::move(smp));
    }
  }
  return out;
}

}  // namespace gmg
