#include "gmg/export.hpp"

#include <algorithm>
#include <fstream>
#include <iomanip>
#include <limits>
#include <sstream>

#include "gmg/errors.hpp"

namespace gmg {

using nlohmann::json;

namespace {

// Round-trip precision for every double in CSV output.
std::ostream& precise(std::ostream& os) { return os << std::setprecision(std::numeric_limits<double>::max_digits10); }

template <class Writer>
void write_file(const std::filesystem::path& path, Writer&& w) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  precise(out);
  w(out);
}

}  // namespace

std::string lam_file_stem(const std::string& parameter_name) {
  const auto at = parameter_name.find("layer");
  if (at == std::string::npos) throw ParameterError("not a per-layer parameter: " + parameter_name);
  const auto end = parameter_name.find('.', at);
  std::string stem = "lam_" + parameter_name.substr(at, end - at);
  if (parameter_name.starts_with("stream_a.")) stem += "_a";
  if (parameter_name.starts_with("stream_b.")) stem += "_b";
  return stem;
}

std::vector<WeightedEdge> top_k_edges(const Tensor& matrix, std::size_t k) {
  if (matrix.rank() != 2 || matrix.dim(0) != matrix.dim(1)) throw ShapeError("top_k_edges: need a square matrix");
  const std::size_t n = matrix.dim(0);
  const auto v = matrix.data();
  std::vector<WeightedEdge> edges;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j) edges.push_back({i, j, 0.5 * (v[i * n + j] + v[j * n + i])});
  std::stable_sort(edges.begin(), edges.end(), [](const WeightedEdge& a, const WeightedEdge& b) { return a.value > b.value; });
  if (edges.size() > k) edges.resize(k);
  return edges;
}

json metrics_to_json(const Metrics& m) {
  return json{{"count", m.count},         {"accuracy", m.accuracy}, {"f1_macro", m.f1},
              {"precision", m.precision}, {"recall", m.recall},     {"class_f1", m.class_f1},
              {"confusion", m.confusion}};
}

json loso_to_json(const LosoResult& r) {
  json folds = json::array();
  for (const auto& f : r.folds) {
    json j = metrics_to_json(f.metrics);
    j["held_out_subject"] = f.fold.held_out_subject;
    j["train_size"] = f.fold.train.size();
    j["test_size"] = f.fold.test.size();
    if (!f.aau_weights.empty()) j["aau_weights"] = f.aau_weights;
    folds.push_back(std::move(j));
  }
  return json{{"pooled", metrics_to_json(r.pooled)}, {"folds", std::move(folds)}};
}

void write_predictions_csv(std::ostream& out, const std::vector<Prediction>& predictions) {
  precise(out);
  const std::size_t c = predictions.empty() ? 0 : predictions.front().probabilities.size();
  out << "id,subject_id,true,predicted";
  for (std::size_t k = 0; k < c; ++k) out << ",p" << k;
  out << '\n';
  for (const auto& p : predictions) {
    out << p.id << ',' << p.subject_id << ',' << p.truth << ',' << p.predicted;
    for (double v : p.probabilities) out << ',' << v;
    out << '\n';
  }
}

void write_aau_weights_csv(std::ostream& out, const std::vector<FoldResult>& folds) {
  precise(out);
  const std::size_t n = folds.empty() ? 0 : folds.front().aau_weights.size();
  out << "fold,subject";
  for (std::size_t r = 0; r < n; ++r) out << ",w" << r + 1;
  out << '\n';
  for (std::size_t f = 0; f < folds.size(); ++f) {
    out << f + 1 << ',' << folds[f].fold.held_out_subject;
    for (double w : folds[f].aau_weights) out << ',' << w;
    out << '\n';
  }
}

void write_matrix_csv(std::ostream& out, const Tensor& matrix) {
  if (matrix.rank() != 2) throw ShapeError("write_matrix_csv: need a matrix");
  precise(out);
  const std::size_t rows = matrix.dim(0), cols = matrix.dim(1);
  for (std::size_t j = 0; j < cols; ++j) out << (j ? "," : "") << j;
  out << '\n';
  const auto v = matrix.data();
  for (std::size_t i = 0; i < rows; ++i) {
    for (std::size_t j = 0; j < cols; ++j) out << (j ? "," : "") << v[i * cols + j];
    out << '\n';
  }
}

void write_hidden_csv(std::ostream& out, const std::vector<Prediction>& predictions, std::size_t layer) {
  precise(out);
  const std::size_t width = predictions.empty() ? 0 : predictions.front().hidden.at(layer).size();
  out << "id,subject_id,label";
  for (std::size_t k = 0; k < width; ++k) out << ",f" << k;
  out << '\n';
  for (const auto& p : predictions) {
    out << p.id << ',' << p.subject_id << ',' << p.truth;
    for (double v : p.hidden.at(layer)) out << ',' << v;
    out << '\n';
  }
}

void write_loss_trace_csv(std::ostream& out, const FitResult& fit) {
  precise(out);
  const std::size_t n = fit.trace.empty() ? 0 : fit.trace.front().aau_weights.size();
  out << "epoch,total,me,aux";
  for (std::size_t r = 0; r < n; ++r) out << ",w" << r + 1;
  out << '\n';
  for (const auto& e : fit.trace) {
    out << e.epoch << ',' << e.total << ',' << e.me << ',' << e.auxiliary;
    for (double w : e.aau_weights) out << ',' << w;
    out << '\n';
  }
}

void write_text_file(const std::filesystem::path& path, const std::string& text) {
  write_file(path, [&](std::ostream& os) { os << text; });
}

void export_evaluation(const std::filesystem::path& dir, const LosoResult& result) {
  std::filesystem::create_directories(dir);
  write_text_file(dir / "metrics.json", loso_to_json(result).dump(2) + "\n");
  write_file(dir / "predictions.csv", [&](std::ostream& os) { write_predictions_csv(os, result.predictions); });
  if (!result.folds.empty() && !result.folds.front().aau_weights.empty()) {
    write_file(dir / "aau_weights.csv", [&](std::ostream& os) { write_aau_weights_csv(os, result.folds); });
  }
  // LAM per layer, per fold; fold 1 also gets the unsuffixed name.
  for (std::size_t f = 0; f < result.folds.size(); ++f) {
    const auto& lam = result.folds[f].lam;
    for (const auto& [name, matrix] : lam) {
      const std::string stem = lam_file_stem(name);
      write_file(dir / (stem + "_fold" + std::to_string(f + 1) + ".csv"),
                 [&](std::ostream& os) { write_matrix_csv(os, matrix); });
      if (f == 0) write_file(dir / (stem + ".csv"), [&](std::ostream& os) { write_matrix_csv(os, matrix); });
    }
  }
  const std::size_t layers = result.predictions.empty() ? 0 : result.predictions.front().hidden.size();
  for (std::size_t l = 0; l < layers; ++l) {
    write_file(dir / ("hidden_layer" + std::to_string(l + 1) + ".csv"),
               [&](std::ostream& os) { write_hidden_csv(os, result.predictions, l); });
  }
  for (std::size_t f = 0; f < result.folds.size(); ++f) {
    write_file(dir / ("loss_trace_fold" + std::to_string(f + 1) + ".csv"),
               [&](std::ostream& os) { write_loss_trace_csv(os, result.folds[f].fit); });
  }
  if (!result.folds.empty()) {
    write_file(dir / "loss_trace.csv", [&](std::ostream& os) { write_loss_trace_csv(os, result.folds.front().fit); });
  }
}

}  // namespace gmg
