#pragma once

// Machine-readable run outputs: metrics.json, predictions.csv,
// aau_weights.csv, lam_layer{n}.csv, hidden_layer{n}.csv, loss_trace.csv.

#include <cstddef>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include <json.hpp>

#include "gmg/training.hpp"

namespace gmg {

struct WeightedEdge {
  std::size_t from = 0;
  std::size_t to = 0;
  double value = 0.0;
};

/// "trunk.layer3.gcn.lam" -> "lam_layer3"; pre-fusion stream layers get an
/// "_a" / "_b" suffix.
std::string lam_file_stem(const std::string& parameter_name);

/// Largest entries of an [N,N] matrix over unordered pairs i < j, ranked
/// by value (ties by index). Symmetric partners are not double counted;
/// the pair's value is the mean of both directions.
std::vector<WeightedEdge> top_k_edges(const Tensor& matrix, std::size_t k);

nlohmann::json metrics_to_json(const Metrics& m);
/// {"pooled": ..., "folds": [{"held_out_subject": ..., ...}]}
nlohmann::json loso_to_json(const LosoResult& r);

/// id,subject_id,true,predicted,p0..p{c-1}
void write_predictions_csv(std::ostream& out, const std::vector<Prediction>& predictions);
/// fold,subject,w1..wN
void write_aau_weights_csv(std::ostream& out, const std::vector<FoldResult>& folds);
/// Header of node indices, then N rows.
void write_matrix_csv(std::ostream& out, const Tensor& matrix);
/// id,subject_id,label,f0..f{C-1} for one layer.
void write_hidden_csv(std::ostream& out, const std::vector<Prediction>& predictions, std::size_t layer);
/// epoch,total,me,aux,w1..wN
void write_loss_trace_csv(std::ostream& out, const FitResult& fit);

void write_text_file(const std::filesystem::path& path, const std::string& text);

/// Writes every LOSO / holdout artifact into dir.
void export_evaluation(const std::filesystem::path& dir, const LosoResult& result);

}  // namespace gmg
