#pragma once

// Training loop, evaluation metrics, leave-one-subject-out protocol and
// the finite-difference gradient check.

#include <cstddef>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "gmg/dataset.hpp"
#include "gmg/network.hpp"

namespace gmg {

struct TrainHyper {
  double lr = 1e-3;
  std::size_t epochs = 300;
  std::size_t batch_size = 16;
  bool augment = false;
  double jitter_sigma = 0.01;  ///< in normalized face units (inner-brow distance = 1)
  std::uint64_t seed = 0;
};

/// A sample after selection, normalization and amplification.
struct PreparedSample {
  std::string id;
  std::string subject_id;
  std::size_t label = 0;
  std::vector<double> au_targets;
  KeyTriplet triplet;
  Tensor stream_a;  ///< [3, N, C_a]
  Tensor stream_b;  ///< [3, N, C_b]; undefined for SS-GN
};

std::vector<PreparedSample> prepare_samples(const std::vector<Sample>& samples, const ModelConfig& cfg);

struct Batch {
  Tensor stream_a;
  Tensor stream_b;
  std::vector<std::size_t> labels;
  Tensor au_targets;  ///< [B, K]; undefined if the config uses no AU heads
};

/// Stacks the given samples. With a non-null rng the triplets are jittered
/// by sigma first and the features rebuilt.
Batch make_batch(const std::vector<PreparedSample>& samples, const std::vector<std::size_t>& indices,
                 const ModelConfig& cfg, std::mt19937_64* rng = nullptr, double sigma = 0.0);

struct LossTerms {
  Tensor total;
  Tensor me;
  Tensor auxiliary;                 ///< AAU or unweighted multi-layer AU loss; undefined for LossMode::me
  std::vector<Tensor> layer_losses;  ///< per constrained layer
};

LossTerms compute_losses(const Model& model, const ForwardOutput& out, const Batch& batch);

struct EpochRecord {
  std::size_t epoch = 0;
  double total = 0.0;
  double me = 0.0;
  double auxiliary = 0.0;
  std::vector<double> aau_weights;  ///< normalized, after the epoch
};

struct FitResult {
  std::vector<EpochRecord> trace;
};

/// Adam on the total loss, fixed shuffle order per seed. Throws
/// NumericError naming the first non-finite tensor if the loss goes NaN.
FitResult fit(Model& model, const std::vector<PreparedSample>& train, const TrainHyper& hyper);

struct Prediction {
  std::string id;
  std::string subject_id;
  std::size_t truth = 0;
  std::size_t predicted = 0;
  std::vector<double> probabilities;
  std::vector<std::vector<double>> hidden;  ///< node-pooled features per layer
};

std::vector<Prediction> predict(Model& model, const std::vector<PreparedSample>& samples);

struct Metrics {
  std::size_t count = 0;
  double accuracy = 0.0;
  double f1 = 0.0;  ///< macro over classes
  std::vector<double> precision;
  std::vector<double> recall;
  std::vector<double> class_f1;
  std::vector<std::vector<std::size_t>> confusion;  ///< [truth][predicted]
};

/// Classes with no support and no predictions score F1 = 0 and still
/// count toward the macro average.
Metrics metrics_from_confusion(std::vector<std::vector<std::size_t>> confusion);
Metrics compute_metrics(const std::vector<Prediction>& predictions, std::size_t num_classes);

/// Eval-mode predictions and metrics. Throws on an empty sample list.
Metrics evaluate(Model& model, const std::vector<PreparedSample>& samples);

struct LosoFold {
  std::string held_out_subject;
  std::vector<std::size_t> train;
  std::vector<std::size_t> test;
};

/// One fold per subject, subjects in sorted order. Needs >= 2 subjects.
std::vector<LosoFold> loso_split(const std::vector<Sample>& samples);

/// Holds out the last ceil(fraction * subjects) subjects in sorted order.
LosoFold holdout_split(const std::vector<Sample>& samples, double test_fraction);

struct FoldResult {
  LosoFold fold;
  std::vector<Prediction> predictions;
  Metrics metrics;
  std::vector<double> aau_weights;
  std::vector<NamedTensor> lam;
  FitResult fit;
};

struct LosoResult {
  Metrics pooled;
  std::vector<FoldResult> folds;
  std::vector<Prediction> predictions;  ///< all folds, in fold order
};

using FoldRunner = std::function<FoldResult(const LosoFold&)>;

/// Runs every fold (up to `jobs` concurrently) and pools the confusion
/// matrices.
LosoResult run_folds(const std::vector<LosoFold>& folds, std::size_t num_classes, const FoldRunner& runner,
                     std::size_t jobs = 1);

/// Trains a fresh model per fold.
LosoResult run_loso(const std::vector<Sample>& samples, const ModelConfig& cfg, const TrainHyper& hyper,
                    std::size_t jobs = 1);

/// Trains on fold.train, evaluates on fold.test.
FoldResult train_and_test(const std::vector<PreparedSample>& prepared, const LosoFold& fold, const ModelConfig& cfg,
                          const TrainHyper& hyper, std::uint64_t seed);

struct GradcheckEntry {
  std::string name;
  std::size_t numel = 0;
  double max_rel_error = 0.0;
  std::size_t skipped = 0;  ///< elements whose perturbation crossed a ReLU kink
};

struct GradcheckReport {
  double tolerance = 1e-4;
  std::vector<GradcheckEntry> entries;
  bool passed() const;
};

/// Central differences of the training loss against backward() for every
/// parameter element, on a freshly built model and a batch holding the
/// first sample of each class.
GradcheckReport gradcheck(const ModelConfig& cfg, const std::vector<Sample>& samples, double tolerance = 1e-4,
                          std::uint64_t seed = 0, double step = 1e-5);

}  // namespace gmg
