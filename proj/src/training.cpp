#include "gmg/training.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <limits>
#include <map>
#include <mutex>
#include <numeric>
#include <set>
#include <thread>

#include "gmg/errors.hpp"
#include "gmg/losses.hpp"

namespace gmg {

namespace {

Tensor stream_a_features(const KeyTriplet& t, const ModelConfig& cfg) {
  return build_node_features(t, cfg.mode == NetworkMode::ssgn ? cfg.feature : FeatureType::type_a);
}

Tensor stream_b_features(const KeyTriplet& t, const ModelConfig& cfg) {
  if (cfg.mode == NetworkMode::ssgn) return {};
  return build_node_features(
      t, cfg.stream_b == StreamBInput::type_b ? FeatureType::type_b : FeatureType::distance_angle);
}

// Copies per-sample [3,N,C] tensors into one [B,3,N,C] leaf.
Tensor stack(const std::vector<Tensor>& parts) {
  const Shape& s = parts.front().shape();
  std::vector<double> data;
  data.reserve(parts.size() * parts.front().numel());
  for (const auto& p : parts) data.insert(data.end(), p.data().begin(), p.data().end());
  Shape out{parts.size()};
  out.insert(out.end(), s.begin(), s.end());
  return Tensor::from(std::move(out), std::move(data));
}

std::vector<double> softmax(std::span<const double> logits) {
  const double m = *std::max_element(logits.begin(), logits.end());
  std::vector<double> p(logits.size());
  double s = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) s += (p[i] = std::exp(logits[i] - m));
  for (double& v : p) v /= s;
  return p;
}

bool all_finite(std::span<const double> v) {
  return std::all_of(v.begin(), v.end(), [](double x) { return std::isfinite(x); });
}

[[noreturn]] void diagnose_nan(const Model& model, const ForwardOutput& out, const LossTerms& terms) {
  std::vector<NamedTensor> probes;
  for (const auto& p : model.parameters()) probes.push_back(p);
  for (std::size_t l = 0; l < out.hidden.size(); ++l) probes.emplace_back("hidden.layer" + std::to_string(l + 1), out.hidden[l]);
  for (std::size_t r = 0; r < out.au_logits.size(); ++r) probes.emplace_back("au_logits." + std::to_string(r + 1), out.au_logits[r]);
  probes.emplace_back("me_logits", out.me_logits);
  for (std::size_t r = 0; r < terms.layer_losses.size(); ++r) probes.emplace_back("au_loss." + std::to_string(r + 1), terms.layer_losses[r]);
  probes.emplace_back("me_loss", terms.me);
  if (terms.auxiliary.defined()) probes.emplace_back("auxiliary_loss", terms.auxiliary);
  for (const auto& [name, t] : probes) {
    if (!all_finite(t.data())) throw NumericError("non-finite loss; first non-finite tensor: " + name);
  }
  throw NumericError("non-finite loss; all inputs to it are finite");
}

double rel_error(double a, double b, double floor) {
  return std::abs(a - b) / std::max({std::abs(a), std::abs(b), floor});
}

}  // namespace

std::vector<PreparedSample> prepare_samples(const std::vector<Sample>& samples, const ModelConfig& cfg) {
  std::vector<PreparedSample> out;
  out.reserve(samples.size());
  for (const auto& s : samples) {
    if (s.me_label >= cfg.num_classes) {
      throw ParameterError("sample '" + s.id + "': ME label " + std::to_string(s.me_label) + " out of range for " +
                           std::to_string(cfg.num_classes) + " classes");
    }
    if (cfg.uses_au_heads() && s.au_labels.size() != cfg.au_vocab) {
      throw ParameterError("sample '" + s.id + "': " + std::to_string(s.au_labels.size()) +
                           " AU labels, model expects " + std::to_string(cfg.au_vocab));
    }
    PreparedSample p;
    p.id = s.id;
    p.subject_id = s.subject_id;
    p.label = s.me_label;
    p.au_targets.assign(s.au_labels.begin(), s.au_labels.end());
    p.triplet = amplify_motion(normalize_coordinates(s.key_triplet()), cfg.amplification);
    p.stream_a = stream_a_features(p.triplet, cfg);
    p.stream_b = stream_b_features(p.triplet, cfg);
    out.push_back(std::move(p));
  }
  return out;
}

Batch make_batch(const std::vector<PreparedSample>& samples, const std::vector<std::size_t>& indices,
                 const ModelConfig& cfg, std::mt19937_64* rng, double sigma) {
  if (indices.empty()) throw ShapeError("empty batch");
  std::vector<Tensor> a, b;
  std::vector<double> au;
  Batch batch;
  for (std::size_t i : indices) {
    const PreparedSample& s = samples.at(i);
    if (rng != nullptr && sigma > 0.0) {
      const KeyTriplet t = jitter_augment(s.triplet, sigma, *rng);
      a.push_back(stream_a_features(t, cfg));
      if (cfg.mode == NetworkMode::gtsgn) b.push_back(stream_b_features(t, cfg));
    } else {
      a.push_back(s.stream_a);
      if (cfg.mode == NetworkMode::gtsgn) b.push_back(s.stream_b);
    }
    batch.labels.push_back(s.label);
    if (cfg.uses_au_heads()) au.insert(au.end(), s.au_targets.begin(), s.au_targets.end());
  }
  batch.stream_a = stack(a);
  if (!b.empty()) batch.stream_b = stack(b);
  if (cfg.uses_au_heads()) batch.au_targets = Tensor::from({indices.size(), cfg.au_vocab}, std::move(au));
  return batch;
}

LossTerms compute_losses(const Model& model, const ForwardOutput& out, const Batch& batch) {
  const ModelConfig& cfg = model.config();
  LossTerms terms;
  terms.me = me_loss(out.me_logits, batch.labels);
  if (cfg.loss == LossMode::me) {
    terms.total = terms.me;
    return terms;
  }
  for (const auto& logits : out.au_logits) terms.layer_losses.push_back(au_loss(logits, batch.au_targets));
  terms.auxiliary = cfg.loss == LossMode::aau ? aau_loss(terms.layer_losses, model.aau_weights())
                                              : unweighted_multilayer_loss(terms.layer_losses);
  terms.total = total_loss(terms.me, terms.auxiliary, cfg.beta);
  return terms;
}

FitResult fit(Model& model, const std::vector<PreparedSample>& train, const TrainHyper& hyper) {
  if (train.empty()) throw ParameterError("fit: empty training set");
  if (hyper.batch_size == 0) throw ParameterError("fit: batch size must be positive");
  const ModelConfig& cfg = model.config();
  Adam opt(model.parameters(), AdamOptions{.lr = hyper.lr});
  std::mt19937_64 rng(hyper.seed);
  std::vector<std::size_t> order(train.size());
  std::iota(order.begin(), order.end(), std::size_t{0});

  FitResult result;
  for (std::size_t epoch = 1; epoch <= hyper.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    EpochRecord rec;
    rec.epoch = epoch;
    for (std::size_t start = 0; start < order.size(); start += hyper.batch_size) {
      const std::size_t end = std::min(order.size(), start + hyper.batch_size);
      const std::vector<std::size_t> idx(order.begin() + static_cast<std::ptrdiff_t>(start),
                                         order.begin() + static_cast<std::ptrdiff_t>(end));
      const Batch batch = make_batch(train, idx, cfg, hyper.augment ? &rng : nullptr, hyper.jitter_sigma);
      const ForwardOutput out = model.forward(batch.stream_a, batch.stream_b, Phase::train);
      const LossTerms terms = compute_losses(model, out, batch);
      if (!std::isfinite(terms.total.item())) diagnose_nan(model, out, terms);

      opt.zero_grad();
      terms.total.backward();
      opt.step();

      const double w = static_cast<double>(idx.size());
      rec.total += w * terms.total.item();
      rec.me += w * terms.me.item();
      if (terms.auxiliary.defined()) rec.auxiliary += w * terms.auxiliary.item();
    }
    const double n = static_cast<double>(train.size());
    rec.total /= n;
    rec.me /= n;
    rec.auxiliary /= n;
    if (model.aau_weights().defined()) rec.aau_weights = normalized_aau_weights(model.aau_weights());
    result.trace.push_back(std::move(rec));
  }
  return result;
}

std::vector<Prediction> predict(Model& model, const std::vector<PreparedSample>& samples) {
  constexpr std::size_t kChunk = 64;
  std::vector<Prediction> out;
  out.reserve(samples.size());
  for (std::size_t start = 0; start < samples.size(); start += kChunk) {
    std::vector<std::size_t> idx(std::min(kChunk, samples.size() - start));
    std::iota(idx.begin(), idx.end(), start);
    const Batch batch = make_batch(samples, idx, model.config());
    const ForwardOutput fwd = model.forward(batch.stream_a, batch.stream_b, Phase::eval);
    const std::size_t c = fwd.me_logits.dim(1);
    for (std::size_t b = 0; b < idx.size(); ++b) {
      const PreparedSample& s = samples[idx[b]];
      Prediction p;
      p.id = s.id;
      p.subject_id = s.subject_id;
      p.truth = s.label;
      p.probabilities = softmax(fwd.me_logits.data().subspan(b * c, c));
      p.predicted = static_cast<std::size_t>(
          std::max_element(p.probabilities.begin(), p.probabilities.end()) - p.probabilities.begin());
      for (const auto& h : fwd.hidden) {
        const std::size_t w = h.dim(1);
        const auto row = h.data().subspan(b * w, w);
        p.hidden.emplace_back(row.begin(), row.end());
      }
      out.push_back(std::move(p));
    }
  }
  return out;
}

Metrics metrics_from_confusion(std::vector<std::vector<std::size_t>> confusion) {
  Metrics m;
  const std::size_t c = confusion.size();
  std::size_t correct = 0;
  std::vector<std::size_t> predicted(c, 0), support(c, 0);
  for (std::size_t t = 0; t < c; ++t) {
    if (confusion[t].size() != c) throw ShapeError("confusion matrix must be square");
    for (std::size_t p = 0; p < c; ++p) {
      support[t] += confusion[t][p];
      predicted[p] += confusion[t][p];
      m.count += confusion[t][p];
    }
    correct += confusion[t][t];
  }
  m.accuracy = m.count ? static_cast<double>(correct) / static_cast<double>(m.count) : 0.0;
  m.precision.resize(c);
  m.recall.resize(c);
  m.class_f1.resize(c);
  for (std::size_t k = 0; k < c; ++k) {
    const double tp = static_cast<double>(confusion[k][k]);
    m.precision[k] = predicted[k] ? tp / static_cast<double>(predicted[k]) : 0.0;
    m.recall[k] = support[k] ? tp / static_cast<double>(support[k]) : 0.0;
    const double pr = m.precision[k] + m.recall[k];
    m.class_f1[k] = pr > 0.0 ? 2.0 * m.precision[k] * m.recall[k] / pr : 0.0;
  }
  m.f1 = c ? std::accumulate(m.class_f1.begin(), m.class_f1.end(), 0.0) / static_cast<double>(c) : 0.0;
  m.confusion = std::move(confusion);
  return m;
}

Metrics compute_metrics(const std::vector<Prediction>& predictions, std::size_t num_classes) {
  std::vector<std::vector<std::size_t>> confusion(num_classes, std::vector<std::size_t>(num_classes, 0));
  for (const auto& p : predictions) {
    if (p.truth >= num_classes || p.predicted >= num_classes) throw ParameterError("prediction class out of range");
    ++confusion[p.truth][p.predicted];
  }
  return metrics_from_confusion(std::move(confusion));
}

Metrics evaluate(Model& model, const std::vector<PreparedSample>& samples) {
  if (samples.empty()) throw ParameterError("evaluate: no samples");
  return compute_metrics(predict(model, samples), model.config().num_classes);
}

std::vector<LosoFold> loso_split(const std::vector<Sample>& samples) {
  std::map<std::string, std::vector<std::size_t>> by_subject;
  for (std::size_t i = 0; i < samples.size(); ++i) by_subject[samples[i].subject_id].push_back(i);
  if (by_subject.size() < 2) throw ParameterError("LOSO needs at least two subjects");
  std::vector<LosoFold> folds;
  for (const auto& [subject, test] : by_subject) {
    LosoFold f;
    f.held_out_subject = subject;
    f.test = test;
    for (std::size_t i = 0; i < samples.size(); ++i)
      if (samples[i].subject_id != subject) f.train.push_back(i);
    folds.push_back(std::move(f));
  }
  return folds;
}

LosoFold holdout_split(const std::vector<Sample>& samples, double test_fraction) {
  if (!(test_fraction > 0.0 && test_fraction < 1.0)) throw ParameterError("holdout fraction must be in (0, 1)");
  std::set<std::string> subjects;
  for (const auto& s : samples) subjects.insert(s.subject_id);
  if (subjects.size() < 2) throw ParameterError("holdout split needs at least two subjects");
  const auto n = static_cast<std::size_t>(std::ceil(test_fraction * static_cast<double>(subjects.size())));
  const std::size_t n_test = std::clamp<std::size_t>(n, 1, subjects.size() - 1);
  std::set<std::string> held(std::prev(subjects.end(), static_cast<std::ptrdiff_t>(n_test)), subjects.end());

  LosoFold f;
  for (const auto& s : held) f.held_out_subject += (f.held_out_subject.empty() ? "" : ",") + s;
  for (std::size_t i = 0; i < samples.size(); ++i) (held.count(samples[i].subject_id) ? f.test : f.train).push_back(i);
  return f;
}

LosoResult run_folds(const std::vector<LosoFold>& folds, std::size_t num_classes, const FoldRunner& runner,
                     std::size_t jobs) {
  LosoResult result;
  result.folds.resize(folds.size());
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  auto worker = [&] {
    for (std::size_t i = next++; i < folds.size(); i = next++) {
      try {
        result.folds[i] = runner(folds[i]);
      } catch (...) {
        std::lock_guard lock(failure_mutex);
        if (!failure) failure = std::current_exception();
      }
    }
  };
  const std::size_t threads = std::clamp<std::size_t>(jobs, 1, std::max<std::size_t>(folds.size(), 1));
  if (threads == 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (std::size_t t = 0; t < threads; ++t) pool.emplace_back(worker);
  }
  if (failure) std::rethrow_exception(failure);

  for (const auto& f : result.folds)
    result.predictions.insert(result.predictions.end(), f.predictions.begin(), f.predictions.end());
  result.pooled = compute_metrics(result.predictions, num_classes);
  return result;
}

FoldResult train_and_test(const std::vector<PreparedSample>& prepared, const LosoFold& fold, const ModelConfig& cfg,
                          const TrainHyper& hyper, std::uint64_t seed) {
  std::vector<PreparedSample> train, test;
  for (std::size_t i : fold.train) train.push_back(prepared.at(i));
  for (std::size_t i : fold.test) test.push_back(prepared.at(i));

  Model model = Model::build(cfg, seed);
  TrainHyper h = hyper;
  h.seed = seed;
  FoldResult r;
  r.fold = fold;
  r.fit = fit(model, train, h);
  r.predictions = predict(model, test);
  r.metrics = compute_metrics(r.predictions, cfg.num_classes);
  if (model.aau_weights().defined()) r.aau_weights = normalized_aau_weights(model.aau_weights());
  for (const auto& [name, t] : model.learnable_adjacencies()) r.lam.emplace_back(name, t.detach());
  return r;
}

LosoResult run_loso(const std::vector<Sample>& samples, const ModelConfig& cfg, const TrainHyper& hyper,
                    std::size_t jobs) {
  cfg.validate();
  const auto folds = loso_split(samples);
  const auto prepared = prepare_samples(samples, cfg);
  return run_folds(
      folds, cfg.num_classes,
      [&](const LosoFold& fold) {
        const auto index = static_cast<std::uint64_t>(&fold - folds.data());
        return train_and_test(prepared, fold, cfg, hyper, hyper.seed + index);
      },
      jobs);
}

bool GradcheckReport::passed() const {
  return std::all_of(entries.begin(), entries.end(), [this](const GradcheckEntry& e) {
    return e.max_rel_error < tolerance && e.skipped < e.numel;
  });
}

GradcheckReport gradcheck(const ModelConfig& cfg, const std::vector<Sample>& samples, double tolerance,
                          std::uint64_t seed, double step) {
  constexpr double kFloor = 1e-6;
  Model model = Model::build(cfg, seed);
  const auto prepared = prepare_samples(samples, cfg);
  // One sample per class keeps every loss term active while leaving few
  // ReLU pre-activations close enough to zero to flip under the step.
  std::vector<std::size_t> picked;
  std::vector<bool> seen(cfg.num_classes, false);
  for (std::size_t i = 0; i < prepared.size(); ++i) {
    if (!seen[prepared[i].label]) {
      seen[prepared[i].label] = true;
      picked.push_back(i);
    }
  }
  if (picked.empty()) throw ParameterError("gradcheck needs at least one sample");
  const Batch batch = make_batch(prepared, picked, cfg);

  auto loss = [&] {
    const ForwardOutput out = model.forward(batch.stream_a, batch.stream_b, Phase::train);
    return compute_losses(model, out, batch).total;
  };

  auto params = model.parameters();
  for (auto& [name, t] : params) t.zero_grad();
  const Tensor base = loss();
  base.backward();
  const double f0 = base.item();

  GradcheckReport report;
  report.tolerance = tolerance;
  for (auto& [name, t] : params) {
    GradcheckEntry e;
    e.name = name;
    e.numel = t.numel();
    const std::vector<double> analytic(t.grad().begin(), t.grad().end());
    auto values = t.data_mut();
    for (std::size_t i = 0; i < values.size(); ++i) {
      // Try the step and a ten times smaller one: a ReLU switching inside
      // [-h, h] breaks the central difference, and then the analytic
      // gradient matches one of the one-sided slopes instead.
      double err = std::numeric_limits<double>::infinity();
      bool kink = false;
      for (const double h : {step, step / 10.0}) {
        const double keep = values[i];
        values[i] = keep + h;
        const double f_plus = loss().item();
        values[i] = keep - h;
        const double f_minus = loss().item();
        values[i] = keep;

        err = std::min(err, rel_error(analytic[i], (f_plus - f_minus) / (2.0 * h), kFloor));
        if (err < tolerance) break;
        const double right = (f_plus - f0) / h;
        const double left = (f0 - f_minus) / h;
        if (rel_error(left, right, kFloor) > tolerance &&
            std::min(rel_error(analytic[i], left, kFloor), rel_error(analytic[i], right, kFloor)) < 1e-3) {
          kink = true;
          break;
        }
      }
      if (kink && err >= tolerance) {
        ++e.skipped;
        continue;
      }
      e.max_rel_error = std::max(e.max_rel_error, err);
    }
    report.entries.push_back(std::move(e));
  }
  return report;
}

}  // namespace gmg
