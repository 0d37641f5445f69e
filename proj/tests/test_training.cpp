#include <doctest.h>

#include <cmath>
#include <map>
#include <numeric>
#include <random>
#include <set>

#include "gmg/errors.hpp"
#include "gmg/training.hpp"

using namespace gmg;

namespace {

std::vector<Sample> small_set(std::size_t subjects = 4, std::uint64_t seed = 1, double noise = 0.3) {
  SynthSpec spec;
  spec.num_subjects = subjects;
  spec.noise_sigma = noise;
  spec.seed = seed;
  return synth_dataset(spec);
}

std::vector<std::vector<double>> snapshot(const Model& m) {
  std::vector<std::vector<double>> out;
  for (const auto& [name, t] : m.parameters()) out.emplace_back(t.data().begin(), t.data().end());
  return out;
}

}  // namespace

TEST_CASE("loso folds partition the data by subject") {
  for (std::size_t subjects : {2, 3, 5}) {
    const auto samples = small_set(subjects);
    const auto folds = loso_split(samples);
    CHECK(folds.size() == subjects);
    std::vector<int> tested(samples.size(), 0);
    for (const auto& f : folds) {
      std::set<std::size_t> train(f.train.begin(), f.train.end());
      for (std::size_t i = 0; i < samples.size(); ++i) {
        const bool held = samples[i].subject_id == f.held_out_subject;
        const bool in_test = std::find(f.test.begin(), f.test.end(), i) != f.test.end();
        CHECK(held == in_test);
        CHECK(held != train.count(i) > 0);
        if (in_test) ++tested[i];
      }
      CHECK(f.train.size() + f.test.size() == samples.size());
    }
    for (int t : tested) CHECK(t == 1);
  }
  auto one = small_set(1);
  CHECK_THROWS(loso_split(one));
}

TEST_CASE("holdout split keeps subjects whole") {
  const auto samples = small_set(5);
  const LosoFold f = holdout_split(samples, 0.3);  // ceil(1.5) = 2 subjects
  std::set<std::string> test_subjects, train_subjects;
  for (auto i : f.test) test_subjects.insert(samples[i].subject_id);
  for (auto i : f.train) train_subjects.insert(samples[i].subject_id);
  CHECK(test_subjects == std::set<std::string>{"sub04", "sub05"});
  CHECK(train_subjects.size() == 3);
  CHECK_THROWS(holdout_split(samples, 0.0));
  CHECK_THROWS(holdout_split(samples, 1.0));
}

TEST_CASE("metrics hand cases") {
  const Metrics perfect = metrics_from_confusion({{3, 0, 0}, {0, 2, 0}, {0, 0, 4}});
  CHECK(perfect.accuracy == 1.0);
  CHECK(perfect.f1 == 1.0);
  const Metrics half = metrics_from_confusion({{1, 1}, {1, 1}});
  CHECK(half.accuracy == 0.5);
  CHECK(half.f1 == 0.5);
  // A class never seen nor predicted scores zero and still counts.
  const Metrics missing = metrics_from_confusion({{2, 0}, {0, 0}});
  CHECK(missing.accuracy == 1.0);
  CHECK(missing.f1 == 0.5);
}

TEST_CASE("metrics match per-sample counting") {
  std::mt19937_64 rng(71);
  std::uniform_int_distribution<std::size_t> cls(0, 3);
  std::vector<Prediction> preds(200);
  for (auto& p : preds) {
    p.truth = cls(rng);
    p.predicted = rng() % 3 == 0 ? cls(rng) : p.truth;
  }
  const Metrics m = compute_metrics(preds, 4);
  double correct = 0, f1_sum = 0;
  for (const auto& p : preds) correct += p.truth == p.predicted;
  for (std::size_t c = 0; c < 4; ++c) {
    double tp = 0, fp = 0, fn = 0;
    for (const auto& p : preds) {
      tp += p.truth == c && p.predicted == c;
      fp += p.truth != c && p.predicted == c;
      fn += p.truth == c && p.predicted != c;
    }
    f1_sum += tp == 0 ? 0.0 : 2 * tp / (2 * tp + fp + fn);
  }
  CHECK(m.accuracy == doctest::Approx(correct / 200));
  CHECK(m.f1 == doctest::Approx(f1_sum / 4));
  for (std::size_t c = 0; c < 4; ++c) {
    std::size_t support = 0;
    for (const auto& p : preds) support += p.truth == c;
    CHECK(std::accumulate(m.confusion[c].begin(), m.confusion[c].end(), std::size_t{0}) == support);
  }
}

TEST_CASE("lr = 0 leaves parameters unchanged") {
  const ModelConfig cfg = ModelConfig::micro();
  const auto prepared = prepare_samples(small_set(), cfg);
  Model m = Model::build(cfg, 2);
  const auto before = snapshot(m);
  TrainHyper h;
  h.lr = 0.0;
  h.epochs = 3;
  fit(m, prepared, h);
  CHECK(snapshot(m) == before);
  CHECK_THROWS(fit(m, {}, h));
}

TEST_CASE("same seed gives identical loss traces") {
  ModelConfig cfg = ModelConfig::micro();
  cfg.mode = NetworkMode::gtsgn;
  cfg.fusion_layer = 2;
  const auto prepared = prepare_samples(small_set(), cfg);
  TrainHyper h;
  h.epochs = 5;
  h.augment = true;
  h.seed = 9;
  Model a = Model::build(cfg, 3), b = Model::build(cfg, 3);
  const FitResult ra = fit(a, prepared, h), rb = fit(b, prepared, h);
  REQUIRE(ra.trace.size() == 5);
  for (std::size_t e = 0; e < 5; ++e) {
    CHECK(ra.trace[e].total == rb.trace[e].total);
    CHECK(ra.trace[e].aau_weights == rb.trace[e].aau_weights);
  }
  CHECK(snapshot(a) == snapshot(b));
}

TEST_CASE("aau weights stay a probability vector while training") {
  const ModelConfig cfg = ModelConfig::micro();
  const auto prepared = prepare_samples(small_set(), cfg);
  Model m = Model::build(cfg, 4);
  TrainHyper h;
  h.epochs = 40;
  h.lr = 1e-2;
  const FitResult r = fit(m, prepared, h);
  for (const auto& rec : r.trace) {
    REQUIRE(rec.aau_weights.size() == 4);
    double s = 0;
    for (double w : rec.aau_weights) {
      CHECK(w >= 0.0);
      s += w;
    }
    CHECK(s == doctest::Approx(1.0).epsilon(1e-12));
  }
}

TEST_CASE("total loss is affine and increasing in beta at fixed parameters") {
  const auto samples = small_set();
  std::vector<double> totals;
  double aux = 0;
  for (double beta : {0.0, 0.1, 0.5, 1.0}) {
    ModelConfig cfg = ModelConfig::micro();
    cfg.beta = beta;
    const auto prepared = prepare_samples(samples, cfg);
    Model m = Model::build(cfg, 5);
    std::vector<std::size_t> idx(prepared.size());
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    const Batch batch = make_batch(prepared, idx, cfg);
    const LossTerms terms = compute_losses(m, m.forward(batch.stream_a, batch.stream_b, Phase::eval), batch);
    totals.push_back(terms.total.item());
    aux = terms.auxiliary.item();
    CHECK(terms.total.item() == doctest::Approx(terms.me.item() + beta * aux).epsilon(1e-14));
  }
  CHECK(aux > 0.0);
  for (std::size_t i = 1; i < totals.size(); ++i) CHECK(totals[i] > totals[i - 1]);
  CHECK((totals[3] - totals[0]) == doctest::Approx(10.0 * (totals[1] - totals[0])));
}

TEST_CASE("micro network overfits a separable set") {
  const ModelConfig cfg = ModelConfig::micro();
  const auto prepared = prepare_samples(small_set(4, 1, 0.0), cfg);
  Model m = Model::build(cfg, 6);
  TrainHyper h;
  h.epochs = 500;
  fit(m, prepared, h);
  CHECK(evaluate(m, prepared).accuracy == 1.0);
}

TEST_CASE("constant predictor scores the held-out class frequency") {
  const auto samples = small_set(3);
  const auto folds = loso_split(samples);
  const FoldRunner always_zero = [&](const LosoFold& f) {
    FoldResult r;
    r.fold = f;
    for (auto i : f.test) {
      Prediction p;
      p.id = samples[i].id;
      p.truth = samples[i].me_label;
      p.predicted = 0;
      r.predictions.push_back(p);
    }
    r.metrics = compute_metrics(r.predictions, 3);
    return r;
  };
  const LosoResult res = run_folds(folds, 3, always_zero, 3);
  double zeros = 0;
  for (const auto& s : samples) zeros += s.me_label == 0;
  CHECK(res.pooled.accuracy == doctest::Approx(zeros / static_cast<double>(samples.size())));
  CHECK(res.predictions.size() == samples.size());
}

TEST_CASE("parallel folds match sequential folds") {
  const auto samples = small_set(3);
  ModelConfig cfg = ModelConfig::micro();
  TrainHyper h;
  h.epochs = 4;
  const LosoResult seq = run_loso(samples, cfg, h, 1);
  const LosoResult par = run_loso(samples, cfg, h, 3);
  REQUIRE(seq.predictions.size() == par.predictions.size());
  for (std::size_t i = 0; i < seq.predictions.size(); ++i) {
    CHECK(seq.predictions[i].id == par.predictions[i].id);
    CHECK(seq.predictions[i].probabilities == par.predictions[i].probabilities);
  }
}

TEST_CASE("gradcheck passes on the micro configurations") {
  const auto samples = small_set();
  ModelConfig gts = ModelConfig::micro();
  gts.mode = NetworkMode::gtsgn;
  gts.fusion_layer = 2;
  for (const ModelConfig& cfg : {ModelConfig::micro(), gts}) {
    const GradcheckReport r = gradcheck(cfg, samples);
    CHECK(r.passed());
    bool saw_lam = false, saw_w = false;
    for (const auto& e : r.entries) {
      saw_lam |= e.name.ends_with(".gcn.lam");
      saw_w |= e.name == "aau_weights";
      CHECK_MESSAGE(e.max_rel_error < 1e-4, e.name);
    }
    CHECK(saw_lam);
    CHECK(saw_w);
  }
}
