#pragma once

// AdaGrad, the epoch loop with dev-set model selection, evaluation and the
// finite-difference gradient checker.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <future>
#include <limits>
#include <map>
#include <numeric>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "ham/answer.hpp"
#include "ham/errors.hpp"
#include "ham/model.hpp"
#include "ham/numeric.hpp"
#include "ham/treebank.hpp"

namespace ham {

using NamedParams = std::vector<std::pair<std::string, Tensor*>>;

struct AdaGradState {
  double learning_rate = 0.002;
  double epsilon = 1e-8;
  std::map<std::string, Tensor> accumulators;  // running sum of squared gradients
};

/// theta -= lr * g / (sqrt(acc) + eps) after acc += g^2, elementwise. Every
/// parameter must have a gradient.
inline void adagrad_step(const NamedParams& params, const Gradients& grads, AdaGradState& state) {
  for (const auto& [name, tensor] : params) {
    auto g = grads.find(name);
    if (g == grads.end()) throw DomainError("adagrad_step: no gradient for '" + name + "'");
    if (g->second.shape() != tensor->shape()) {
      throw DimensionError("adagrad_step: gradient for '" + name + "' has shape " +
                           g->second.shape_string() + ", parameter " + tensor->shape_string());
    }
    auto [acc_it, fresh] = state.accumulators.try_emplace(name);
    if (fresh) acc_it->second = Tensor::zeros(tensor->shape());
    auto acc = acc_it->second.mutable_values();
    auto theta = tensor->mutable_values();
    auto gv = g->second.values();
    for (std::size_t i = 0; i < gv.size(); ++i) {
      if (gv[i] == 0.0) continue;
      acc[i] += gv[i] * gv[i];
      theta[i] -= state.learning_rate * gv[i] / (std::sqrt(acc[i]) + state.epsilon);
    }
  }
}

struct TrainConfig {
  ModelConfig model;
  double learning_rate = 0.002;
  int epochs = 100;
  std::uint64_t seed = 1;
  int patience = 25;
  // 1 updates after every example; 0 uses the whole training set per update.
  std::size_t batch_size = 1;
  // Worker threads for per-example gradients inside a batch.
  std::size_t threads = 1;
  // Global gradient-norm clip; 0 disables.
  double clip_norm = 0.0;

  void validate() const {
    model.validate();
    if (epochs < 0) throw DomainError("epochs must be non-negative");
    if (!(learning_rate > 0.0)) throw DomainError("learning rate must be positive");
    if (patience < 1) throw DomainError("patience must be at least 1");
    if (threads < 1) throw DomainError("threads must be at least 1");
    if (clip_norm < 0.0) throw DomainError("clip_norm must be non-negative");
  }

  nlohmann::ordered_json to_json() const {
    nlohmann::ordered_json j;
    j["model"] = model.to_json();
    j["learning_rate"] = learning_rate;
    j["epochs"] = epochs;
    j["seed"] = seed;
    j["patience"] = patience;
    j["batch_size"] = batch_size;
    j["threads"] = threads;
    j["clip_norm"] = clip_norm;
    return j;
  }
};

struct EpochMetrics {
  int epoch = 0;
  double train_loss = 0.0;  // mean KL over the epoch's examples
  double dev_accuracy = 0.0;
};

struct ExampleRecord {
  std::string id;
  std::vector<double> p_hat;
  std::vector<std::size_t> selected;
  bool correct = false;
};

struct EvalReport {
  double accuracy = 0.0;
  std::vector<ExampleRecord> records;
};

/// Fraction of problems whose predicted set equals the correct set.
inline EvalReport evaluate(const Predictor& predict, std::span<const Problem> dataset) {
  if (dataset.empty()) throw DomainError("evaluate: empty dataset, accuracy undefined");
  EvalReport r;
  std::size_t hits = 0;
  for (const auto& p : dataset) {
    auto pred = predict(p);
    const bool ok = grade(pred.selected, p.correct) == Grade::correct;
    hits += ok;
    r.records.push_back({p.id, std::move(pred.p_hat), std::move(pred.selected), ok});
  }
  r.accuracy = static_cast<double>(hits) / static_cast<double>(dataset.size());
  return r;
}

inline std::string record_to_json(const ExampleRecord& r, const std::string& model) {
  nlohmann::ordered_json j;
  j["id"] = r.id;
  j["model"] = model;
  j["p_hat"] = r.p_hat;
  j["selected"] = r.selected;
  j["correct"] = r.correct;
  return j.dump();
}

/// Parameters the optimizer updates (the embedding table is left out when
/// frozen).
inline NamedParams trainable(HamModel& model) {
  NamedParams out;
  for (auto& [name, t] : model.params().named()) {
    if (name == "embedding" && !model.config().train_embeddings) continue;
    out.emplace_back(name, t);
  }
  return out;
}

struct LossAndGrad {
  double loss = 0.0;
  Gradients grads;
};

inline LossAndGrad loss_and_gradient(const HamModel& model, const Problem& problem) {
  Tape tape;
  auto f = model.forward(tape, problem, true);
  LossAndGrad out;
  out.loss = tape.value(f.loss)[0];
  out.grads = tape.backward(f.loss);
  return out;
}

namespace detail {

// Id of the first example whose loss is not finite (the first one if every
// loss recomputes cleanly).
inline std::string first_non_finite(const HamModel& model, std::span<const Problem* const> batch) {
  for (const Problem* p : batch) {
    try {
      if (!std::isfinite(model.loss(*p))) return p->id;
    } catch (const NumericError&) {
      return p->id;
    }
  }
  return batch.front()->id;
}

}  // namespace detail

/// Mean loss and mean gradient over a batch. Per-example gradients may be
/// computed on several threads but are always summed in batch order.
inline LossAndGrad batch_gradient(const HamModel& model, std::span<const Problem* const> batch,
                                  std::size_t threads) {
  std::vector<LossAndGrad> parts(batch.size());
  if (threads <= 1 || batch.size() <= 1) {
    for (std::size_t i = 0; i < batch.size(); ++i) parts[i] = loss_and_gradient(model, *batch[i]);
  } else {
    std::vector<std::future<void>> jobs;
    const std::size_t n = std::min(threads, batch.size());
    for (std::size_t w = 0; w < n; ++w) {
      jobs.push_back(std::async(std::launch::async, [&, w] {
        for (std::size_t i = w; i < batch.size(); i += n) parts[i] = loss_and_gradient(model, *batch[i]);
      }));
    }
    for (auto& j : jobs) j.get();
  }
  LossAndGrad total = std::move(parts[0]);
  for (std::size_t i = 1; i < parts.size(); ++i) {
    total.loss += parts[i].loss;
    for (auto& [name, g] : total.grads) {
      auto src = parts[i].grads.at(name).values();
      auto dst = g.mutable_values();
      for (std::size_t k = 0; k < dst.size(); ++k) dst[k] += src[k];
    }
  }
  const double inv = 1.0 / static_cast<double>(batch.size());
  total.loss *= inv;
  if (batch.size() > 1) {
    for (auto& [name, g] : total.grads)
      for (auto& v : g.mutable_values()) v *= inv;
  }
  return total;
}

inline void clip_gradients(Gradients& grads, double max_norm) {
  double sq = 0.0;
  for (const auto& [name, g] : grads)
    for (double v : g.values()) sq += v * v;
  const double norm = std::sqrt(sq);
  if (norm <= max_norm || norm == 0.0) return;
  const double s = max_norm / norm;
  for (auto& [name, g] : grads)
    for (auto& v : g.mutable_values()) v *= s;
}

struct TrainResult {
  HamModel model;  // parameters with the best dev accuracy
  std::vector<EpochMetrics> metrics;
  int best_epoch = 0;  // 0: the initial parameters
  double best_dev_accuracy = 0.0;
};

/// Optional per-epoch observer, e.g. for progress output.
using EpochCallback = std::function<void(const EpochMetrics&)>;

/// Trains from `initial` and keeps the parameters with the best dev accuracy
/// (earliest epoch on ties). Stops after `patience` epochs without
/// improvement. Deterministic for a given seed when threads == 1, and for any
/// thread count since batch gradients are reduced in a fixed order.
inline TrainResult train(HamModel initial, const TrainConfig& config,
                         std::span<const Problem> train_set, std::span<const Problem> dev_set,
                         const EpochCallback& on_epoch = {}) {
  config.validate();
  if (config.epochs > 0 && (train_set.empty() || dev_set.empty())) {
    throw DomainError("train: training and dev sets must be nonempty");
  }
  HamModel model = std::move(initial);
  TrainResult result{model, {}, 0, 0.0};
  if (config.epochs == 0) return result;
  result.best_dev_accuracy = evaluate(model.predictor(), dev_set).accuracy;

  AdaGradState opt;
  opt.learning_rate = config.learning_rate;
  const NamedParams params = trainable(model);
  std::mt19937_64 rng(config.seed);
  std::vector<std::size_t> order(train_set.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  const std::size_t batch = config.batch_size == 0 ? train_set.size() : config.batch_size;
  std::vector<const Problem*> members;

  for (int epoch = 1; epoch <= config.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    double loss_sum = 0.0;
    for (std::size_t start = 0; start < order.size(); start += batch) {
      members.clear();
      for (std::size_t i = start; i < std::min(order.size(), start + batch); ++i) {
        members.push_back(&train_set[order[i]]);
      }
      LossAndGrad lg;
      try {
        lg = batch_gradient(model, members, config.threads);
      } catch (const NumericError&) {
        // NaNs can trip the attention check before a loss exists.
        lg.loss = std::numeric_limits<double>::quiet_NaN();
      }
      if (!std::isfinite(lg.loss)) {
        throw NumericError("non-finite loss at epoch " + std::to_string(epoch) + ", example " +
                           detail::first_non_finite(model, members));
      }
      loss_sum += lg.loss * static_cast<double>(members.size());
      if (config.clip_norm > 0.0) clip_gradients(lg.grads, config.clip_norm);
      adagrad_step(params, lg.grads, opt);
    }
    EpochMetrics m;
    m.epoch = epoch;
    m.train_loss = loss_sum / static_cast<double>(train_set.size());
    m.dev_accuracy = evaluate(model.predictor(), dev_set).accuracy;
    result.metrics.push_back(m);
    if (on_epoch) on_epoch(m);
    if (m.dev_accuracy > result.best_dev_accuracy) {
      result.best_dev_accuracy = m.dev_accuracy;
      result.best_epoch = epoch;
      result.model = model;
    } else if (epoch - result.best_epoch >= config.patience) {
      break;
    }
  }
  return result;
}

inline std::string metrics_csv(std::span<const EpochMetrics> metrics) {
  std::string out = "epoch,train_loss,dev_accuracy\n";
  char buf[96];
  for (const auto& m : metrics) {
    std::snprintf(buf, sizeof(buf), "%d,%.17g,%.17g\n", m.epoch, m.train_loss, m.dev_accuracy);
    out += buf;
  }
  return out;
}

struct SeedSummary {
  double mean = 0.0;
  double stddev = 0.0;  // sample standard deviation
};

/// Mean and spread of a metric over repeated runs with different seeds.
inline SeedSummary summarize(std::span<const double> values) {
  if (values.empty()) throw DomainError("summarize: no values");
  SeedSummary s;
  s.mean = std::accumulate(values.begin(), values.end(), 0.0) / static_cast<double>(values.size());
  if (values.size() > 1) {
    double sq = 0.0;
    for (double v : values) sq += (v - s.mean) * (v - s.mean);
    s.stddev = std::sqrt(sq / static_cast<double>(values.size() - 1));
  }
  return s;
}

// Denominator floor for the relative error, so entries whose true gradient is
// ~0 are compared on an absolute scale instead of amplifying FD noise. With a
// 1e-5 step, rounding alone puts ~1e-11 of noise into a central difference of
// an O(1) loss; a 1e-5 floor keeps that well under a 1e-5 tolerance.
inline constexpr double kGradCheckFloor = 1e-5;

inline double relative_error(double analytic, double numeric) {
  const double denom = std::max({std::abs(analytic), std::abs(numeric), kGradCheckFloor});
  return std::abs(analytic - numeric) / denom;
}

struct ParamCheck {
  std::string name;
  std::size_t entries = 0;
  double max_relative_error = 0.0;
  std::size_t flagged = 0;
};

struct GradCheckReport {
  std::vector<ParamCheck> params;
  double max_relative_error = 0.0;
  std::size_t flagged = 0;
  double tolerance = 0.0;

  bool passed() const noexcept { return flagged == 0; }
};

/// Test hook to alter analytic gradients before comparison.
using GradientTamper = std::function<void(Gradients&)>;

/// Compares analytic gradients with central differences of the loss, entry
/// by entry, for every parameter.
inline GradCheckReport grad_check(HamModel model, const Problem& problem, double tolerance,
                                  double step = 1e-5, const GradientTamper& tamper = {}) {
  auto analytic = loss_and_gradient(model, problem).grads;
  if (tamper) tamper(analytic);
  GradCheckReport report;
  report.tolerance = tolerance;
  for (auto& [name, tensor] : model.params().named()) {
    ParamCheck pc;
    pc.name = name;
    const auto& g = analytic.at(name);
    auto theta = tensor->mutable_values();
    pc.entries = theta.size();
    for (std::size_t i = 0; i < theta.size(); ++i) {
      const double saved = theta[i];
      theta[i] = saved + step;
      const double up = model.loss(problem);
      theta[i] = saved - step;
      const double down = model.loss(problem);
      theta[i] = saved;
      const double numeric = (up - down) / (2.0 * step);
      const double err = relative_error(g[i], numeric);
      pc.max_relative_error = std::max(pc.max_relative_error, err);
      if (!(err < tolerance)) ++pc.flagged;
    }
    report.max_relative_error = std::max(report.max_relative_error, pc.max_relative_error);
    report.flagged += pc.flagged;
    report.params.push_back(std::move(pc));
  }
  return report;
}

}  // namespace ham
