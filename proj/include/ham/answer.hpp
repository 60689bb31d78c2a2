#pragma once

// Choice scoring, target distribution, KL loss and top-N selection.

#include <algorithm>
#include <cstddef>
#include <numeric>
#include <span>
#include <vector>

#include "ham/errors.hpp"
#include "ham/numeric.hpp"

namespace ham {

struct AnswerDistribution {
  std::vector<double> scores;  // cosine(q_n, V_C_i)
  std::vector<double> p_hat;   // softmax(scores)
};

struct ChoiceScores {
  Var scores;
  Var p_hat;
};

inline ChoiceScores score_choices(Tape& tape, Var memory_output, std::span<const Var> choices) {
  if (choices.size() < 2) throw DomainError("score_choices: need at least 2 choices");
  std::vector<Var> sims;
  sims.reserve(choices.size());
  for (Var c : choices) sims.push_back(tape.cosine(memory_output, c));
  const Var scores = tape.stack(sims);
  return {scores, tape.softmax(scores)};
}

inline AnswerDistribution score_choices(const Tensor& memory_output,
                                        std::span<const Tensor> choices) {
  if (choices.size() < 2) throw DomainError("score_choices: need at least 2 choices");
  AnswerDistribution d;
  for (const auto& c : choices) {
    if (c.size() != memory_output.size()) {
      throw DimensionError("score_choices: choice vector has " + std::to_string(c.size()) +
                           " entries, memory output has " + std::to_string(memory_output.size()));
    }
    d.scores.push_back(cosine(memory_output, c));
  }
  d.p_hat = kernels::softmax(d.scores);
  return d;
}

/// p_i = 1/N for each of the N correct choices, 0 elsewhere.
inline std::vector<double> target_distribution(std::size_t num_choices,
                                               std::span<const std::size_t> correct) {
  if (correct.empty() || correct.size() >= num_choices) {
    throw DomainError("target_distribution: need between 1 and K-1 correct choices");
  }
  std::vector<double> p(num_choices, 0.0);
  const double mass = 1.0 / static_cast<double>(correct.size());
  for (auto i : correct) {
    if (i >= num_choices) throw RangeError("target_distribution: choice index out of range");
    if (p[i] != 0.0) throw DomainError("target_distribution: duplicate correct index");
    p[i] = mass;
  }
  return p;
}

/// Indices of the n largest entries, ascending. Ties prefer the lower index.
inline std::vector<std::size_t> select(std::span<const double> p_hat, std::size_t n) {
  if (n < 1 || n >= p_hat.size()) throw DomainError("select: need 1 <= N < K");
  std::vector<std::size_t> order(p_hat.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return p_hat[a] > p_hat[b]; });
  order.resize(n);
  std::sort(order.begin(), order.end());
  return order;
}

inline double loss(std::span<const double> p, std::span<const double> p_hat) {
  return kernels::kl_divergence(p, p_hat);
}

enum class Grade { correct, incorrect };

/// Exact set match; order is irrelevant and partial overlap earns nothing.
inline Grade grade(std::vector<std::size_t> prediction, std::vector<std::size_t> correct) {
  std::sort(prediction.begin(), prediction.end());
  std::sort(correct.begin(), correct.end());
  prediction.erase(std::unique(prediction.begin(), prediction.end()), prediction.end());
  correct.erase(std::unique(correct.begin(), correct.end()), correct.end());
  return prediction == correct ? Grade::correct : Grade::incorrect;
}

}  // namespace ham
