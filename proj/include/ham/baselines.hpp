#pragma once

// Word-vector averaging baselines. Both pick the top-N choices by cosine
// against a reference vector: the question itself, or the story window most
// similar to the question. The attention-free Tree-LSTM baseline is
// HamModel with use_memory = false.

#include <algorithm>
#include <cstddef>
#include <string>
#include <vector>

#include "ham/answer.hpp"
#include "ham/encoder.hpp"
#include "ham/errors.hpp"
#include "ham/numeric.hpp"
#include "ham/treebank.hpp"

namespace ham {

/// Mean word vector over a token sequence; unknown words contribute the
/// <unk> row.
inline Tensor average_tokens(const std::vector<std::string>& tokens, const EmbeddingTable& table) {
  const std::size_t d = table.vectors.cols();
  std::vector<double> sum(d, 0.0);
  for (const auto& w : tokens) {
    const auto r = table.vectors.row(table.vocabulary.lookup(w));
    for (std::size_t k = 0; k < d; ++k) sum[k] += r[k];
  }
  if (!tokens.empty()) {
    for (auto& v : sum) v /= static_cast<double>(tokens.size());
  }
  return Tensor::vector(std::move(sum));
}

/// Mean over every token of the given sentences.
inline Tensor average_sentences(std::span<const DepTree> sentences, const EmbeddingTable& table) {
  std::vector<std::string> tokens;
  for (const auto& s : sentences) tokens.insert(tokens.end(), s.tokens().begin(), s.tokens().end());
  return average_tokens(tokens, table);
}

/// Top-N choices by cosine to `reference`; ties go to the lower index.
inline std::vector<std::size_t> rank_choices(const Problem& problem, const Tensor& reference,
                                             const EmbeddingTable& table,
                                             std::vector<double>* scores = nullptr) {
  std::vector<double> s;
  for (const auto& c : problem.choices) s.push_back(cosine(reference, average_sentences(c, table)));
  auto picked = select(s, problem.num_answers());
  if (scores) *scores = std::move(s);
  return picked;
}

/// Baseline (a): the choices most similar to the question. Ignores the story.
inline std::vector<std::size_t> baseline_question_choice(const Problem& problem,
                                                         const EmbeddingTable& table) {
  return rank_choices(problem, average_sentences(problem.question, table), table);
}

/// Averaged vector of every window of `w` consecutive story sentences
/// (stride 1). A story shorter than `w` yields one window over all of it.
inline std::vector<Tensor> story_windows(const Problem& problem, const EmbeddingTable& table,
                                         std::size_t w) {
  if (w < 1) throw DomainError("window size must be at least 1");
  const std::size_t n = problem.story.size();
  const std::span<const DepTree> story(problem.story);
  std::vector<Tensor> out;
  if (n <= w) {
    out.push_back(average_sentences(story, table));
    return out;
  }
  for (std::size_t start = 0; start + w <= n; ++start) {
    out.push_back(average_sentences(story.subspan(start, w), table));
  }
  return out;
}

/// Baseline (b): find the story window closest to the question, then the
/// choices closest to that window.
inline std::vector<std::size_t> baseline_sliding_window(const Problem& problem,
                                                        const EmbeddingTable& table,
                                                        std::size_t w = 5) {
  const auto windows = story_windows(problem, table, w);
  const Tensor q = average_sentences(problem.question, table);
  std::size_t best = 0;
  double best_score = cosine(q, windows[0]);
  for (std::size_t i = 1; i < windows.size(); ++i) {
    const double s = cosine(q, windows[i]);
    if (s > best_score) {
      best = i;
      best_score = s;
    }
  }
  return rank_choices(problem, windows[best], table);
}

}  // namespace ham
