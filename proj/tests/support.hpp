#pragma once

// Shared helpers for the test suite: seeded random tensors, a central
// finite-difference checker for arbitrary tape programs, and small problem
// builders.

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <map>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "ham/ham.hpp"

namespace test {

inline ham::Tensor random_tensor(std::vector<std::size_t> shape, std::mt19937_64& rng,
                                 double scale = 1.0) {
  return ham::uniform_tensor(std::move(shape), scale, rng);
}

inline std::vector<double> random_vector(std::size_t n, std::mt19937_64& rng, double scale = 1.0) {
  std::uniform_real_distribution<double> d(-scale, scale);
  std::vector<double> v(n);
  for (auto& x : v) x = d(rng);
  return v;
}

/// Largest elementwise |a - b|; infinite if the sizes differ.
inline double max_abs_diff(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) return std::numeric_limits<double>::infinity();
  double worst = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) worst = std::max(worst, std::abs(a[i] - b[i]));
  return worst;
}

/// A tape program: builds a scalar loss from named parameter nodes.
using Program = std::function<ham::Var(ham::Tape&, const std::map<std::string, ham::Var>&)>;

inline double run_program(const Program& f, const std::map<std::string, ham::Tensor>& params) {
  ham::Tape tape;
  std::map<std::string, ham::Var> vars;
  for (const auto& [name, t] : params) vars.emplace(name, tape.param(name, t));
  return tape.value(f(tape, vars))[0];
}

/// Largest |a - n| / max(|a|, |n|, floor) over every parameter entry, with
/// n from central differences of the given step.
inline double max_fd_error(const Program& f, std::map<std::string, ham::Tensor> params,
                           double step = 1e-5) {
  ham::Gradients analytic;
  {
    ham::Tape tape;
    std::map<std::string, ham::Var> vars;
    for (const auto& [name, t] : params) vars.emplace(name, tape.param(name, t));
    analytic = tape.backward(f(tape, vars));
  }
  double worst = 0.0;
  for (auto& [name, t] : params) {
    auto v = t.mutable_values();
    for (std::size_t i = 0; i < v.size(); ++i) {
      const double saved = v[i];
      v[i] = saved + step;
      const double up = run_program(f, params);
      v[i] = saved - step;
      const double down = run_program(f, params);
      v[i] = saved;
      const double numeric = (up - down) / (2.0 * step);
      worst = std::max(worst, ham::relative_error(analytic.at(name)[i], numeric));
    }
  }
  return worst;
}

/// Head-initial chain: token 1 is the root, token i+1 depends on token i.
inline ham::DepTree head_initial_chain(std::vector<std::string> tokens) {
  std::vector<int> heads(tokens.size(), 0);
  for (std::size_t i = 1; i < tokens.size(); ++i) heads[i] = static_cast<int>(i);
  return ham::DepTree::validate(std::move(tokens), std::move(heads));
}

/// Head-final chain: the last token is the root, token i depends on i+1.
inline ham::DepTree head_final_chain(std::vector<std::string> tokens) {
  std::vector<int> heads(tokens.size(), 0);
  for (std::size_t i = 0; i + 1 < tokens.size(); ++i) heads[i] = static_cast<int>(i + 2);
  return ham::DepTree::validate(std::move(tokens), std::move(heads));
}

inline ham::DepTree sentence(std::vector<std::string> tokens) {
  return head_initial_chain(std::move(tokens));
}

/// Single-sentence-per-field problem from plain token lists.
inline ham::Problem make_problem(std::vector<std::vector<std::string>> story,
                                 std::vector<std::string> question,
                                 std::vector<std::vector<std::string>> choices,
                                 std::vector<std::size_t> correct, std::string id = "t") {
  ham::Problem p;
  p.id = std::move(id);
  for (auto& s : story) p.story.push_back(sentence(std::move(s)));
  p.question.push_back(sentence(std::move(question)));
  for (auto& c : choices) p.choices.push_back({sentence(std::move(c))});
  p.correct = std::move(correct);
  p.validate();
  return p;
}

/// Uniformly random labelled tree over n tokens named w0..w{n-1}.
inline ham::DepTree random_tree(std::size_t n, std::mt19937_64& rng, std::size_t vocab = 6) {
  std::vector<std::string> tokens;
  std::uniform_int_distribution<std::size_t> word(0, vocab - 1);
  for (std::size_t i = 0; i < n; ++i) tokens.push_back("w" + std::to_string(word(rng)));
  auto heads = ham::make_heads(n, ham::TreeShape::random, rng);
  return ham::DepTree::validate(std::move(tokens), std::move(heads));
}

// A textbook LSTM written out with plain loops: gates from x_t and h_{t-1},
// c_t = i*u + f*c_{t-1}, h_t = o*tanh(c_t). Returns (h_t, c_t) for every step.
struct LstmStep {
  std::vector<double> h, c;
};

inline std::vector<LstmStep> sequential_lstm(const std::vector<std::vector<double>>& xs,
                                             const ham::TreeLstmParams& p) {
  const std::size_t dh = p.hidden_dim(), de = p.input_dim();
  auto gate = [&](const ham::Tensor& W, const ham::Tensor& U, const ham::Tensor& b, const std::vector<double>& x,
                  const std::vector<double>& h, std::size_t r) {
    double z = b[r];
    for (std::size_t k = 0; k < de; ++k) z += W.at(r, k) * x[k];
    for (std::size_t k = 0; k < dh; ++k) z += U.at(r, k) * h[k];
    return z;
  };
  auto sig = [](double z) { return 1.0 / (1.0 + std::exp(-z)); };
  std::vector<double> h(dh, 0.0), c(dh, 0.0);
  std::vector<LstmStep> out;
  for (const auto& x : xs) {
    std::vector<double> hn(dh), cn(dh);
    for (std::size_t r = 0; r < dh; ++r) {
      const double i = sig(gate(p.W_i, p.U_i, p.b_i, x, h, r));
      const double o = sig(gate(p.W_o, p.U_o, p.b_o, x, h, r));
      const double f = sig(gate(p.W_f, p.U_f, p.b_f, x, h, r));
      const double u = std::tanh(gate(p.W_u, p.U_u, p.b_u, x, h, r));
      cn[r] = i * u + f * c[r];
      hn[r] = o * std::tanh(cn[r]);
    }
    h = hn;
    c = cn;
    out.push_back({h, c});
  }
  return out;
}

}  // namespace test
