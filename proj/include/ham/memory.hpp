#pragma once

// Story memory and multi-hop cosine/softmax attention.

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstddef>
#include <numeric>
#include <random>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "ham/encoder.hpp"
#include "ham/errors.hpp"
#include "ham/numeric.hpp"
#include "ham/treebank.hpp"

namespace ham {

enum class AttentionLevel { phrase, sentence };

inline const char* to_string(AttentionLevel level) {
  return level == AttentionLevel::phrase ? "phrase" : "sentence";
}

inline AttentionLevel parse_attention_level(const std::string& s) {
  if (s == "phrase") return AttentionLevel::phrase;
  if (s == "sentence") return AttentionLevel::sentence;
  throw DomainError("unknown attention level '" + s + "' (expected phrase or sentence)");
}

/// Memory (W_m), evidence (W_c) and query (W_q) embeddings.
struct MemoryParams {
  Tensor W_m, W_c, W_q;  // [d_mem x d_h]

  static MemoryParams random(std::size_t memory_dim, std::size_t hidden_dim,
                             std::mt19937_64& rng, double scale = 0.05) {
    MemoryParams p;
    p.W_m = uniform_tensor({memory_dim, hidden_dim}, scale, rng);
    p.W_c = uniform_tensor({memory_dim, hidden_dim}, scale, rng);
    p.W_q = uniform_tensor({memory_dim, hidden_dim}, scale, rng);
    return p;
  }

  template <typename Self, typename Fn>
  static void each(Self& self, Fn&& fn) {
    fn("W_m", self.W_m);
    fn("W_c", self.W_c);
    fn("W_q", self.W_q);
  }
};

struct MemoryVars {
  Var W_m, W_c, W_q;
};

inline MemoryVars bind_memory(Tape& tape, const MemoryParams& p, const std::string& prefix) {
  return {tape.param(prefix + "W_m", p.W_m), tape.param(prefix + "W_c", p.W_c),
          tape.param(prefix + "W_q", p.W_q)};
}

/// Where a memory entry came from: the story sentence, the tree node whose
/// hidden state it is, and the token positions of that node's subtree.
struct Provenance {
  std::size_t sentence = 0;
  std::size_t node = 0;
  bool is_root = false;
  std::vector<std::size_t> positions;
  std::vector<std::string> span;
};

struct MemoryEntry {
  Var vector;
  Provenance where;
};

struct MemorySet {
  AttentionLevel level = AttentionLevel::sentence;
  std::vector<MemoryEntry> entries;

  std::size_t size() const noexcept { return entries.size(); }
};

/// Collects the memory vectors o_t, sentence-major then token order. Phrase
/// level takes every node; sentence level takes only roots.
inline MemorySet build_memory(const Sentences& story, std::span<const TreeEncoding> states,
                              AttentionLevel level) {
  if (story.empty()) throw DomainError("build_memory: empty story");
  if (states.size() != story.size()) {
    throw DimensionError("build_memory: " + std::to_string(story.size()) + " sentences but " +
                         std::to_string(states.size()) + " encodings");
  }
  MemorySet mem;
  mem.level = level;
  auto add = [&](std::size_t s, std::size_t node) {
    const auto& tree = story[s];
    Provenance p;
    p.sentence = s;
    p.node = node;
    p.is_root = node == tree.root_index();
    p.positions = tree.subtree(node);
    for (auto pos : p.positions) p.span.push_back(tree.surface()[pos]);
    mem.entries.push_back({states[s].hidden[node], std::move(p)});
  };
  for (std::size_t s = 0; s < story.size(); ++s) {
    if (level == AttentionLevel::sentence) {
      add(s, story[s].root_index());
    } else {
      for (std::size_t j = 0; j < story[s].size(); ++j) add(s, j);
    }
  }
  return mem;
}

struct Attention {
  Var scores;   // eta
  Var weights;  // alpha
  Var story;    // s
};

namespace detail {

inline std::atomic<std::size_t>& attention_check_counter() {
  static std::atomic<std::size_t> n{0};
  return n;
}

// Every attention distribution is checked as it is produced.
inline void check_attention(std::span<const double> alpha) {
  double sum = 0.0;
  for (double a : alpha) {
    if (!(a > 0.0)) throw NumericError("attention weight is not strictly positive");
    sum += a;
  }
  if (std::abs(sum - 1.0) > kDistributionTolerance) {
    throw NumericError("attention weights sum to " + std::to_string(sum));
  }
  attention_check_counter().fetch_add(1, std::memory_order_relaxed);
}

inline Attention attend_projected(Tape& tape, Var query, std::span<const Var> memory,
                                  std::span<const Var> evidence) {
  std::vector<Var> eta;
  eta.reserve(memory.size());
  for (Var m : memory) eta.push_back(tape.cosine(query, m));
  const Var scores = tape.stack(eta);
  const Var alpha = tape.softmax(scores);
  check_attention(tape.value(alpha));
  return {scores, alpha, tape.weighted_sum(alpha, evidence)};
}

struct Projections {
  std::vector<Var> memory;
  std::vector<Var> evidence;
};

inline Projections project(Tape& tape, const MemorySet& mem, const MemoryVars& p) {
  Projections out;
  for (const auto& e : mem.entries) {
    out.memory.push_back(tape.matvec(p.W_m, e.vector));
    out.evidence.push_back(tape.matvec(p.W_c, e.vector));
  }
  return out;
}

}  // namespace detail

/// Number of attention distributions produced (and verified to sum to 1)
/// in this process.
inline std::size_t attention_checks() {
  return detail::attention_check_counter().load(std::memory_order_relaxed);
}

/// One attention step: m_t = W_m o_t, c_t = W_c o_t, eta_t = cos(q, m_t),
/// alpha = softmax(eta), s = sum_t alpha_t c_t.
inline Attention attend(Tape& tape, Var query, const MemorySet& mem, const MemoryVars& p) {
  if (mem.entries.empty()) throw DomainError("attend: empty memory");
  auto proj = detail::project(tape, mem, p);
  if (tape.shape(query) != tape.shape(proj.memory[0])) {
    throw DimensionError("attend: query " + Tensor::format_shape(tape.shape(query)) +
                         " vs memory vectors " + Tensor::format_shape(tape.shape(proj.memory[0])));
  }
  return detail::attend_projected(tape, query, proj.memory, proj.evidence);
}

struct HopRecord {
  Var query;
  Attention attention;
};

struct HopResult {
  Var output;  // q_n
  std::vector<HopRecord> hops;
};

/// q_0 = W_q V_Q, then q_{i+1} = q_i + s_i for `hops` rounds. One entry in
/// `params` shares the embeddings across hops; otherwise hop i uses
/// params[i] (and q_0 uses params[0].W_q).
inline HopResult run_hops(Tape& tape, Var question, const MemorySet& mem,
                          std::span<const MemoryVars> params, int hops) {
  if (hops < 1) throw DomainError("run_hops: hop count must be at least 1");
  if (params.empty()) throw DomainError("run_hops: no memory parameters");
  if (params.size() != 1 && params.size() < static_cast<std::size_t>(hops)) {
    throw DomainError("run_hops: fewer per-hop parameter sets than hops");
  }
  if (mem.entries.empty()) throw DomainError("run_hops: empty memory");

  HopResult out;
  Var q = tape.matvec(params[0].W_q, question);
  detail::Projections shared;
  if (params.size() == 1) shared = detail::project(tape, mem, params[0]);
  for (int i = 0; i < hops; ++i) {
    detail::Projections own;
    if (params.size() != 1) own = detail::project(tape, mem, params[static_cast<std::size_t>(i)]);
    const auto& proj = params.size() == 1 ? shared : own;
    if (tape.shape(q) != tape.shape(proj.memory[0])) {
      throw DimensionError("run_hops: query and memory embeddings differ in size");
    }
    auto att = detail::attend_projected(tape, q, proj.memory, proj.evidence);
    out.hops.push_back({q, att});
    q = tape.add(q, att.story);
  }
  out.output = q;
  return out;
}

struct HopTrace {
  Tensor query;
  Tensor scores;
  Tensor weights;
  Tensor story;
};

/// Values of one multi-hop pass, with memory provenance for inspection.
struct AttentionTrace {
  AttentionLevel level = AttentionLevel::sentence;
  std::vector<Provenance> memory;
  std::vector<HopTrace> hops;
};

inline AttentionTrace make_trace(const Tape& tape, const MemorySet& mem, const HopResult& r) {
  AttentionTrace t;
  t.level = mem.level;
  for (const auto& e : mem.entries) t.memory.push_back(e.where);
  for (const auto& h : r.hops) {
    t.hops.push_back({tape.tensor(h.query), tape.tensor(h.attention.scores),
                      tape.tensor(h.attention.weights), tape.tensor(h.attention.story)});
  }
  return t;
}

struct AttentionHit {
  std::size_t index = 0;
  double weight = 0.0;
  Provenance where;
};

/// The k largest weights of every hop, descending; ties go to the lower
/// memory index.
inline std::vector<std::vector<AttentionHit>> top_k_attention(const AttentionTrace& trace,
                                                              std::size_t k) {
  if (k < 1) throw DomainError("top_k_attention: k must be at least 1");
  std::vector<std::vector<AttentionHit>> out;
  for (const auto& hop : trace.hops) {
    std::vector<std::size_t> order(hop.weights.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
      return hop.weights[a] > hop.weights[b];
    });
    order.resize(std::min(k, order.size()));
    std::vector<AttentionHit> hits;
    for (auto idx : order) hits.push_back({idx, hop.weights[idx], trace.memory.at(idx)});
    out.push_back(std::move(hits));
  }
  return out;
}

inline nlohmann::ordered_json attention_to_json(const AttentionTrace& trace, std::size_t k) {
  nlohmann::ordered_json j;
  j["level"] = to_string(trace.level);
  auto hops = nlohmann::ordered_json::array();
  const auto top = top_k_attention(trace, k);
  for (std::size_t h = 0; h < top.size(); ++h) {
    nlohmann::ordered_json hop;
    hop["hop"] = h;
    auto entries = nlohmann::ordered_json::array();
    for (const auto& hit : top[h]) {
      nlohmann::ordered_json e;
      e["memory_index"] = hit.index;
      e["sentence"] = hit.where.sentence;
      if (hit.where.is_root && trace.level == AttentionLevel::sentence) {
        e["node"] = "ROOT";
      } else {
        e["node"] = hit.where.node;
      }
      e["span"] = hit.where.span;
      e["weight"] = hit.weight;
      entries.push_back(std::move(e));
    }
    hop["entries"] = std::move(entries);
    hops.push_back(std::move(hop));
  }
  j["hops"] = std::move(hops);
  return j;
}

}  // namespace ham
