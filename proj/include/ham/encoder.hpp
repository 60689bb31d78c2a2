#pragma once

// Word embeddings and the Child-Sum (dependency) Tree-LSTM.

#include <cstddef>
#include <fstream>
#include <istream>
#include <random>
#include <sstream>
#include <string>
#include <unordered_map>
#include <vector>

#include "ham/errors.hpp"
#include "ham/numeric.hpp"
#include "ham/treebank.hpp"

namespace ham {

/// Word to row mapping. Row 0 is always the unknown-word row.
class Vocabulary {
 public:
  static constexpr std::size_t kUnk = 0;
  static constexpr const char* kUnkToken = "<unk>";

  Vocabulary() { add(kUnkToken); }

  /// Adds a (lowercased) word if absent and returns its row.
  std::size_t add(const std::string& word) {
    auto key = lowercase(word);
    auto [it, inserted] = index_.emplace(key, words_.size());
    if (inserted) words_.push_back(std::move(key));
    return it->second;
  }

  std::size_t lookup(const std::string& word) const {
    auto it = index_.find(lowercase(word));
    return it == index_.end() ? kUnk : it->second;
  }

  bool contains(const std::string& word) const { return index_.count(lowercase(word)) > 0; }
  std::size_t size() const noexcept { return words_.size(); }
  const std::vector<std::string>& words() const noexcept { return words_; }
  std::size_t unk_index() const noexcept { return kUnk; }

  static Vocabulary from_words(const std::vector<std::string>& words) {
    Vocabulary v;
    for (const auto& w : words) v.add(w);
    return v;
  }

  /// Every token of every sentence in the problems, in first-seen order.
  static Vocabulary from_problems(const std::vector<Problem>& problems) {
    Vocabulary v;
    auto add_all = [&v](const Sentences& s) {
      for (const auto& t : s)
        for (const auto& w : t.tokens()) v.add(w);
    };
    for (const auto& p : problems) {
      add_all(p.story);
      add_all(p.question);
      for (const auto& c : p.choices) add_all(c);
    }
    return v;
  }

 private:
  std::vector<std::string> words_;
  std::unordered_map<std::string, std::size_t> index_;
};

struct EmbeddingTable {
  Vocabulary vocabulary;
  Tensor vectors;  // [V x d_emb]

  std::size_t dim() const noexcept { return vectors.cols(); }
};

/// Row for the lowercased word, or the unknown-word row.
inline Tensor embed(const std::string& word, const EmbeddingTable& table) {
  auto r = table.vectors.row(table.vocabulary.lookup(word));
  return Tensor::vector({r.begin(), r.end()});
}

/// Word vectors in the GloVe text layout: a word then its floats, separated
/// by spaces, one word per line. Every line must match the first line's
/// dimensionality.
struct PretrainedVectors {
  std::vector<std::string> words;
  std::vector<std::vector<double>> vectors;
  std::size_t dim = 0;
};

inline PretrainedVectors read_pretrained_vectors(std::istream& in) {
  PretrainedVectors out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::istringstream ls(line);
    std::string word;
    ls >> word;
    std::vector<double> vec;
    std::string field;
    while (ls >> field) {
      try {
        std::size_t used = 0;
        vec.push_back(std::stod(field, &used));
        if (used != field.size()) throw std::invalid_argument(field);
      } catch (const std::exception&) {
        throw ParseError(line_no, "'" + field + "' is not a number");
      }
    }
    if (out.words.empty()) {
      if (vec.empty()) throw ParseError(line_no, "vector line has no values");
      out.dim = vec.size();
    } else if (vec.size() != out.dim) {
      throw ParseError(line_no, "expected " + std::to_string(out.dim) + " values, found " +
                                    std::to_string(vec.size()));
    }
    out.words.push_back(std::move(word));
    out.vectors.push_back(std::move(vec));
  }
  return out;
}

inline PretrainedVectors load_pretrained_vectors(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open vector file " + path);
  return read_pretrained_vectors(in);
}

inline Tensor uniform_tensor(std::vector<std::size_t> shape, double scale, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> dist(-scale, scale);
  auto t = Tensor::zeros(std::move(shape));
  for (auto& v : t.mutable_values()) v = dist(rng);
  return t;
}

/// Builds a table over `vocabulary`. Rows present in `pretrained` are copied;
/// all others are drawn uniformly from [-scale, scale].
inline EmbeddingTable make_embedding_table(Vocabulary vocabulary, std::size_t dim,
                                           std::mt19937_64& rng, double scale = 0.05,
                                           const PretrainedVectors* pretrained = nullptr) {
  if (pretrained && pretrained->dim != dim) {
    throw DimensionError("pretrained vectors have dimension " + std::to_string(pretrained->dim) +
                         ", model expects " + std::to_string(dim));
  }
  Tensor vectors = uniform_tensor({vocabulary.size(), dim}, scale, rng);
  if (pretrained) {
    for (std::size_t i = 0; i < pretrained->words.size(); ++i) {
      const auto key = lowercase(pretrained->words[i]);
      if (!vocabulary.contains(key)) continue;
      const std::size_t r = vocabulary.lookup(key);
      for (std::size_t c = 0; c < dim; ++c) vectors.at(r, c) = pretrained->vectors[i][c];
    }
  }
  return EmbeddingTable{std::move(vocabulary), std::move(vectors)};
}

/// Gate weights of one Child-Sum Tree-LSTM: input (i), output (o), forget (f)
/// and update (u).
struct TreeLstmParams {
  Tensor W_i, W_o, W_f, W_u;  // [d_h x d_emb]
  Tensor U_i, U_o, U_f, U_u;  // [d_h x d_h]
  Tensor b_i, b_o, b_f, b_u;  // [d_h]

  std::size_t hidden_dim() const noexcept { return b_i.size(); }
  std::size_t input_dim() const noexcept { return W_i.cols(); }

  static TreeLstmParams zeros(std::size_t input_dim, std::size_t hidden_dim) {
    auto w = Tensor::zeros({hidden_dim, input_dim});
    auto u = Tensor::zeros({hidden_dim, hidden_dim});
    auto b = Tensor::zeros({hidden_dim});
    return {w, w, w, w, u, u, u, u, b, b, b, b};
  }

  /// Matrices uniform in [-scale, scale]; biases zero except b_f.
  static TreeLstmParams random(std::size_t input_dim, std::size_t hidden_dim,
                               std::mt19937_64& rng, double scale = 0.05,
                               double forget_bias = 1.0) {
    TreeLstmParams p = zeros(input_dim, hidden_dim);
    for (Tensor* m : {&p.W_i, &p.W_o, &p.W_f, &p.W_u, &p.U_i, &p.U_o, &p.U_f, &p.U_u}) {
      *m = uniform_tensor(m->shape(), scale, rng);
    }
    for (auto& v : p.b_f.mutable_values()) v = forget_bias;
    return p;
  }

  /// (suffix, tensor) pairs in a fixed order, e.g. ("W_i", W_i).
  template <typename Self, typename Fn>
  static void each(Self& self, Fn&& fn) {
    fn("W_i", self.W_i);
    fn("W_o", self.W_o);
    fn("W_f", self.W_f);
    fn("W_u", self.W_u);
    fn("U_i", self.U_i);
    fn("U_o", self.U_o);
    fn("U_f", self.U_f);
    fn("U_u", self.U_u);
    fn("b_i", self.b_i);
    fn("b_o", self.b_o);
    fn("b_f", self.b_f);
    fn("b_u", self.b_u);
  }
};

/// TreeLstmParams bound to a tape.
struct TreeLstmVars {
  Var W_i, W_o, W_f, W_u;
  Var U_i, U_o, U_f, U_u;
  Var b_i, b_o, b_f, b_u;
};

inline TreeLstmVars bind_tree_lstm(Tape& tape, const TreeLstmParams& p, const std::string& prefix) {
  TreeLstmVars v;
  v.W_i = tape.param(prefix + "W_i", p.W_i);
  v.W_o = tape.param(prefix + "W_o", p.W_o);
  v.W_f = tape.param(prefix + "W_f", p.W_f);
  v.W_u = tape.param(prefix + "W_u", p.W_u);
  v.U_i = tape.param(prefix + "U_i", p.U_i);
  v.U_o = tape.param(prefix + "U_o", p.U_o);
  v.U_f = tape.param(prefix + "U_f", p.U_f);
  v.U_u = tape.param(prefix + "U_u", p.U_u);
  v.b_i = tape.param(prefix + "b_i", p.b_i);
  v.b_o = tape.param(prefix + "b_o", p.b_o);
  v.b_f = tape.param(prefix + "b_f", p.b_f);
  v.b_u = tape.param(prefix + "b_u", p.b_u);
  return v;
}

/// Per-node hidden and cell states of one encoded tree, as tape nodes.
struct TreeEncoding {
  std::vector<Var> hidden;
  std::vector<Var> cell;
  std::size_t root = 0;

  Var root_hidden() const { return hidden[root]; }
};

/// Tape-free snapshot of a TreeEncoding.
struct NodeStates {
  std::vector<Tensor> hidden;
  std::vector<Tensor> cell;
  std::size_t root = 0;

  const Tensor& sentence_vector() const { return hidden[root]; }
};

inline NodeStates snapshot(const Tape& tape, const TreeEncoding& enc) {
  NodeStates s;
  s.root = enc.root;
  for (Var h : enc.hidden) s.hidden.push_back(tape.tensor(h));
  for (Var c : enc.cell) s.cell.push_back(tape.tensor(c));
  return s;
}

/// Encodes a tree bottom-up. `embedding` is a [V x d_emb] node and
/// `word_rows[j]` the embedding row of token j.
inline TreeEncoding encode_tree(Tape& tape, const DepTree& tree,
                                std::span<const std::size_t> word_rows, Var embedding,
                                const TreeLstmVars& p) {
  const auto& es = tape.shape(embedding);
  const auto& ws = tape.shape(p.W_i);
  if (es.size() != 2 || ws.size() != 2 || es[1] != ws[1]) {
    throw DimensionError("encode_tree: embedding " + Tensor::format_shape(es) +
                         " does not match W_i " + Tensor::format_shape(ws));
  }
  if (word_rows.size() != tree.size()) {
    throw DimensionError("encode_tree: word rows do not match tree size");
  }

  TreeEncoding enc;
  enc.hidden.resize(tree.size());
  enc.cell.resize(tree.size());
  enc.root = tree.root_index();

  std::vector<Var> terms;
  for (std::size_t j : tree.post_order()) {
    const Var x = tape.row(embedding, word_rows[j]);
    const auto& kids = tree.children(j);

    Var pre_i = tape.affine(p.W_i, x, p.b_i);
    Var pre_o = tape.affine(p.W_o, x, p.b_o);
    Var pre_u = tape.affine(p.W_u, x, p.b_u);
    if (!kids.empty()) {
      terms.clear();
      for (auto k : kids) terms.push_back(enc.hidden[k]);
      const Var h_sum = kids.size() == 1 ? terms[0] : tape.add_n(terms);
      pre_i = tape.add(pre_i, tape.matvec(p.U_i, h_sum));
      pre_o = tape.add(pre_o, tape.matvec(p.U_o, h_sum));
      pre_u = tape.add(pre_u, tape.matvec(p.U_u, h_sum));
    }
    const Var in_gate = tape.sigmoid(pre_i);
    const Var out_gate = tape.sigmoid(pre_o);
    const Var update = tape.tanh(pre_u);

    Var c = tape.mul(in_gate, update);
    if (!kids.empty()) {
      // W_f x_j + b_f is shared by every child's forget gate.
      const Var fx = tape.affine(p.W_f, x, p.b_f);
      terms.clear();
      terms.push_back(c);
      for (auto k : kids) {
        const Var f = tape.sigmoid(tape.add(fx, tape.matvec(p.U_f, enc.hidden[k])));
        terms.push_back(tape.mul(f, enc.cell[k]));
      }
      c = tape.add_n(terms);
    }
    enc.cell[j] = c;
    enc.hidden[j] = tape.mul(out_gate, tape.tanh(c));
  }
  return enc;
}

inline std::vector<std::size_t> word_rows(const DepTree& tree, const Vocabulary& vocab) {
  std::vector<std::size_t> rows;
  rows.reserve(tree.size());
  for (const auto& w : tree.tokens()) rows.push_back(vocab.lookup(w));
  return rows;
}

/// Standalone evaluation of one tree.
inline NodeStates encode_tree(const DepTree& tree, const EmbeddingTable& table,
                              const TreeLstmParams& params) {
  if (table.dim() != params.input_dim()) {
    throw DimensionError("encode_tree: embedding dimension " + std::to_string(table.dim()) +
                         " but Tree-LSTM input dimension " + std::to_string(params.input_dim()));
  }
  Tape tape;
  const Var emb = tape.param("embedding", table.vectors);
  const auto vars = bind_tree_lstm(tape, params, "");
  const auto rows = word_rows(tree, table.vocabulary);
  return snapshot(tape, encode_tree(tape, tree, rows, emb, vars));
}

/// Sum of root hidden states over a sentence sequence (question or choice
/// vector).
inline Var encode_sentence_set(Tape& tape, std::span<const TreeEncoding> encodings) {
  if (encodings.empty()) throw DomainError("encode_sentence_set: no sentences");
  if (encodings.size() == 1) return encodings[0].root_hidden();
  std::vector<Var> roots;
  for (const auto& e : encodings) roots.push_back(e.root_hidden());
  return tape.add_n(roots);
}

inline Tensor encode_sentence_set(const Sentences& sentences, const EmbeddingTable& table,
                                  const TreeLstmParams& params) {
  if (sentences.empty()) throw DomainError("encode_sentence_set: no sentences");
  Tape tape;
  const Var emb = tape.param("embedding", table.vectors);
  const auto vars = bind_tree_lstm(tape, params, "");
  std::vector<TreeEncoding> encs;
  for (const auto& s : sentences) {
    encs.push_back(encode_tree(tape, s, word_rows(s, table.vocabulary), emb, vars));
  }
  return tape.tensor(encode_sentence_set(tape, encs));
}

}  // namespace ham
