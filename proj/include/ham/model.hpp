#pragma once

// The full hierarchical attention model: Tree-LSTM story/question/choice
// encoders, the multi-hop memory module and the answer module, plus the
// attention-free variant that sums story and question sentence vectors.

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "ham/answer.hpp"
#include "ham/encoder.hpp"
#include "ham/errors.hpp"
#include "ham/memory.hpp"
#include "ham/numeric.hpp"
#include "ham/treebank.hpp"

namespace ham {

struct ModelConfig {
  std::size_t embedding_dim = 75;
  std::size_t hidden_dim = 75;
  std::size_t memory_dim = 75;
  int hops = 2;
  AttentionLevel level = AttentionLevel::sentence;
  // false gives the attention-free baseline: choices are scored against the
  // sum of story and question sentence vectors.
  bool use_memory = true;
  // One Tree-LSTM for story, question and choices.
  bool tie_encoders = true;
  // Separate W_m, W_c, W_q per hop instead of one shared set.
  bool per_hop_memory = false;
  bool train_embeddings = true;
  double init_scale = 0.05;
  double forget_bias = 1.0;

  void validate() const {
    if (embedding_dim < 1 || hidden_dim < 1 || memory_dim < 1) {
      throw DomainError("model dimensions must be at least 1");
    }
    if (use_memory) {
      if (hops < 1 || hops > 3) throw DomainError("hops must be in [1, 3]");
      // q_n is compared directly with choice vectors.
      if (memory_dim != hidden_dim) {
        throw DimensionError("memory dimension " + std::to_string(memory_dim) +
                             " must equal hidden dimension " + std::to_string(hidden_dim));
      }
    }
  }

  nlohmann::ordered_json to_json() const {
    nlohmann::ordered_json j;
    j["embedding_dim"] = embedding_dim;
    j["hidden_dim"] = hidden_dim;
    j["memory_dim"] = memory_dim;
    j["hops"] = hops;
    j["level"] = to_string(level);
    j["use_memory"] = use_memory;
    j["tie_encoders"] = tie_encoders;
    j["per_hop_memory"] = per_hop_memory;
    j["train_embeddings"] = train_embeddings;
    j["init_scale"] = init_scale;
    j["forget_bias"] = forget_bias;
    return j;
  }

  static ModelConfig from_json(const nlohmann::json& j) {
    ModelConfig c;
    c.embedding_dim = j.at("embedding_dim").get<std::size_t>();
    c.hidden_dim = j.at("hidden_dim").get<std::size_t>();
    c.memory_dim = j.at("memory_dim").get<std::size_t>();
    c.hops = j.at("hops").get<int>();
    c.level = parse_attention_level(j.at("level").get<std::string>());
    c.use_memory = j.at("use_memory").get<bool>();
    c.tie_encoders = j.at("tie_encoders").get<bool>();
    c.per_hop_memory = j.at("per_hop_memory").get<bool>();
    c.train_embeddings = j.at("train_embeddings").get<bool>();
    c.init_scale = j.at("init_scale").get<double>();
    c.forget_bias = j.at("forget_bias").get<double>();
    return c;
  }
};

/// Every trainable tensor of the model.
struct ModelParams {
  Tensor embedding;                      // [V x d_emb]
  std::vector<TreeLstmParams> encoders;  // 1 when tied, else story, question, choice
  std::vector<MemoryParams> memory;      // 1 when shared, else one per hop

  static std::string encoder_prefix(std::size_t count, std::size_t i) {
    static const char* roles[] = {"story", "question", "choice"};
    return count == 1 ? std::string("encoder.") : std::string("encoder.") + roles[i] + ".";
  }

  static std::string memory_prefix(std::size_t count, std::size_t i) {
    return count == 1 ? std::string("memory.") : "memory.hop" + std::to_string(i + 1) + ".";
  }

  /// Stable (name, tensor) listing used for gradients, optimizer state and
  /// checkpoints.
  std::vector<std::pair<std::string, Tensor*>> named() {
    std::vector<std::pair<std::string, Tensor*>> out;
    out.emplace_back("embedding", &embedding);
    for (std::size_t i = 0; i < encoders.size(); ++i) {
      const auto prefix = encoder_prefix(encoders.size(), i);
      TreeLstmParams::each(encoders[i],
                           [&](const char* n, Tensor& t) { out.emplace_back(prefix + n, &t); });
    }
    for (std::size_t i = 0; i < memory.size(); ++i) {
      const auto prefix = memory_prefix(memory.size(), i);
      MemoryParams::each(memory[i],
                         [&](const char* n, Tensor& t) { out.emplace_back(prefix + n, &t); });
    }
    return out;
  }

  std::vector<std::pair<std::string, const Tensor*>> named() const {
    std::vector<std::pair<std::string, const Tensor*>> out;
    for (auto& [n, t] : const_cast<ModelParams*>(this)->named()) out.emplace_back(n, t);
    return out;
  }
};

struct Prediction {
  std::vector<double> p_hat;
  std::vector<std::size_t> selected;
};

using Predictor = std::function<Prediction(const Problem&)>;

class HamModel {
 public:
  HamModel(ModelConfig config, Vocabulary vocab, ModelParams params)
      : config_(std::move(config)), vocab_(std::move(vocab)), params_(std::move(params)) {
    config_.validate();
    check_shapes();
  }

  /// Fresh model: matrices uniform in [-init_scale, init_scale], b_f set to
  /// forget_bias, other biases zero. Pretrained rows override the embedding
  /// initialization where available.
  static HamModel create(ModelConfig config, Vocabulary vocab, std::uint64_t seed,
                         const PretrainedVectors* pretrained = nullptr) {
    config.validate();
    std::mt19937_64 rng(seed);
    ModelParams p;
    const double s = config.init_scale;
    p.embedding =
        make_embedding_table(vocab, config.embedding_dim, rng, s, pretrained).vectors;
    const std::size_t n_enc = config.tie_encoders ? 1 : 3;
    for (std::size_t i = 0; i < n_enc; ++i) {
      p.encoders.push_back(TreeLstmParams::random(config.embedding_dim, config.hidden_dim, rng,
                                                  s, config.forget_bias));
    }
    if (config.use_memory) {
      const std::size_t n_mem = config.per_hop_memory ? static_cast<std::size_t>(config.hops) : 1;
      for (std::size_t i = 0; i < n_mem; ++i) {
        p.memory.push_back(MemoryParams::random(config.memory_dim, config.hidden_dim, rng, s));
      }
    }
    return HamModel(std::move(config), std::move(vocab), std::move(p));
  }

  const ModelConfig& config() const noexcept { return config_; }
  const Vocabulary& vocabulary() const noexcept { return vocab_; }
  const ModelParams& params() const noexcept { return params_; }
  ModelParams& params() noexcept { return params_; }

  struct Forward {
    ChoiceScores answer;
    MemorySet memory;
    std::optional<HopResult> hops;
    Var loss;  // invalid unless a loss was requested
  };

  /// Records one problem on the tape. With `with_loss`, also adds the KL
  /// loss against the problem's target distribution.
  Forward forward(Tape& tape, const Problem& problem, bool with_loss) const {
    const Var emb = tape.param("embedding", params_.embedding);
    std::vector<TreeLstmVars> enc;
    for (std::size_t i = 0; i < params_.encoders.size(); ++i) {
      enc.push_back(bind_tree_lstm(tape, params_.encoders[i],
                         ModelParams::encoder_prefix(params_.encoders.size(), i)));
    }
    const TreeLstmVars& story_enc = enc[0];
    const TreeLstmVars& question_enc = enc.size() == 1 ? enc[0] : enc[1];
    const TreeLstmVars& choice_enc = enc.size() == 1 ? enc[0] : enc[2];

    auto encode_all = [&](const Sentences& sentences, const TreeLstmVars& p) {
      std::vector<TreeEncoding> out;
      out.reserve(sentences.size());
      for (const auto& s : sentences) {
        out.push_back(encode_tree(tape, s, word_rows(s, vocab_), emb, p));
      }
      return out;
    };

    Forward f;
    const auto story = encode_all(problem.story, story_enc);
    const auto question = encode_all(problem.question, question_enc);
    const Var v_q = encode_sentence_set(tape, question);

    Var query;
    if (config_.use_memory) {
      std::vector<MemoryVars> mem;
      for (std::size_t i = 0; i < params_.memory.size(); ++i) {
        mem.push_back(bind_memory(tape, params_.memory[i],
                           ModelParams::memory_prefix(params_.memory.size(), i)));
      }
      f.memory = build_memory(problem.story, story, config_.level);
      f.hops = run_hops(tape, v_q, f.memory, mem, config_.hops);
      query = f.hops->output;
    } else {
      std::vector<Var> roots;
      for (const auto& e : story) roots.push_back(e.root_hidden());
      for (const auto& e : question) roots.push_back(e.root_hidden());
      query = tape.add_n(roots);
    }

    std::vector<Var> choices;
    for (const auto& c : problem.choices) {
      const auto enc_c = encode_all(c, choice_enc);
      choices.push_back(encode_sentence_set(tape, enc_c));
    }
    f.answer = score_choices(tape, query, choices);
    if (with_loss) {
      const auto p = target_distribution(problem.num_choices(), problem.correct);
      f.loss = tape.kl_divergence(p, f.answer.p_hat);
    }
    return f;
  }

  double loss(const Problem& problem) const {
    Tape tape;
    auto f = forward(tape, problem, true);
    return tape.value(f.loss)[0];
  }

  /// Picks as many choices as the problem has correct answers.
  Prediction predict(const Problem& problem) const {
    Tape tape;
    auto f = forward(tape, problem, false);
    Prediction p;
    auto v = tape.value(f.answer.p_hat);
    p.p_hat.assign(v.begin(), v.end());
    p.selected = select(p.p_hat, problem.num_answers());
    return p;
  }

  AttentionTrace attention(const Problem& problem) const {
    if (!config_.use_memory) throw DomainError("attention: model has no memory module");
    Tape tape;
    auto f = forward(tape, problem, false);
    return make_trace(tape, f.memory, *f.hops);
  }

  Predictor predictor() const {
    return [this](const Problem& p) { return predict(p); };
  }

 private:
  void check_shapes() const {
    auto expect = [](const Tensor& t, std::vector<std::size_t> shape, const std::string& name) {
      if (t.shape() != shape) {
        throw DimensionError(name + " has shape " + t.shape_string() + ", expected " +
                             Tensor::format_shape(shape));
      }
    };
    const auto e = config_.embedding_dim, h = config_.hidden_dim, m = config_.memory_dim;
    expect(params_.embedding, {vocab_.size(), e}, "embedding");
    const std::size_t n_enc = config_.tie_encoders ? 1 : 3;
    if (params_.encoders.size() != n_enc) throw DimensionError("wrong number of encoders");
    for (const auto& p : params_.encoders) {
      for (const Tensor* w : {&p.W_i, &p.W_o, &p.W_f, &p.W_u}) expect(*w, {h, e}, "encoder W");
      for (const Tensor* u : {&p.U_i, &p.U_o, &p.U_f, &p.U_u}) expect(*u, {h, h}, "encoder U");
      for (const Tensor* b : {&p.b_i, &p.b_o, &p.b_f, &p.b_u}) expect(*b, {h}, "encoder b");
    }
    const std::size_t n_mem =
        !config_.use_memory ? 0 : (config_.per_hop_memory ? static_cast<std::size_t>(config_.hops) : 1);
    if (params_.memory.size() != n_mem) throw DimensionError("wrong number of memory parameter sets");
    for (const auto& p : params_.memory) {
      for (const Tensor* w : {&p.W_m, &p.W_c, &p.W_q}) expect(*w, {m, h}, "memory W");
    }
  }

  ModelConfig config_;
  Vocabulary vocab_;
  ModelParams params_;
};

}  // namespace ham
