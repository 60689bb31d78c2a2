#pragma once

// Checkpoint container: a JSON document holding the model configuration,
// vocabulary and every named tensor. Doubles are written in shortest
// round-trip form, so save/load is bit-exact.
//
//   {"format":"ham-checkpoint","version":1,"kind":"ham","seed":7,
//    "config":{...},"vocabulary":["<unk>",...],
//    "tensors":[{"name":"embedding","shape":[V,d],"values":[...]},...]}
//
// kind "oracle-stub" and "chance-stub" carry no tensors; they load as
// reference predictors that answer perfectly or uniformly at random.

#include <cstdint>
#include <fstream>
#include <functional>
#include <optional>
#include <random>
#include <sstream>
#include <string>

#include <nlohmann/json.hpp>

#include "ham/answer.hpp"
#include "ham/errors.hpp"
#include "ham/model.hpp"
#include "ham/treebank.hpp"

namespace ham {

inline constexpr const char* kCheckpointFormat = "ham-checkpoint";
inline constexpr int kCheckpointVersion = 1;

inline nlohmann::ordered_json checkpoint_json(const HamModel& model, std::uint64_t seed) {
  nlohmann::ordered_json j;
  j["format"] = kCheckpointFormat;
  j["version"] = kCheckpointVersion;
  j["kind"] = "ham";
  j["seed"] = seed;
  j["config"] = model.config().to_json();
  j["vocabulary"] = model.vocabulary().words();
  auto tensors = nlohmann::ordered_json::array();
  for (const auto& [name, t] : model.params().named()) {
    nlohmann::ordered_json e;
    e["name"] = name;
    e["shape"] = t->shape();
    e["values"] = std::vector<double>(t->values().begin(), t->values().end());
    tensors.push_back(std::move(e));
  }
  j["tensors"] = std::move(tensors);
  return j;
}

inline HamModel model_from_checkpoint(const nlohmann::json& j) {
  auto config = ModelConfig::from_json(j.at("config"));
  config.validate();
  const auto words = j.at("vocabulary").get<std::vector<std::string>>();
  if (words.empty() || words[0] != Vocabulary::kUnkToken) {
    throw DomainError("checkpoint: vocabulary must start with " + std::string(Vocabulary::kUnkToken));
  }
  Vocabulary vocab;
  for (std::size_t i = 1; i < words.size(); ++i) {
    if (vocab.add(words[i]) != i) throw DomainError("checkpoint: duplicate vocabulary entry " + words[i]);
  }
  // Build a correctly shaped model, then overwrite every tensor by name.
  HamModel model = HamModel::create(config, vocab, 0);
  std::map<std::string, Tensor> stored;
  for (const auto& e : j.at("tensors")) {
    stored.emplace(e.at("name").get<std::string>(),
                   Tensor(e.at("shape").get<std::vector<std::size_t>>(),
                          e.at("values").get<std::vector<double>>()));
  }
  for (auto& [name, t] : model.params().named()) {
    auto it = stored.find(name);
    if (it == stored.end()) throw DomainError("checkpoint: missing tensor " + name);
    if (it->second.shape() != t->shape()) {
      throw DimensionError("checkpoint: tensor " + name + " has shape " +
                           it->second.shape_string() + ", expected " + t->shape_string());
    }
    *t = std::move(it->second);
    stored.erase(it);
  }
  if (!stored.empty()) throw DomainError("checkpoint: unexpected tensor " + stored.begin()->first);
  return model;
}

inline void save_checkpoint(const std::string& path, const HamModel& model, std::uint64_t seed) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write checkpoint " + path);
  out << checkpoint_json(model, seed).dump() << '\n';
  if (!out) throw IoError("failed writing checkpoint " + path);
}

/// A loaded checkpoint: either a model or one of the reference stubs.
struct Checkpoint {
  std::string kind = "ham";
  std::uint64_t seed = 0;
  std::optional<HamModel> model;

  Predictor predictor() const {
    if (kind == "ham") return model->predictor();
    if (kind == "oracle-stub") {
      return [](const Problem& p) {
        Prediction pred;
        pred.p_hat = target_distribution(p.num_choices(), p.correct);
        pred.selected = p.correct;
        return pred;
      };
    }
    // chance-stub: uniform random choice set, seeded by (seed, problem id).
    const std::uint64_t s = seed;
    return [s](const Problem& p) {
      std::seed_seq seq{s, static_cast<std::uint64_t>(std::hash<std::string>{}(p.id))};
      std::mt19937_64 rng(seq);
      std::vector<std::size_t> idx(p.num_choices());
      std::iota(idx.begin(), idx.end(), std::size_t{0});
      std::shuffle(idx.begin(), idx.end(), rng);
      idx.resize(p.num_answers());
      std::sort(idx.begin(), idx.end());
      Prediction pred;
      pred.p_hat.assign(p.num_choices(), 1.0 / static_cast<double>(p.num_choices()));
      pred.selected = std::move(idx);
      return pred;
    };
  }
};

inline Checkpoint checkpoint_from_json(const nlohmann::json& j) {
  if (j.value("format", "") != kCheckpointFormat) throw DomainError("not a ham checkpoint");
  if (j.value("version", 0) != kCheckpointVersion) {
    throw DomainError("unsupported checkpoint version " + std::to_string(j.value("version", 0)));
  }
  Checkpoint c;
  c.kind = j.value("kind", "ham");
  c.seed = j.value("seed", std::uint64_t{0});
  if (c.kind == "ham") {
    c.model.emplace(model_from_checkpoint(j));
  } else if (c.kind != "oracle-stub" && c.kind != "chance-stub") {
    throw DomainError("unknown checkpoint kind '" + c.kind + "'");
  }
  return c;
}

inline Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open checkpoint " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(ss.str());
  } catch (const nlohmann::json::exception& e) {
    throw DomainError("checkpoint " + path + ": " + e.what());
  }
  try {
    return checkpoint_from_json(j);
  } catch (const nlohmann::json::exception& e) {
    throw DomainError("checkpoint " + path + ": " + e.what());
  }
}

}  // namespace ham
