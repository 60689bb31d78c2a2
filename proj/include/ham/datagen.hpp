#pragma once

// Seeded synthetic comprehension problems with known answers.
//
// locate:  one story sentence "A E" pairs the question's entity E with its
//          attribute A; distractor sentences pair other entities with the
//          attributes offered as wrong choices. The question is "what E".
// two-hop: "E L" (E is at L) and "L A" sit in different sentences; the
//          question names E and the answer is A, so no single sentence
//          decides it.
//
// Sentences carry right-branching chain trees (the first token is the root and
// every other token depends on its left neighbour) or, optionally, uniformly
// random trees.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <cstdio>
#include <numeric>
#include <random>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "ham/errors.hpp"
#include "ham/treebank.hpp"

namespace ham {

enum class TaskKind { locate, two_hop };
enum class TreeShape { chain, random };

inline const char* to_string(TaskKind t) { return t == TaskKind::locate ? "locate" : "two-hop"; }

inline TaskKind parse_task_kind(const std::string& s) {
  if (s == "locate") return TaskKind::locate;
  if (s == "two-hop") return TaskKind::two_hop;
  throw DomainError("unknown task '" + s + "' (expected locate or two-hop)");
}

inline const char* to_string(TreeShape t) { return t == TreeShape::chain ? "chain" : "random"; }

inline TreeShape parse_tree_shape(const std::string& s) {
  if (s == "chain") return TreeShape::chain;
  if (s == "random") return TreeShape::random;
  throw DomainError("unknown tree shape '" + s + "' (expected chain or random)");
}

struct SynthConfig {
  std::uint64_t seed = 1;
  std::size_t problems = 200;
  TaskKind task = TaskKind::locate;
  // Entity, link and attribute symbols together (function words excluded).
  std::size_t vocabulary_size = 12;
  // 0 picks the smallest story that holds every fact sentence.
  std::size_t story_length = 0;
  std::size_t min_sentence_length = 2;
  std::size_t max_sentence_length = 2;
  std::size_t choices = 4;
  std::size_t answers = 1;
  // Other entities stated in the story; their attributes become wrong choices.
  std::size_t distractors = 3;
  TreeShape trees = TreeShape::chain;
  // Per-token drop probability applied to story sentences.
  double token_dropout = 0.0;

  nlohmann::ordered_json to_json() const {
    nlohmann::ordered_json j;
    j["seed"] = seed;
    j["problems"] = problems;
    j["task"] = to_string(task);
    j["vocabulary_size"] = vocabulary_size;
    j["story_length"] = story_length;
    j["min_sentence_length"] = min_sentence_length;
    j["max_sentence_length"] = max_sentence_length;
    j["choices"] = choices;
    j["answers"] = answers;
    j["distractors"] = distractors;
    j["trees"] = to_string(trees);
    j["token_dropout"] = token_dropout;
    return j;
  }
};

/// Function words used for padding and question phrasing.
inline const std::vector<std::string>& function_words() {
  static const std::vector<std::string> words{"the", "a", "of", "to", "and", "so",
                                              "then", "there", "it", "very"};
  return words;
}

/// Ground truth kept beside each generated problem.
struct ProblemMeta {
  std::string id;
  TaskKind task = TaskKind::locate;
  std::vector<std::size_t> supporting;  // story sentence indices
  std::string entity;
  std::vector<std::string> answers;
};

struct SynthDataset {
  std::vector<Problem> problems;
  std::vector<ProblemMeta> meta;
};

inline std::string meta_to_json(const ProblemMeta& m) {
  nlohmann::ordered_json j;
  j["id"] = m.id;
  j["task"] = to_string(m.task);
  j["supporting"] = m.supporting;
  j["entity"] = m.entity;
  j["answers"] = m.answers;
  return j.dump();
}

/// Head array for n tokens in the given shape.
inline std::vector<int> make_heads(std::size_t n, TreeShape shape, std::mt19937_64& rng) {
  std::vector<int> heads(n, 0);
  if (shape == TreeShape::chain || n == 1) {
    for (std::size_t i = 1; i < n; ++i) heads[i] = static_cast<int>(i);
    return heads;
  }
  // Uniform labelled tree from a random Pruefer sequence, rooted at a
  // uniformly chosen node.
  std::vector<std::vector<std::size_t>> adj(n);
  if (n == 2) {
    adj[0].push_back(1);
    adj[1].push_back(0);
  } else {
    std::uniform_int_distribution<std::size_t> pick(0, n - 1);
    std::vector<std::size_t> seq(n - 2);
    for (auto& s : seq) s = pick(rng);
    std::vector<std::size_t> degree(n, 1);
    for (auto s : seq) ++degree[s];
    for (auto s : seq) {
      std::size_t leaf = 0;
      while (degree[leaf] != 1) ++leaf;
      adj[leaf].push_back(s);
      adj[s].push_back(leaf);
      --degree[leaf];
      --degree[s];
    }
    std::size_t u = n, v = n;
    for (std::size_t i = 0; i < n; ++i) {
      if (degree[i] == 1) (u == n ? u : v) = i;
    }
    adj[u].push_back(v);
    adj[v].push_back(u);
  }
  const std::size_t root = std::uniform_int_distribution<std::size_t>(0, n - 1)(rng);
  std::vector<bool> seen(n, false);
  std::vector<std::size_t> stack{root};
  seen[root] = true;
  while (!stack.empty()) {
    const auto v = stack.back();
    stack.pop_back();
    for (auto w : adj[v]) {
      if (seen[w]) continue;
      seen[w] = true;
      heads[w] = static_cast<int>(v + 1);
      stack.push_back(w);
    }
  }
  return heads;
}

namespace detail {

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

struct Pools {
  std::vector<std::string> entities;
  std::vector<std::string> links;
  std::vector<std::string> attributes;
};

inline Pools make_pools(const SynthConfig& c) {
  Pools p;
  const std::size_t groups = c.task == TaskKind::two_hop ? 3 : 2;
  const std::size_t per = c.vocabulary_size / groups;
  for (std::size_t i = 0; i < per; ++i) {
    p.entities.push_back("entity" + std::to_string(i));
    if (groups == 3) p.links.push_back("place" + std::to_string(i));
  }
  for (std::size_t i = 0; i < c.vocabulary_size - per * (groups - 1); ++i) {
    p.attributes.push_back("attr" + std::to_string(i));
  }
  return p;
}

inline std::size_t fact_sentences(const SynthConfig& c) {
  const std::size_t bearers = c.distractors + 1;
  return c.task == TaskKind::two_hop ? 2 * bearers : bearers;
}

inline void check_feasible(const SynthConfig& c) {
  auto fail = [](const std::string& why) { throw DomainError("synthetic config: " + why); };
  if (c.choices < 2) fail("need at least 2 choices");
  if (c.answers < 1 || c.answers >= c.choices) fail("need 1 <= answers < choices");
  if (c.distractors < c.choices - c.answers) {
    fail("need at least choices - answers distractors to supply wrong choices");
  }
  if (c.min_sentence_length < 1 || c.max_sentence_length < c.min_sentence_length) {
    fail("bad sentence length range");
  }
  if (c.token_dropout < 0.0 || c.token_dropout >= 1.0) fail("token_dropout must be in [0, 1)");
  const std::size_t facts = fact_sentences(c);
  const std::size_t story = c.story_length == 0 ? facts : c.story_length;
  if (story < 2) fail("story length must be at least 2");
  if (story < facts) {
    fail("story length " + std::to_string(story) + " cannot hold " + std::to_string(facts) +
         " fact sentences");
  }
  const Pools p = make_pools(c);
  const std::size_t bearers = c.distractors + 1;
  if (p.entities.size() < bearers) fail("vocabulary too small for the entities required");
  if (c.task == TaskKind::two_hop && p.links.size() < bearers) {
    fail("vocabulary too small for the links required");
  }
  if (p.attributes.size() < c.answers + c.distractors) {
    fail("vocabulary too small for the attributes required");
  }
}

template <typename T>
std::vector<T> sample(const std::vector<T>& pool, std::size_t n, std::mt19937_64& rng) {
  std::vector<std::size_t> idx(pool.size());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  std::shuffle(idx.begin(), idx.end(), rng);
  std::vector<T> out;
  for (std::size_t i = 0; i < n; ++i) out.push_back(pool[idx[i]]);
  return out;
}

class SentenceMaker {
 public:
  SentenceMaker(const SynthConfig& c, std::mt19937_64& rng) : c_(c), rng_(rng) {}

  /// Pads the core with trailing function words up to a random length in
  /// the configured range.
  std::vector<std::string> pad(std::vector<std::string> core) {
    std::uniform_int_distribution<std::size_t> len(c_.min_sentence_length, c_.max_sentence_length);
    const std::size_t target = len(rng_);
    std::uniform_int_distribution<std::size_t> fw(0, function_words().size() - 1);
    while (core.size() < target) core.push_back(function_words()[fw(rng_)]);
    return core;
  }

  DepTree tree(std::vector<std::string> tokens, bool story) {
    if (story && c_.token_dropout > 0.0) {
      std::bernoulli_distribution drop(c_.token_dropout);
      std::vector<std::string> kept;
      for (auto& t : tokens)
        if (!drop(rng_)) kept.push_back(t);
      if (kept.empty()) kept.push_back(tokens.back());
      tokens = std::move(kept);
    }
    auto heads = make_heads(tokens.size(), c_.trees, rng_);
    return DepTree::validate(std::move(tokens), std::move(heads));
  }

 private:
  const SynthConfig& c_;
  std::mt19937_64& rng_;
};

// "attr bearer", or "attr1 and attr2 bearer" for several attributes. With
// head-initial chains the attribute is the root and the bearer its deepest
// dependent.
inline std::vector<std::string> attribute_clause(const std::string& bearer,
                                                 const std::vector<std::string>& attrs) {
  std::vector<std::string> core;
  for (std::size_t i = 0; i < attrs.size(); ++i) {
    if (i) core.push_back("and");
    core.push_back(attrs[i]);
  }
  core.push_back(bearer);
  return core;
}

inline std::pair<Problem, ProblemMeta> generate_one(const SynthConfig& c, const Pools& pools,
                                                    std::size_t index) {
  std::mt19937_64 rng(splitmix64(c.seed ^ splitmix64(index)));
  SentenceMaker make(c, rng);
  const std::size_t bearers = c.distractors + 1;

  const auto entities = sample(pools.entities, bearers, rng);
  const auto attrs = sample(pools.attributes, c.answers + c.distractors, rng);
  // Bearer 0 is the target; it holds the first `answers` attributes.
  std::vector<std::vector<std::string>> held(bearers);
  for (std::size_t i = 0; i < c.answers; ++i) held[0].push_back(attrs[i]);
  for (std::size_t b = 1; b < bearers; ++b) held[b].push_back(attrs[c.answers + b - 1]);

  struct Fact {
    std::vector<std::string> tokens;
    int role;  // 0: target attribute sentence, 1: target link sentence, -1: other
  };
  std::vector<Fact> facts;
  if (c.task == TaskKind::locate) {
    for (std::size_t b = 0; b < bearers; ++b) {
      facts.push_back({attribute_clause(entities[b], held[b]), b == 0 ? 0 : -1});
    }
  } else {
    const auto links = sample(pools.links, bearers, rng);
    for (std::size_t b = 0; b < bearers; ++b) {
      // Entity before link, link before attributes: the word a hop lands on
      // leads the sentence that the next hop needs.
      facts.push_back({{entities[b], links[b]}, b == 0 ? 1 : -1});
      auto clause = attribute_clause(links[b], held[b]);
      std::rotate(clause.rbegin(), clause.rbegin() + 1, clause.rend());
      facts.push_back({std::move(clause), b == 0 ? 0 : -1});
    }
  }
  const std::size_t story_len = c.story_length == 0 ? facts.size() : c.story_length;
  while (facts.size() < story_len) facts.push_back({{}, -1});
  std::shuffle(facts.begin(), facts.end(), rng);

  Problem p;
  ProblemMeta m;
  char buf[32];
  std::snprintf(buf, sizeof(buf), "p%05zu", index);
  p.id = m.id = buf;
  m.task = c.task;
  m.entity = entities[0];
  m.answers = held[0];
  for (std::size_t s = 0; s < facts.size(); ++s) {
    p.story.push_back(make.tree(make.pad(facts[s].tokens), true));
    if (facts[s].role >= 0) m.supporting.push_back(s);
  }
  // The question mirrors a fact sentence with "what" in the attribute slot.
  p.question.push_back(make.tree({"what", entities[0]}, false));

  // Choices: the target's attributes plus attributes of distractor bearers.
  std::vector<std::pair<std::string, bool>> options;
  for (const auto& a : held[0]) options.emplace_back(a, true);
  std::vector<std::size_t> others(bearers - 1);
  std::iota(others.begin(), others.end(), std::size_t{1});
  std::shuffle(others.begin(), others.end(), rng);
  for (std::size_t i = 0; i < c.choices - c.answers; ++i) {
    options.emplace_back(held[others[i]][0], false);
  }
  std::shuffle(options.begin(), options.end(), rng);
  for (std::size_t i = 0; i < options.size(); ++i) {
    p.choices.push_back({make.tree({options[i].first}, false)});
    if (options[i].second) p.correct.push_back(i);
  }
  p.validate();
  return {std::move(p), std::move(m)};
}

}  // namespace detail

/// Generates `config.problems` problems. Problem i depends only on the seed
/// and i.
inline SynthDataset generate(const SynthConfig& config) {
  detail::check_feasible(config);
  const auto pools = detail::make_pools(config);
  SynthDataset out;
  for (std::size_t i = 0; i < config.problems; ++i) {
    auto [p, m] = detail::generate_one(config, pools, i);
    out.problems.push_back(std::move(p));
    out.meta.push_back(std::move(m));
  }
  return out;
}

template <typename T>
struct Split {
  std::vector<T> train;
  std::vector<T> dev;
  std::vector<T> test;
};

/// Seeded shuffle, then train and dev take floor(n * ratio) items and test
/// takes the rest.
template <typename T>
Split<T> split(std::vector<T> items, double train_ratio, double dev_ratio, double test_ratio,
               std::uint64_t seed) {
  for (double r : {train_ratio, dev_ratio, test_ratio}) {
    if (r < 0.0) throw DomainError("split: negative ratio");
  }
  if (std::abs(train_ratio + dev_ratio + test_ratio - 1.0) > 1e-9) {
    throw DomainError("split: ratios must sum to 1");
  }
  std::mt19937_64 rng(seed);
  std::shuffle(items.begin(), items.end(), rng);
  const double n = static_cast<double>(items.size());
  const auto n_train = static_cast<std::size_t>(std::floor(n * train_ratio + 1e-9));
  const auto n_dev = std::min(items.size() - n_train,
                              static_cast<std::size_t>(std::floor(n * dev_ratio + 1e-9)));
  Split<T> s;
  auto it = std::make_move_iterator(items.begin());
  s.train.assign(it, it + static_cast<std::ptrdiff_t>(n_train));
  s.dev.assign(it + static_cast<std::ptrdiff_t>(n_train),
               it + static_cast<std::ptrdiff_t>(n_train + n_dev));
  s.test.assign(it + static_cast<std::ptrdiff_t>(n_train + n_dev),
                std::make_move_iterator(items.end()));
  return s;
}

}  // namespace ham
