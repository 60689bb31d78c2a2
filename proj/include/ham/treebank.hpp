#pragma once

// Dependency trees, CoNLL-U ingestion and the problem-set JSON-lines format.

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cstddef>
#include <istream>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "ham/errors.hpp"

namespace ham {

inline std::string lowercase(std::string_view s) {
  std::string out(s);
  std::transform(out.begin(), out.end(), out.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return out;
}

/// A validated, rooted dependency tree over one sentence.
///
/// heads are 1-based parent positions with 0 marking the root, as in
/// CoNLL-U. tokens() are lowercased for vocabulary lookup; surface() keeps
/// the original forms for display.
class DepTree {
 public:
  /// Checks the head array and builds the tree. Throws RangeError for a head
  /// past the last token, StructureError unless exactly one root exists, and
  /// CycleError when some node cannot reach the root.
  static DepTree validate(std::vector<std::string> tokens, std::vector<int> heads) {
    const std::size_t n = tokens.size();
    if (n == 0) throw StructureError("dependency tree: empty sentence");
    if (heads.size() != n) {
      throw DimensionError("dependency tree: " + std::to_string(n) + " tokens but " +
                           std::to_string(heads.size()) + " heads");
    }
    std::size_t roots = 0;
    std::size_t root = 0;
    for (std::size_t i = 0; i < n; ++i) {
      if (heads[i] < 0 || static_cast<std::size_t>(heads[i]) > n) {
        throw RangeError("dependency tree: head " + std::to_string(heads[i]) + " of token " +
                         std::to_string(i + 1) + " outside 0.." + std::to_string(n));
      }
      if (heads[i] == 0) {
        ++roots;
        root = i;
      }
    }
    if (roots != 1) {
      throw StructureError("dependency tree: expected exactly one root, found " +
                           std::to_string(roots));
    }
    // 0 = unvisited, 1 = on current path, 2 = reaches root.
    std::vector<unsigned char> state(n, 0);
    state[root] = 2;
    std::vector<std::size_t> path;
    for (std::size_t start = 0; start < n; ++start) {
      path.clear();
      std::size_t v = start;
      while (state[v] == 0) {
        state[v] = 1;
        path.push_back(v);
        v = static_cast<std::size_t>(heads[v] - 1);
      }
      if (state[v] == 1) {
        throw CycleError("dependency tree: token " + std::to_string(v + 1) +
                         " lies on a cycle");
      }
      for (auto p : path) state[p] = 2;
    }

    DepTree t;
    t.surface_ = std::move(tokens);
    t.tokens_.reserve(n);
    for (const auto& s : t.surface_) t.tokens_.push_back(lowercase(s));
    t.heads_ = std::move(heads);
    t.root_ = root;
    t.children_.assign(n, {});
    for (std::size_t k = 0; k < n; ++k) {
      if (t.heads_[k] != 0) t.children_[static_cast<std::size_t>(t.heads_[k] - 1)].push_back(k);
    }
    return t;
  }

  std::size_t size() const noexcept { return tokens_.size(); }
  const std::vector<std::string>& tokens() const noexcept { return tokens_; }
  const std::vector<std::string>& surface() const noexcept { return surface_; }
  const std::vector<int>& heads() const noexcept { return heads_; }
  std::size_t root_index() const noexcept { return root_; }

  /// C(j): children of node j in ascending token order.
  const std::vector<std::size_t>& children(std::size_t j) const {
    if (j >= children_.size()) throw RangeError("children: node out of range");
    return children_[j];
  }

  /// Nodes ordered so every child precedes its parent; ties follow token order.
  std::vector<std::size_t> post_order() const {
    std::vector<std::size_t> order;
    order.reserve(size());
    std::vector<std::pair<std::size_t, std::size_t>> stack{{root_, 0}};
    while (!stack.empty()) {
      auto& [node, next] = stack.back();
      if (next < children_[node].size()) {
        const std::size_t child = children_[node][next++];
        stack.emplace_back(child, 0);
      } else {
        order.push_back(node);
        stack.pop_back();
      }
    }
    return order;
  }

  /// Token indices of the subtree rooted at j, ascending.
  std::vector<std::size_t> subtree(std::size_t j) const {
    std::vector<std::size_t> out;
    std::vector<std::size_t> stack{j};
    while (!stack.empty()) {
      const std::size_t v = stack.back();
      stack.pop_back();
      out.push_back(v);
      for (auto c : children(v)) stack.push_back(c);
    }
    std::sort(out.begin(), out.end());
    return out;
  }

  bool operator==(const DepTree& o) const {
    return surface_ == o.surface_ && heads_ == o.heads_;
  }

 private:
  DepTree() = default;

  std::vector<std::string> tokens_;
  std::vector<std::string> surface_;
  std::vector<int> heads_;
  std::size_t root_ = 0;
  std::vector<std::vector<std::size_t>> children_;
};

inline const std::vector<std::size_t>& children(const DepTree& tree, std::size_t j) {
  return tree.children(j);
}

namespace detail {

inline std::vector<std::string_view> split_tabs(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const auto tab = line.find('\t', start);
    if (tab == std::string_view::npos) {
      out.push_back(line.substr(start));
      break;
    }
    out.push_back(line.substr(start, tab - start));
    start = tab + 1;
  }
  return out;
}

inline std::optional<int> to_int(std::string_view s) {
  int v = 0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size() || s.empty()) return std::nullopt;
  return v;
}

}  // namespace detail

/// Reads the FORM and HEAD columns of CoNLL-U text. Multiword ranges
/// ("3-4") and empty nodes ("3.1") are skipped.
inline std::vector<DepTree> parse_conllu(std::string_view text) {
  std::vector<DepTree> trees;
  std::vector<std::string> tokens;
  std::vector<int> heads;
  std::size_t block_start = 0;

  auto flush = [&]() {
    if (tokens.empty()) return;
    try {
      trees.push_back(DepTree::validate(std::move(tokens), std::move(heads)));
    } catch (const StructureError& e) {
      throw StructureError("sentence at line " + std::to_string(block_start) + ": " + e.what());
    } catch (const CycleError& e) {
      throw CycleError("sentence at line " + std::to_string(block_start) + ": " + e.what());
    } catch (const RangeError& e) {
      throw RangeError("sentence at line " + std::to_string(block_start) + ": " + e.what());
    }
    tokens.clear();
    heads.clear();
  };

  std::istringstream in{std::string(text)};
  std::string raw;
  std::size_t line_no = 0;
  while (std::getline(in, raw)) {
    ++line_no;
    std::string_view line = raw;
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (line.empty()) {
      flush();
      continue;
    }
    if (line.front() == '#') continue;

    auto fields = detail::split_tabs(line);
    if (fields.size() < 8) {
      throw ParseError(line_no, "expected at least 8 tab-separated fields, found " +
                                    std::to_string(fields.size()));
    }
    const auto id = fields[0];
    if (id.find('-') != std::string_view::npos || id.find('.') != std::string_view::npos) {
      continue;
    }
    auto id_value = detail::to_int(id);
    if (!id_value) throw ParseError(line_no, "ID field '" + std::string(id) + "' is not an integer");
    if (*id_value != static_cast<int>(tokens.size()) + 1) {
      throw ParseError(line_no, "ID " + std::to_string(*id_value) + " out of sequence");
    }
    auto head = detail::to_int(fields[6]);
    if (!head) {
      throw ParseError(line_no, "HEAD field '" + std::string(fields[6]) + "' is not an integer");
    }
    if (tokens.empty()) block_start = line_no;
    tokens.emplace_back(fields[1]);
    heads.push_back(*head);
  }
  flush();
  return trees;
}

/// Writes trees as CoNLL-U with only ID, FORM and HEAD populated.
inline std::string to_conllu(const std::vector<DepTree>& trees) {
  std::ostringstream os;
  for (const auto& t : trees) {
    for (std::size_t i = 0; i < t.size(); ++i) {
      os << (i + 1) << '\t' << t.surface()[i] << "\t_\t_\t_\t_\t" << t.heads()[i]
         << "\t_\t_\t_\n";
    }
    os << '\n';
  }
  return os.str();
}

using Sentences = std::vector<DepTree>;

/// One multiple-choice item: story, question, K choices and the set of
/// correct choice indices.
struct Problem {
  std::string id;
  Sentences story;
  Sentences question;
  std::vector<Sentences> choices;
  std::vector<std::size_t> correct;  // sorted, unique

  std::size_t num_choices() const noexcept { return choices.size(); }
  std::size_t num_answers() const noexcept { return correct.size(); }

  void validate() const {
    const std::size_t k = choices.size();
    if (k < 2) throw StructureError("problem " + id + ": needs at least 2 choices");
    if (correct.empty() || correct.size() >= k) {
      throw StructureError("problem " + id + ": needs between 1 and K-1 correct choices");
    }
    for (std::size_t i = 0; i < correct.size(); ++i) {
      if (correct[i] >= k) throw RangeError("problem " + id + ": correct index out of range");
      if (i > 0 && correct[i] <= correct[i - 1]) {
        throw StructureError("problem " + id + ": correct indices must be unique");
      }
    }
    if (story.empty()) throw StructureError("problem " + id + ": empty story");
    if (question.empty()) throw StructureError("problem " + id + ": empty question");
    for (const auto& c : choices) {
      if (c.empty()) throw StructureError("problem " + id + ": empty choice");
    }
  }
};

namespace detail {

inline nlohmann::ordered_json sentence_json(const DepTree& t) {
  nlohmann::ordered_json j;
  j["tokens"] = t.surface();
  j["heads"] = t.heads();
  return j;
}

inline nlohmann::ordered_json sentences_json(const Sentences& s) {
  auto arr = nlohmann::ordered_json::array();
  for (const auto& t : s) arr.push_back(sentence_json(t));
  return arr;
}

inline Sentences sentences_from_json(const nlohmann::json& j, const char* field) {
  if (!j.is_array()) throw DomainError(std::string("field '") + field + "' must be an array");
  Sentences out;
  for (const auto& s : j) {
    out.push_back(DepTree::validate(s.at("tokens").get<std::vector<std::string>>(),
                                    s.at("heads").get<std::vector<int>>()));
  }
  return out;
}

}  // namespace detail

/// Serializes a problem as one compact JSON object with keys in the order
/// id, story, question, choices, correct.
inline std::string problem_to_json(const Problem& p) {
  nlohmann::ordered_json j;
  j["id"] = p.id;
  j["story"] = detail::sentences_json(p.story);
  j["question"] = detail::sentences_json(p.question);
  auto choices = nlohmann::ordered_json::array();
  for (const auto& c : p.choices) choices.push_back(detail::sentences_json(c));
  j["choices"] = std::move(choices);
  j["correct"] = p.correct;
  return j.dump();
}

/// Parses one JSON line. A missing "id" falls back to fallback_id.
inline Problem problem_from_json(std::string_view line, const std::string& fallback_id = "") {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(line);
  } catch (const nlohmann::json::exception& e) {
    throw DomainError(std::string("problem JSON: ") + e.what());
  }
  Problem p;
  try {
    p.id = j.contains("id") ? j.at("id").get<std::string>() : fallback_id;
    p.story = detail::sentences_from_json(j.at("story"), "story");
    p.question = detail::sentences_from_json(j.at("question"), "question");
    const auto& choices = j.at("choices");
    if (!choices.is_array()) throw DomainError("field 'choices' must be an array");
    for (const auto& c : choices) p.choices.push_back(detail::sentences_from_json(c, "choices"));
    p.correct = j.at("correct").get<std::vector<std::size_t>>();
  } catch (const nlohmann::json::exception& e) {
    throw DomainError("problem " + p.id + ": " + e.what());
  }
  std::sort(p.correct.begin(), p.correct.end());
  p.validate();
  return p;
}

inline std::vector<Problem> read_problems(std::istream& in) {
  std::vector<Problem> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    try {
      out.push_back(problem_from_json(line, std::to_string(out.size())));
    } catch (const Error& e) {
      throw ParseError(line_no, e.what());
    }
  }
  return out;
}

inline void write_problems(std::ostream& out, const std::vector<Problem>& problems) {
  for (const auto& p : problems) out << problem_to_json(p) << '\n';
}

}  // namespace ham
