#include <set>
#include <sstream>

#include "catch_amalgamated.hpp"
#include "support.hpp"

using ham::SynthConfig;
using ham::TaskKind;

namespace {

std::string jsonl(const std::vector<ham::Problem>& problems) {
  std::ostringstream out;
  ham::write_problems(out, problems);
  return out.str();
}

bool is_function_word(const std::string& w) {
  const auto& fw = ham::function_words();
  return w == "what" || std::find(fw.begin(), fw.end(), w) != fw.end();
}

std::set<std::string> content(const ham::DepTree& s) {
  std::set<std::string> out;
  for (const auto& w : s.tokens())
    if (!is_function_word(w)) out.insert(w);
  return out;
}

std::string question_entity(const ham::Problem& p) {
  for (const auto& w : p.question[0].tokens())
    if (!is_function_word(w)) return w;
  return {};
}

std::vector<std::size_t> choices_in(const ham::Problem& p, const std::set<std::string>& words) {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < p.choices.size(); ++i)
    if (words.count(p.choices[i][0].tokens()[0])) out.push_back(i);
  return out;
}

std::vector<std::size_t> guess(const ham::Problem& p, std::mt19937_64& rng) {
  std::vector<std::size_t> idx(p.num_choices());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  std::shuffle(idx.begin(), idx.end(), rng);
  idx.resize(p.num_answers());
  std::sort(idx.begin(), idx.end());
  return idx;
}

// Reads the answer off any single story sentence that mentions the question
// entity; guesses when no single sentence names exactly N choices.
std::vector<std::size_t> single_sentence_solver(const ham::Problem& p, std::mt19937_64& rng) {
  const auto e = question_entity(p);
  for (const auto& s : p.story) {
    const auto words = content(s);
    if (!words.count(e)) continue;
    const auto hits = choices_in(p, words);
    if (hits.size() == p.num_answers()) return hits;
  }
  return guess(p, rng);
}

// Follows entity -> link word -> the other sentence naming that link.
std::vector<std::size_t> chaining_solver(const ham::Problem& p, std::mt19937_64& rng) {
  const auto e = question_entity(p);
  for (std::size_t a = 0; a < p.story.size(); ++a) {
    auto words = content(p.story[a]);
    if (!words.count(e)) continue;
    words.erase(e);
    for (const auto& link : words) {
      for (std::size_t b = 0; b < p.story.size(); ++b) {
        if (b == a) continue;
        const auto other = content(p.story[b]);
        if (!other.count(link)) continue;
        const auto hits = choices_in(p, other);
        if (hits.size() == p.num_answers()) return hits;
      }
    }
  }
  return guess(p, rng);
}

double accuracy(const std::vector<ham::Problem>& problems,
                std::vector<std::size_t> (*solver)(const ham::Problem&, std::mt19937_64&)) {
  std::mt19937_64 rng(99);
  std::size_t hits = 0;
  for (const auto& p : problems) hits += ham::grade(solver(p, rng), p.correct) == ham::Grade::correct;
  return static_cast<double>(hits) / static_cast<double>(problems.size());
}

}  // namespace

TEST_CASE("generated problems are valid", "[datagen]") {
  SynthConfig c;
  c.problems = 200;
  const auto ds = ham::generate(c);
  REQUIRE(ds.problems.size() == 200);
  REQUIRE(ds.meta.size() == 200);
  for (std::size_t i = 0; i < ds.problems.size(); ++i) {
    const auto& p = ds.problems[i];
    CHECK_NOTHROW(p.validate());
    CHECK(p.num_choices() == 4);
    CHECK(p.num_answers() == 1);
    CHECK(p.id == ds.meta[i].id);
    for (const auto& s : p.story) {
      CHECK_NOTHROW(ham::DepTree::validate(s.tokens(), s.heads()));
      // Right-branching chains: the first token is the root.
      CHECK(s.root_index() == 0);
    }
  }
  CHECK(ds.problems[7].id == "p00007");
}

TEST_CASE("generation is deterministic and per-problem", "[datagen][property]") {
  SynthConfig c;
  c.problems = 50;
  c.seed = 5;
  CHECK(jsonl(ham::generate(c).problems) == jsonl(ham::generate(c).problems));
  auto more = c;
  more.problems = 80;
  const auto longer = ham::generate(more).problems;
  CHECK(jsonl(ham::generate(c).problems) == jsonl({longer.begin(), longer.begin() + 50}));
  auto other = c;
  other.seed = 6;
  CHECK(jsonl(ham::generate(c).problems) != jsonl(ham::generate(other).problems));
}

TEST_CASE("locate is solved by string matching", "[datagen][oracle]") {
  for (std::size_t answers : {1u, 2u}) {
    SynthConfig c;
    c.problems = 300;
    c.answers = answers;
    c.distractors = 4;
    c.vocabulary_size = 16;
    c.max_sentence_length = 5;
    const auto ds = ham::generate(c);
    CHECK(accuracy(ds.problems, single_sentence_solver) == 1.0);
    for (std::size_t i = 0; i < ds.problems.size(); ++i) {
      const auto& m = ds.meta[i];
      REQUIRE(m.supporting.size() == 1);
      CHECK(content(ds.problems[i].story[m.supporting[0]]).count(m.entity) == 1);
      CHECK(m.answers.size() == answers);
    }
  }
}

TEST_CASE("two-hop needs two sentences", "[datagen][oracle]") {
  SynthConfig c;
  c.task = TaskKind::two_hop;
  c.problems = 1000;
  const auto ds = ham::generate(c);
  CHECK(accuracy(ds.problems, chaining_solver) == 1.0);
  const double single = accuracy(ds.problems, single_sentence_solver);
  INFO("single-sentence accuracy " << single);
  CHECK(std::abs(single - 0.25) < 4.0 * std::sqrt(0.25 * 0.75 / 1000.0));
  for (std::size_t i = 0; i < ds.problems.size(); ++i) {
    const auto& p = ds.problems[i];
    CHECK(ds.meta[i].supporting.size() == 2);
    // No sentence names both the entity and a choice.
    for (const auto& s : p.story) {
      const auto words = content(s);
      if (words.count(ds.meta[i].entity)) CHECK(choices_in(p, words).empty());
    }
  }
}

TEST_CASE("options", "[datagen]") {
  SECTION("padding, fillers and random trees") {
    SynthConfig c;
    c.problems = 40;
    c.story_length = 7;
    c.min_sentence_length = 3;
    c.max_sentence_length = 6;
    c.trees = ham::TreeShape::random;
    const auto ds = ham::generate(c);
    bool branching = false;
    for (const auto& p : ds.problems) {
      CHECK(p.story.size() == 7);
      for (const auto& s : p.story) {
        CHECK(s.size() >= 3);
        CHECK(s.size() <= 6);
        for (std::size_t j = 0; j < s.size(); ++j) branching |= s.children(j).size() > 1;
      }
    }
    CHECK(branching);
    CHECK(accuracy(ds.problems, single_sentence_solver) == 1.0);
  }

  SECTION("token dropout only shortens story sentences") {
    SynthConfig c;
    c.problems = 40;
    c.max_sentence_length = 5;
    c.token_dropout = 0.5;
    for (const auto& p : ham::generate(c).problems) {
      for (const auto& s : p.story) CHECK(s.size() >= 1);
      CHECK(p.question[0].size() == 2);
    }
  }

  SECTION("infeasible configurations") {
    auto bad = [](auto edit) {
      SynthConfig c;
      edit(c);
      return c;
    };
    CHECK_THROWS_AS(ham::generate(bad([](SynthConfig& c) { c.vocabulary_size = 5; })), ham::DomainError);
    CHECK_THROWS_AS(ham::generate(bad([](SynthConfig& c) { c.choices = 1; })), ham::DomainError);
    CHECK_THROWS_AS(ham::generate(bad([](SynthConfig& c) { c.answers = 4; })), ham::DomainError);
    CHECK_THROWS_AS(ham::generate(bad([](SynthConfig& c) { c.distractors = 2; })), ham::DomainError);
    CHECK_THROWS_AS(ham::generate(bad([](SynthConfig& c) { c.story_length = 2; })), ham::DomainError);
    CHECK_THROWS_AS(ham::generate(bad([](SynthConfig& c) { c.min_sentence_length = 0; })),
                    ham::DomainError);
    CHECK_THROWS_AS(ham::generate(bad([](SynthConfig& c) { c.token_dropout = 1.0; })), ham::DomainError);
    CHECK_THROWS_AS(ham::parse_task_kind("three-hop"), ham::DomainError);
  }
}

TEST_CASE("split", "[datagen]") {
  std::vector<int> items(10);
  std::iota(items.begin(), items.end(), 0);
  const auto s = ham::split(items, 0.8, 0.1, 0.1, 3);
  CHECK(s.train.size() == 8);
  CHECK(s.dev.size() == 1);
  CHECK(s.test.size() == 1);
  std::vector<int> all = s.train;
  all.insert(all.end(), s.dev.begin(), s.dev.end());
  all.insert(all.end(), s.test.begin(), s.test.end());
  std::sort(all.begin(), all.end());
  CHECK(all == items);

  CHECK(ham::split(items, 1, 0, 0, 3).train.size() == 10);
  CHECK(ham::split(items, 0.8, 0.1, 0.1, 3).train == s.train);
  CHECK_THROWS_AS(ham::split(items, 0.5, 0.1, 0.1, 3), ham::DomainError);
  CHECK_THROWS_AS(ham::split(items, 1.2, -0.2, 0.0, 3), ham::DomainError);
}
