#include <sstream>

#include "catch_amalgamated.hpp"
#include "support.hpp"

using ham::DepTree;

namespace {

// Independent acceptance rule: one root, and walking up from every node
// reaches it within n steps.
bool reachability_oracle(const std::vector<int>& heads) {
  const int n = static_cast<int>(heads.size());
  int roots = 0;
  for (int h : heads) {
    if (h < 0 || h > n) return false;
    roots += h == 0;
  }
  if (roots != 1) return false;
  for (int start = 0; start < n; ++start) {
    int v = start;
    int steps = 0;
    while (heads[static_cast<std::size_t>(v)] != 0 && steps <= n) {
      v = heads[static_cast<std::size_t>(v)] - 1;
      ++steps;
    }
    if (heads[static_cast<std::size_t>(v)] != 0) return false;
  }
  return true;
}

}  // namespace

TEST_CASE("parse_conllu reads FORM and HEAD", "[treebank]") {
  const auto trees = ham::parse_conllu("1\tthe\t_\t_\t_\t_\t2\tdet\t_\t_\n2\tcat\t_\t_\t_\t_\t0\troot\t_\t_");
  REQUIRE(trees.size() == 1);
  CHECK(trees[0].tokens() == std::vector<std::string>{"the", "cat"});
  CHECK(trees[0].heads() == std::vector<int>{2, 0});
  CHECK(trees[0].root_index() == 1);
}

TEST_CASE("parse_conllu edge cases", "[treebank]") {
  CHECK(ham::parse_conllu("").empty());
  CHECK(ham::parse_conllu("\n\n# only a comment\n").empty());

  SECTION("comments, multiword ranges and empty nodes are skipped") {
    const std::string text =
        "# sent_id = 1\n"
        "1-2\tdon't\t_\t_\t_\t_\t_\t_\t_\t_\n"
        "1\tDo\t_\t_\t_\t_\t0\troot\t_\t_\n"
        "2\tn't\t_\t_\t_\t_\t1\tneg\t_\t_\n"
        "2.1\tghost\t_\t_\t_\t_\t_\t_\t_\t_\n"
        "\n"
        "1\tHi\t_\t_\t_\t_\t0\troot\t_\t_\n";
    const auto trees = ham::parse_conllu(text);
    REQUIRE(trees.size() == 2);
    CHECK(trees[0].tokens() == std::vector<std::string>{"do", "n't"});
    CHECK(trees[0].surface() == std::vector<std::string>{"Do", "n't"});
    CHECK(trees[1].size() == 1);
  }

  SECTION("a non-numeric head names its line") {
    try {
      ham::parse_conllu("1\tthe\t_\t_\t_\t_\t2\tdet\t_\t_\n2\tcat\t_\t_\t_\t_\tx\troot\t_\t_\n");
      FAIL("expected a parse error");
    } catch (const ham::ParseError& e) {
      CHECK(e.line() == 2);
      CHECK(std::string(e.what()).find("line 2") != std::string::npos);
    }
  }

  SECTION("too few fields") {
    CHECK_THROWS_AS(ham::parse_conllu("1\tthe\t_\t_\n"), ham::ParseError);
  }

  SECTION("tree violations are delegated to validate") {
    CHECK_THROWS_AS(ham::parse_conllu("1\ta\t_\t_\t_\t_\t0\t_\t_\t_\n2\tb\t_\t_\t_\t_\t0\t_\t_\t_\n"),
                    ham::StructureError);
    CHECK_THROWS_AS(ham::parse_conllu("1\ta\t_\t_\t_\t_\t3\t_\t_\t_\n"), ham::RangeError);
  }
}

TEST_CASE("validate", "[treebank]") {
  const auto single = DepTree::validate({"a"}, {0});
  CHECK(single.root_index() == 0);
  CHECK(single.size() == 1);

  CHECK_THROWS_AS(DepTree::validate({"a", "b"}, {2, 1}), ham::StructureError);
  CHECK_THROWS_AS(DepTree::validate({"a", "b"}, {0, 0}), ham::StructureError);
  CHECK_THROWS_AS(DepTree::validate({"a", "b", "c"}, {0, 3, 2}), ham::CycleError);
  CHECK_THROWS_AS(DepTree::validate({"a", "b"}, {0, 5}), ham::RangeError);
  CHECK_THROWS_AS(DepTree::validate({"a", "b"}, {0, -1}), ham::RangeError);
  CHECK_THROWS_AS(DepTree::validate({"a"}, {0, 1}), ham::DimensionError);
  CHECK_THROWS_AS(DepTree::validate({}, {}), ham::StructureError);
}

TEST_CASE("children", "[treebank]") {
  const auto two = DepTree::validate({"the", "cat"}, {2, 0});
  CHECK(ham::children(two, 1) == std::vector<std::size_t>{0});
  CHECK(ham::children(two, 0).empty());

  const auto chain = test::head_final_chain({"a", "b", "c", "d"});
  for (std::size_t j = 0; j < 4; ++j) {
    if (j == chain.root_index()) continue;
    CHECK(ham::children(chain, j).size() == (j == 0 ? 0u : 1u));
  }
  CHECK(ham::children(chain, chain.root_index()).size() == 1);

  const auto star = DepTree::validate({"a", "b", "c", "d"}, {0, 1, 1, 1});
  CHECK(ham::children(star, 0) == std::vector<std::size_t>{1, 2, 3});
}

TEST_CASE("validate agrees with the reachability oracle on every head assignment", "[treebank][property]") {
  for (int n = 1; n <= 6; ++n) {
    std::vector<int> heads(static_cast<std::size_t>(n), 0);
    std::size_t checked = 0, mismatches = 0;
    while (true) {
      bool accepted = true;
      try {
        std::vector<std::string> tokens(heads.size(), "w");
        DepTree::validate(tokens, heads);
      } catch (const ham::Error&) {
        accepted = false;
      }
      mismatches += accepted != reachability_oracle(heads);
      ++checked;
      std::size_t i = 0;
      while (i < heads.size() && ++heads[i] > n) heads[i++] = 0;
      if (i == heads.size()) break;
    }
    INFO("n = " << n << ", assignments = " << checked);
    CHECK(mismatches == 0);
  }
}

TEST_CASE("every valid tree has n - 1 parent links", "[treebank][property]") {
  std::mt19937_64 rng(3);
  for (int trial = 0; trial < 200; ++trial) {
    const auto tree = test::random_tree(1 + static_cast<std::size_t>(trial % 9), rng);
    std::size_t total = 0;
    for (std::size_t j = 0; j < tree.size(); ++j) total += ham::children(tree, j).size();
    CHECK(total == tree.size() - 1);
    const auto order = tree.post_order();
    CHECK(order.size() == tree.size());
    CHECK(order.back() == tree.root_index());
    CHECK(tree.subtree(tree.root_index()).size() == tree.size());
  }
}

TEST_CASE("CoNLL-U serialization round-trips", "[treebank][property]") {
  std::mt19937_64 rng(8);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<DepTree> trees;
    const int count = 1 + trial % 4;
    for (int i = 0; i < count; ++i) trees.push_back(test::random_tree(1 + (trial + i) % 8, rng));
    CHECK(ham::parse_conllu(ham::to_conllu(trees)) == trees);
  }
}

TEST_CASE("problem invariants", "[treebank]") {
  auto p = test::make_problem({{"a", "b"}}, {"what", "b"}, {{"a"}, {"c"}}, {0});
  CHECK_NOTHROW(p.validate());

  auto bad = p;
  bad.correct = {};
  CHECK_THROWS_AS(bad.validate(), ham::StructureError);
  bad.correct = {0, 1};
  CHECK_THROWS_AS(bad.validate(), ham::StructureError);
  bad.correct = {2};
  CHECK_THROWS_AS(bad.validate(), ham::RangeError);
  bad = p;
  bad.choices.pop_back();
  bad.correct = {0};
  CHECK_THROWS_AS(bad.validate(), ham::StructureError);
}

TEST_CASE("problem JSON lines round-trip", "[treebank]") {
  auto p = test::make_problem({{"A", "b"}, {"c", "d", "e"}}, {"what", "b"}, {{"a"}, {"c"}, {"e"}}, {2}, "x1");
  const auto line = ham::problem_to_json(p);
  CHECK(line.rfind("{\"id\":\"x1\",\"story\":", 0) == 0);
  const auto back = ham::problem_from_json(line);
  CHECK(back.id == "x1");
  CHECK(back.story == p.story);
  CHECK(back.story[0].surface()[0] == "A");
  CHECK(back.correct == p.correct);

  std::stringstream ss;
  ham::write_problems(ss, {p, p});
  auto all = ham::read_problems(ss);
  CHECK(all.size() == 2);

  // A missing id falls back to the line's position.
  std::stringstream no_id(R"({"story":[{"tokens":["a"],"heads":[0]}],"question":[{"tokens":["q"],"heads":[0]}],"choices":[[{"tokens":["a"],"heads":[0]}],[{"tokens":["b"],"heads":[0]}]],"correct":[1]})");
  CHECK(ham::read_problems(no_id)[0].id == "0");

  std::stringstream broken("{\"story\": [}\n");
  CHECK_THROWS_AS(ham::read_problems(broken), ham::ParseError);
}
