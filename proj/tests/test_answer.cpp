#include "catch_amalgamated.hpp"
#include "support.hpp"

using ham::Grade;
using ham::Tensor;

TEST_CASE("score_choices", "[answer]") {
  SECTION("the choice aligned with the output wins") {
    const auto q = Tensor::vector({0, 2, 0});
    const std::vector<Tensor> choices{Tensor::vector({1, 0, 0}), Tensor::vector({0, 5, 0}),
                                      Tensor::vector({0, 0, -1})};
    const auto d = ham::score_choices(q, choices);
    CHECK(d.scores[1] == 1.0);
    CHECK(d.p_hat[1] > d.p_hat[0]);
    CHECK(d.p_hat[1] > d.p_hat[2]);
  }

  SECTION("identical choices give a uniform distribution") {
    const std::vector<Tensor> same(4, Tensor::vector({0.3, -0.2}));
    const auto d = ham::score_choices(Tensor::vector({1, 1}), same);
    for (double p : d.p_hat) CHECK(p == 0.25);
  }

  SECTION("scores (1, 0, 0, 0)") {
    const auto q = Tensor::vector({1, 0, 0, 0});
    std::vector<Tensor> choices{Tensor::vector({1, 0, 0, 0}), Tensor::vector({0, 1, 0, 0}),
                                Tensor::vector({0, 0, 1, 0}), Tensor::vector({0, 0, 0, 1})};
    const auto d = ham::score_choices(q, choices);
    const double e = std::exp(1.0);
    CHECK(std::abs(d.p_hat[0] - e / (e + 3.0)) < 1e-15);
    CHECK(std::abs(d.p_hat[0] - 0.4754) < 1e-4);
    CHECK(std::abs(d.p_hat[3] - 0.1749) < 1e-4);
  }

  SECTION("errors") {
    CHECK_THROWS_AS(ham::score_choices(Tensor::vector({1, 0}),
                                       std::vector<Tensor>{Tensor::vector({1, 0}), Tensor::vector({1})}),
                    ham::DimensionError);
    CHECK_THROWS_AS(ham::score_choices(Tensor::vector({1}), std::vector<Tensor>{Tensor::vector({1})}),
                    ham::DomainError);
  }
}

TEST_CASE("target_distribution", "[answer]") {
  CHECK(ham::target_distribution(4, std::vector<std::size_t>{0}) == std::vector<double>{1, 0, 0, 0});
  CHECK(ham::target_distribution(4, std::vector<std::size_t>{0, 1}) ==
        std::vector<double>{0.5, 0.5, 0, 0});
  CHECK(ham::target_distribution(2, std::vector<std::size_t>{1}) == std::vector<double>{0, 1});
  CHECK_THROWS_AS(ham::target_distribution(3, std::vector<std::size_t>{}), ham::DomainError);
  CHECK_THROWS_AS(ham::target_distribution(2, std::vector<std::size_t>{0, 1}), ham::DomainError);
  CHECK_THROWS_AS(ham::target_distribution(3, std::vector<std::size_t>{0, 0}), ham::DomainError);
  CHECK_THROWS_AS(ham::target_distribution(3, std::vector<std::size_t>{5}), ham::RangeError);
}

TEST_CASE("target distributions sum to one", "[answer][property]") {
  std::mt19937_64 rng(1);
  for (std::size_t k = 2; k <= 9; ++k) {
    for (std::size_t n = 1; n < k; ++n) {
      std::vector<std::size_t> idx(k);
      std::iota(idx.begin(), idx.end(), std::size_t{0});
      std::shuffle(idx.begin(), idx.end(), rng);
      idx.resize(n);
      const auto p = ham::target_distribution(k, idx);
      CHECK(std::abs(std::accumulate(p.begin(), p.end(), 0.0) - 1.0) < 1e-12);
      CHECK(std::count(p.begin(), p.end(), 1.0 / static_cast<double>(n)) == static_cast<long>(n));
    }
  }
}

TEST_CASE("select", "[answer]") {
  using V = std::vector<double>;
  using I = std::vector<std::size_t>;
  CHECK(ham::select(V{0.1, 0.6, 0.2, 0.1}, 1) == I{1});
  CHECK(ham::select(V{0.25, 0.25, 0.25, 0.25}, 2) == I{0, 1});
  CHECK(ham::select(V{0.4, 0.1, 0.4, 0.1}, 2) == I{0, 2});
  CHECK_THROWS_AS(ham::select(V{0.5, 0.5}, 2), ham::DomainError);
  CHECK_THROWS_AS(ham::select(V{0.5, 0.5}, 0), ham::DomainError);
}

TEST_CASE("select agrees on scores and probabilities", "[answer][property]") {
  std::mt19937_64 rng(2);
  std::uniform_int_distribution<int> level(-3, 3);
  for (int trial = 0; trial < 500; ++trial) {
    const std::size_t k = 2 + static_cast<std::size_t>(trial % 6);
    std::vector<double> scores(k);
    // Coarse levels make ties common.
    for (auto& s : scores) s = 0.25 * level(rng);
    const auto p = ham::kernels::softmax(scores);
    const std::size_t n = 1 + static_cast<std::size_t>(trial) % (k - 1);
    CHECK(ham::select(scores, n) == ham::select(p, n));
  }
}

TEST_CASE("loss", "[answer]") {
  using V = std::vector<double>;
  CHECK(ham::loss(V{0.5, 0.5, 0, 0}, V{0.5, 0.5, 0, 0}) == 0.0);
  CHECK(std::abs(ham::loss(V{1, 0, 0, 0}, V{0.25, 0.25, 0.25, 0.25}) - std::log(4.0)) < 1e-12);
  CHECK(std::abs(ham::loss(V{1, 0}, V{0.5, 0.5}) - std::log(2.0)) < 1e-12);
  const double high = ham::loss(V{1, 0}, V{0.9, 0.1});
  const double mid = ham::loss(V{1, 0}, V{0.5, 0.5});
  const double low = ham::loss(V{1, 0}, V{0.1, 0.9});
  CHECK(high < mid);
  CHECK(mid < low);
}

TEST_CASE("loss vanishes when extreme scores force the target", "[answer][property]") {
  const std::vector<double> p{0.5, 0, 0.5, 0};
  const auto p_hat = ham::kernels::softmax(std::vector<double>{40, 0, 40, 0});
  CHECK(ham::loss(p, p_hat) < 1e-6);
}

TEST_CASE("loss gradient through scores", "[answer][gradient]") {
  std::mt19937_64 rng(3);
  double worst = 0.0;
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t k = 2 + static_cast<std::size_t>(trial % 5);
    const auto target = ham::target_distribution(k, std::vector<std::size_t>{static_cast<std::size_t>(trial) % k});
    std::map<std::string, Tensor> params{{"scores", test::random_tensor({k}, rng, 2.0)}};
    const test::Program f = [&](ham::Tape& tape, const std::map<std::string, ham::Var>& v) {
      return tape.kl_divergence(target, tape.softmax(v.at("scores")));
    };
    worst = std::max(worst, test::max_fd_error(f, params));
  }
  CHECK(worst < 1e-5);
}

TEST_CASE("grade", "[answer]") {
  using I = std::vector<std::size_t>;
  CHECK(ham::grade(I{1}, I{1}) == Grade::correct);
  CHECK(ham::grade(I{0, 1}, I{0, 2}) == Grade::incorrect);
  CHECK(ham::grade(I{0, 1}, I{1, 0}) == Grade::correct);
  CHECK(ham::grade(I{}, I{0}) == Grade::incorrect);
}
