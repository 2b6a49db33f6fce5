#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "drcgenre/svm.hpp"
#include "oracles.hpp"

using namespace drcgenre;

namespace {

struct Blobs {
  std::vector<Point> x;
  std::vector<std::string> y;
};

Blobs make_blobs(std::size_t per_class, std::uint64_t seed, double spread = 0.5) {
  const double centres[3][2] = {{0.0, 0.0}, {4.0, 0.0}, {2.0, 3.5}};
  const char* names[3] = {"a", "b", "c"};
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> noise(0.0, spread);
  Blobs out;
  for (std::size_t c = 0; c < 3; ++c) {
    for (std::size_t i = 0; i < per_class; ++i) {
      out.x.push_back({centres[c][0] + noise(rng), centres[c][1] + noise(rng)});
      out.y.push_back(names[c]);
    }
  }
  return out;
}

std::vector<std::vector<double>> to_rows(const KernelMatrix& k) {
  std::vector<std::vector<double>> rows(k.size());
  for (std::size_t i = 0; i < k.size(); ++i) rows[i].assign(k.row(i).begin(), k.row(i).end());
  return rows;
}

// y(x_n) evaluated through the gram matrix.
double margin_score(const KernelMatrix& k, const std::vector<int>& t, const DualSolution& s, std::size_t n) {
  double acc = s.bias;
  for (std::size_t m = 0; m < k.size(); ++m) acc += s.alpha[m] * t[m] * k(n, m);
  return acc;
}

}  // namespace

TEST_CASE("standardize") {
  auto [z, stats] = standardize({{0.0}, {2.0}});
  CHECK(z[0][0] == -1.0);
  CHECK(z[1][0] == 1.0);
  CHECK(stats.mean[0] == 1.0);
  CHECK(stats.std[0] == 1.0);

  const std::vector<Point> pts{{1.0, 5.0}, {3.0, 5.0}, {8.0, 5.0}};
  auto [scaled, s2] = standardize(pts);
  for (const auto& p : scaled) CHECK(p[1] == 0.0);  // constant dimension
  auto [again, s3] = standardize(scaled);
  for (std::size_t i = 0; i < scaled.size(); ++i) {
    for (std::size_t d = 0; d < 2; ++d) CHECK(std::abs(again[i][d] - scaled[i][d]) < 1e-9);
  }
  CHECK(s2.apply(pts[1]) == scaled[1]);
  CHECK_THROWS_AS(standardize({{1.0}}), std::invalid_argument);
  CHECK_THROWS_AS(s2.apply(Point{1.0}), std::invalid_argument);
}

TEST_CASE("rbf kernel") {
  const Point x{0.3, -1.2, 2.0};
  CHECK(rbf_kernel(x, x, 0.7) == 1.0);
  CHECK(rbf_kernel(Point{0.0}, Point{1.0}, 1.0) == doctest::Approx(0.36787944117144233).epsilon(1e-15));
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> u(-2.0, 2.0);
  for (int i = 0; i < 50; ++i) {
    const Point a{u(rng), u(rng)}, b{u(rng), u(rng)};
    CHECK(rbf_kernel(a, b, 0.5) == rbf_kernel(b, a, 0.5));
    CHECK(rbf_kernel(a, b, 0.5) > 0.0);
    CHECK(rbf_kernel(a, b, 0.5) <= 1.0);
  }
  CHECK_THROWS_AS(rbf_kernel(Point{1.0}, Point{1.0, 2.0}, 1.0), std::invalid_argument);
  CHECK_THROWS_AS(rbf_kernel(Point{1.0}, Point{1.0}, 0.0), std::invalid_argument);

  const KernelMatrix k = KernelMatrix::rbf({{0.0}, {1.0}, {3.0}}, 0.5);
  for (std::size_t i = 0; i < 3; ++i) {
    CHECK(k(i, i) == 1.0);
    for (std::size_t j = 0; j < 3; ++j) CHECK(k(i, j) == k(j, i));
  }
}

TEST_CASE("solve_dual: two separable points") {
  const std::vector<Point> pts{{0.0, 0.0}, {1.0, 1.0}};
  const std::vector<int> t{1, -1};
  const KernelMatrix k = KernelMatrix::rbf(pts, 0.5);
  const DualSolution s = solve_dual(k, t, {1e6, 1e-3, 1000000});
  // Closed form: a = 2 / (k11 - 2 k12 + k22).
  const double closed = 2.0 / (k(0, 0) - 2.0 * k(0, 1) + k(1, 1));
  CHECK(s.alpha[0] == doctest::Approx(closed).epsilon(1e-12));
  CHECK(s.alpha[1] == doctest::Approx(closed).epsilon(1e-12));
  CHECK(std::abs(s.alpha[0] - s.alpha[1]) < 1e-12);
  const auto oracle = oracle::brute_force_dual(to_rows(k), t, 1e6);
  CHECK(dual_objective(k, t, s.alpha) == doctest::Approx(oracle.objective).epsilon(1e-12));
  CHECK(s.bias == doctest::Approx(0.0).scale(1.0).epsilon(1e-12));
}

TEST_CASE("solve_dual: duplicate point with opposite labels saturates the box") {
  const std::vector<Point> pts{{0.5, 0.5}, {0.5, 0.5}};
  const std::vector<int> t{1, -1};
  const KernelMatrix k = KernelMatrix::rbf(pts, 1.0);
  const DualSolution s = solve_dual(k, t, {2.0});
  CHECK(s.alpha[0] == 2.0);
  CHECK(s.alpha[1] == 2.0);
  const auto oracle = oracle::brute_force_dual(to_rows(k), t, 2.0);
  CHECK(oracle.objective == doctest::Approx(4.0));
  CHECK(dual_objective(k, t, s.alpha) == doctest::Approx(oracle.objective).epsilon(1e-12));
}

TEST_CASE("property: solve_dual reaches the brute-force optimum on small instances") {
  std::mt19937_64 rng(1234);
  std::uniform_real_distribution<double> coord(-1.5, 1.5);
  std::uniform_real_distribution<double> c_dist(0.5, 10.0);
  std::uniform_int_distribution<int> size(2, 8);
  for (int trial = 0; trial < 60; ++trial) {
    const auto n = static_cast<std::size_t>(size(rng));
    std::vector<Point> pts(n);
    std::vector<int> t(n);
    for (std::size_t i = 0; i < n; ++i) {
      pts[i] = {coord(rng), coord(rng), coord(rng)};
      t[i] = (i % 2 == 0) ? 1 : -1;
    }
    const double C = c_dist(rng);
    const KernelMatrix k = KernelMatrix::rbf(pts, 1.0);
    const DualSolution s = solve_dual(k, t, {C});
    CHECK(s.converged);

    const auto oracle = oracle::brute_force_dual(to_rows(k), t, C);
    CHECK(std::abs(dual_objective(k, t, s.alpha) - oracle.objective) <= 1e-6);

    double eq = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      CHECK(s.alpha[i] >= 0.0);
      CHECK(s.alpha[i] <= C + 1e-9);
      eq += s.alpha[i] * t[i];
    }
    CHECK(std::abs(eq) < 1e-8);

    for (std::size_t i = 0; i < n; ++i) {
      const double m = t[i] * margin_score(k, t, s, i);
      if (s.alpha[i] == 0.0) CHECK(m >= 1.0 - 1e-3);
      else if (s.alpha[i] < C) CHECK(std::abs(m - 1.0) <= 1e-3);
      else CHECK(m <= 1.0 + 1e-3);
    }
  }
}

TEST_CASE("property: margins hold when every multiplier sits on a bound") {
  // Small C saturates the box, leaving no free support vector to read the bias from.
  std::mt19937_64 rng(99);
  std::uniform_real_distribution<double> coord(-2.0, 2.0);
  std::uniform_real_distribution<double> c_dist(0.05, 0.5);
  std::bernoulli_distribution coin(0.5);
  int all_bound = 0;
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t n = 3 + trial % 4;
    std::vector<Point> pts(n);
    std::vector<int> t(n);
    for (std::size_t i = 0; i < n; ++i) {
      pts[i] = {coord(rng), coord(rng)};
      t[i] = coin(rng) ? 1 : -1;
    }
    t[0] = 1;
    t[1] = -1;
    const double C = c_dist(rng);
    const KernelMatrix k = KernelMatrix::rbf(pts, 0.5);
    const DualSolution s = solve_dual(k, t, {C});
    REQUIRE(s.converged);
    bool any_free = false;
    for (double a : s.alpha) any_free = any_free || (a > 0.0 && a < C);
    if (any_free) continue;
    ++all_bound;
    for (std::size_t i = 0; i < n; ++i) {
      const double m = t[i] * margin_score(k, t, s, i);
      if (s.alpha[i] == 0.0) CHECK(m >= 1.0 - 1e-3);
      else CHECK(m <= 1.0 + 1e-3);
    }
  }
  CHECK(all_bound >= 10);
}

TEST_CASE("solve_dual: input validation and iteration cap") {
  const KernelMatrix k = KernelMatrix::rbf({{0.0}, {1.0}, {2.0}}, 1.0);
  CHECK_THROWS_AS(solve_dual(k, std::vector<int>{1, 1, 1}), std::invalid_argument);
  CHECK_THROWS_AS(solve_dual(k, std::vector<int>{1, -1}), std::invalid_argument);
  CHECK_THROWS_AS(solve_dual(k, std::vector<int>{1, 0, -1}), std::invalid_argument);
  const KernelMatrix skew(2, {1.0, 0.5, 0.4, 1.0});
  CHECK_THROWS_AS(solve_dual(skew, std::vector<int>{1, -1}), std::invalid_argument);

  const Blobs blobs = make_blobs(20, 3, 1.5);
  std::vector<Point> pts(blobs.x.begin(), blobs.x.begin() + 40);
  std::vector<int> t(40);
  for (std::size_t i = 0; i < 40; ++i) t[i] = blobs.y[i] == "a" ? 1 : -1;
  const DualSolution capped = solve_dual(KernelMatrix::rbf(pts, 1.0), t, {10.0, 1e-3, 3});
  CHECK_FALSE(capped.converged);
  CHECK(capped.iterations == 3);
  CHECK(capped.max_violation > 1e-3);
}

TEST_CASE("predict_binary: margins, ties and label flip") {
  const std::vector<Point> pts{{-1.0, 0.0}, {1.0, 0.0}};
  const std::vector<int> t{1, -1};
  DualSolution s;
  const BinarySvmModel m = train_binary(pts, t, 0.5, {1e6}, &s);
  for (std::size_t i = 0; i < 2; ++i) {
    REQUIRE(s.alpha[i] > 0.0);
    CHECK(t[i] * predict_binary(m, pts[i]).score >= 1.0 - 1e-3);
  }
  const BinaryPrediction mid = predict_binary(m, Point{0.0, 0.0});
  CHECK(std::abs(mid.score) < 1e-12);
  BinarySvmModel exact = m;
  exact.bias = 0.0;
  CHECK(predict_binary(exact, Point{0.0, 0.0}).score == 0.0);
  CHECK(predict_binary(exact, Point{0.0, 0.0}).label == 1);

  const Blobs blobs = make_blobs(15, 9, 0.8);
  std::vector<Point> x;
  std::vector<int> pos, neg;
  for (std::size_t i = 0; i < blobs.x.size(); ++i) {
    if (blobs.y[i] == "c") continue;
    x.push_back(blobs.x[i]);
    pos.push_back(blobs.y[i] == "a" ? 1 : -1);
    neg.push_back(-pos.back());
  }
  const BinarySvmModel a = train_binary(x, pos, 0.5, {1.0});
  const BinarySvmModel b = train_binary(x, neg, 0.5, {1.0});
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> u(-2.0, 6.0);
  for (int i = 0; i < 50; ++i) {
    const Point q{u(rng), u(rng)};
    CHECK(predict_binary(b, q).score == -predict_binary(a, q).score);
  }
  CHECK_THROWS_AS(predict_binary(a, Point{1.0}), std::invalid_argument);
}

TEST_CASE("train_binary: separable data is fit exactly with large C") {
  const Blobs blobs = make_blobs(20, 17, 0.4);
  std::vector<Point> x;
  std::vector<int> t;
  for (std::size_t i = 0; i < blobs.x.size(); ++i) {
    if (blobs.y[i] == "c") continue;
    x.push_back(blobs.x[i]);
    t.push_back(blobs.y[i] == "a" ? 1 : -1);
  }
  const BinarySvmModel m = train_binary(x, t, 0.5, {1e4});
  for (std::size_t i = 0; i < x.size(); ++i) CHECK(predict_binary(m, x[i]).label == t[i]);
}

TEST_CASE("train_ovo: pair counts and blob accuracy") {
  std::vector<Point> x;
  std::vector<std::string> y;
  for (int c = 0; c < 10; ++c) {
    for (int i = 0; i < 3; ++i) {
      x.push_back({static_cast<double>(c), static_cast<double>(i)});
      y.push_back("g" + std::to_string(c));
    }
  }
  CHECK(train_ovo(x, y).pairs.size() == 45);

  const std::vector<Point> two_x(x.begin(), x.begin() + 6);
  const std::vector<std::string> two_y(y.begin(), y.begin() + 6);
  const TrainedOvoModel two = train_ovo(two_x, two_y);
  REQUIRE(two.pairs.size() == 1);
  for (const auto& p : two_x) {
    const Point z = two.stats.apply(p);
    const int label = predict_binary(two.pairs[0].model, z).label;
    CHECK(predict_ovo(two, p) == two.class_labels[label == 1 ? 0 : 1]);
  }

  const Blobs blobs = make_blobs(20, 5);
  const TrainedOvoModel model = train_ovo(blobs.x, blobs.y);
  CHECK(model.class_labels == std::vector<std::string>{"a", "b", "c"});
  CHECK(model.gamma == doctest::Approx(0.5));  // 1 / (d * 1) after standardization
  std::size_t correct = 0;
  for (std::size_t i = 0; i < blobs.x.size(); ++i) correct += predict_ovo(model, blobs.x[i]) == blobs.y[i];
  CHECK(static_cast<double>(correct) / static_cast<double>(blobs.x.size()) >= 0.95);

  const OvoDecision deep = decide_ovo(model, Point{4.0, 0.0});
  CHECK(model.class_labels[deep.winner] == "b");
  CHECK(deep.votes[deep.winner] == 2);

  CHECK_THROWS_AS(train_ovo({{1.0}, {2.0}}, {"a", "a"}), std::invalid_argument);
  CHECK_THROWS_AS(train_ovo({{1.0}, {2.0}}, {"a"}), std::invalid_argument);
}

TEST_CASE("predict_ovo: a three-way vote tie goes to the largest summed score") {
  TrainedOvoModel m;
  m.class_labels = {"x", "y", "z"};
  m.stats = {{0.0}, {1.0}};
  m.gamma = 1.0;
  auto bias_only = [](double b) {
    BinarySvmModel model;
    model.bias = b;
    return model;
  };
  m.pairs = {{0, 1, bias_only(0.5)}, {0, 2, bias_only(-0.3)}, {1, 2, bias_only(0.9)}};
  for (int run = 0; run < 3; ++run) {
    const OvoDecision d = decide_ovo(m, Point{0.0});
    CHECK(d.votes == std::vector<int>{1, 1, 1});
    CHECK(m.class_labels[d.winner] == "y");
  }
  // Equal sums fall back to label order.
  m.pairs = {{0, 1, bias_only(0.5)}, {0, 2, bias_only(-0.5)}, {1, 2, bias_only(0.5)}};
  CHECK(predict_ovo(m, Point{0.0}) == "x");
}

TEST_CASE("property: predictions are stable under training-order permutations") {
  const Blobs blobs = make_blobs(20, 23, 0.5);
  const TrainedOvoModel ref = train_ovo(blobs.x, blobs.y);
  std::vector<std::size_t> order(blobs.x.size());
  std::iota(order.begin(), order.end(), 0);
  std::mt19937_64 rng(77);
  std::uniform_real_distribution<double> u(-1.0, 5.0);
  std::vector<Point> probes;
  for (int i = 0; i < 40; ++i) probes.push_back({u(rng), u(rng)});
  for (int trial = 0; trial < 5; ++trial) {
    std::shuffle(order.begin(), order.end(), rng);
    Blobs shuffled;
    for (std::size_t i : order) {
      shuffled.x.push_back(blobs.x[i]);
      shuffled.y.push_back(blobs.y[i]);
    }
    const TrainedOvoModel m = train_ovo(shuffled.x, shuffled.y);
    for (const auto& q : probes) {
      const OvoDecision a = decide_ovo(ref, q), b = decide_ovo(m, q);
      // Points that sit on a decision boundary may flip within the solver tolerance.
      bool near_boundary = false;
      const Point z = ref.stats.apply(q);
      for (const auto& p : ref.pairs) near_boundary = near_boundary || std::abs(p.model.decision(z)) < 0.05;
      if (!near_boundary) CHECK(a.winner == b.winner);
    }
  }
}

TEST_CASE("model serialization round trip") {
  const Blobs blobs = make_blobs(10, 31);
  const TrainedOvoModel m = train_ovo(blobs.x, blobs.y);
  const std::string text = serialize_model(m);
  CHECK(text.rfind("drcgenre-ovo-model 1\n", 0) == 0);
  const TrainedOvoModel back = deserialize_model(text);
  CHECK(serialize_model(back) == text);
  for (const auto& q : blobs.x) {
    const OvoDecision a = decide_ovo(m, q), b = decide_ovo(back, q);
    CHECK(a.winner == b.winner);
    CHECK(a.score_sums == b.score_sums);
  }
  CHECK_THROWS_AS(deserialize_model("drcgenre-ovo-model 2\n"), std::runtime_error);
  CHECK_THROWS_AS(deserialize_model("something else"), std::runtime_error);
}
