#include <gtest/gtest.h>

#include <cmath>
#include <vector>

#include "test_support.hpp"

namespace efl {
namespace {

// Brute-force NMI: explicit contingency table over label values 0..9.
double nmi_oracle(const std::vector<int>& a, const std::vector<int>& b) {
  double table[10][10] = {};
  double ra[10] = {}, rb[10] = {};
  const double n = static_cast<double>(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) table[a[i]][b[i]] += 1, ra[a[i]] += 1, rb[b[i]] += 1;
  double mi = 0, ha = 0, hb = 0;
  for (int i = 0; i < 10; ++i) {
    if (ra[i] > 0) ha -= ra[i] / n * std::log(ra[i] / n);
    if (rb[i] > 0) hb -= rb[i] / n * std::log(rb[i] / n);
    for (int j = 0; j < 10; ++j)
      if (table[i][j] > 0)
        mi += table[i][j] / n * std::log((table[i][j] / n) / ((ra[i] / n) * (rb[j] / n)));
  }
  return mi / std::sqrt(ha * hb);
}

// ---- client_disagreement --------------------------------------------------------

TEST(ClientDisagreement, EqualLossesGiveZero) {
  EXPECT_EQ(client_disagreement(std::vector<double>{0.5, 0.5}), 0.0);
}

TEST(ClientDisagreement, SinglePair) {
  EXPECT_NEAR(client_disagreement(std::vector<double>{0.5, 0.7}), 0.2, 1e-15);
}

TEST(ClientDisagreement, ExhaustivePairs) {
  const std::vector<double> l{0, 1, 2};
  double pairs = 0, sum = 0;
  for (std::size_t i = 0; i < l.size(); ++i)
    for (std::size_t j = i + 1; j < l.size(); ++j) sum += std::abs(l[i] - l[j]), pairs += 1;
  EXPECT_NEAR(client_disagreement(l), sum / pairs, 1e-15);
  EXPECT_NEAR(client_disagreement(l), 4.0 / 3.0, 1e-15);
}

TEST(ClientDisagreement, NeedsTwoParticipants) {
  EXPECT_THROW(client_disagreement(std::vector<double>{1.0}), ContractViolation);
}

TEST(ClientDisagreement, PermutationInvariantAndHomogeneous) {
  Rng rng(1);
  std::uniform_real_distribution<double> u(0, 5);
  for (int t = 0; t < 100; ++t) {
    std::vector<double> l(2 + t % 9);
    for (double& v : l) v = u(rng);
    const double cd = client_disagreement(l);
    EXPECT_GE(cd, 0.0);
    auto p = l;
    std::shuffle(p.begin(), p.end(), rng);
    EXPECT_NEAR(client_disagreement(p), cd, 1e-12);
    const double alpha = u(rng);
    for (double& v : p) v *= alpha;
    EXPECT_NEAR(client_disagreement(p), alpha * cd, 1e-12 * std::max(1.0, alpha * cd));
  }
}

// ---- sigma_acc ------------------------------------------------------------------

TEST(SigmaAcc, AllAtGlobalIsZero) {
  EXPECT_EQ(sigma_acc(std::vector<double>{0.7, 0.7, 0.7}, 0.7), 0.0);
}

TEST(SigmaAcc, SymmetricDeviation) {
  EXPECT_NEAR(sigma_acc(std::vector<double>{1, 0}, 0.5), 0.5, 1e-15);
}

TEST(SigmaAcc, DirectFormula) {
  const std::vector<double> a{0.9, 0.8, 0.7};
  const double direct = std::sqrt(((0.1 * 0.1) + 0.0 + (0.1 * 0.1)) / 3.0);
  EXPECT_NEAR(sigma_acc(a, 0.8), direct, 1e-12);
  EXPECT_NEAR(sigma_acc(a, 0.8), 0.08165, 1e-5);
}

TEST(SigmaAcc, ZeroOnlyWhenAllEqualGlobal) {
  EXPECT_GT(sigma_acc(std::vector<double>{0.7, 0.7, 0.71}, 0.7), 0.0);
  EXPECT_THROW(sigma_acc(std::vector<double>{}, 0.5), ContractViolation);
}

// ---- nmi ------------------------------------------------------------------------

TEST(Nmi, IdenticalPartitions) {
  const std::vector<int> a{0, 0, 1, 1, 2};
  EXPECT_DOUBLE_EQ(nmi(a, a), 1.0);
}

TEST(Nmi, ConstantVersusBalanced) {
  EXPECT_EQ(nmi(std::vector<int>{0, 0, 0, 0}, std::vector<int>{0, 0, 1, 1}), 0.0);
}

TEST(Nmi, BothConstant) {
  EXPECT_EQ(nmi(std::vector<int>{3, 3}, std::vector<int>{1, 1}), 1.0);
}

TEST(Nmi, IndependentPartitions) {
  EXPECT_NEAR(nmi(std::vector<int>{0, 0, 1, 1}, std::vector<int>{0, 1, 0, 1}), 0.0, 1e-15);
}

TEST(Nmi, ContingencyOracle) {
  const std::vector<int> p{0, 0, 1, 1}, t{0, 0, 1, 2};
  const double oracle = nmi_oracle(p, t);
  EXPECT_NEAR(oracle, 1.0 / std::sqrt(1.5), 1e-15);  // I = ln2, H = ln2 and 1.5 ln2
  EXPECT_NEAR(nmi(p, t), oracle, 1e-12);
}

TEST(Nmi, RandomAgainstOracleSymmetricAndBounded) {
  Rng rng(2);
  for (int t = 0; t < 200; ++t) {
    const std::size_t n = 2 + t % 20;
    std::vector<int> a(n), b(n);
    for (std::size_t i = 0; i < n; ++i) a[i] = rng() % 4, b[i] = rng() % 5;
    const double v = nmi(a, b);
    EXPECT_GE(v, 0.0);
    EXPECT_LE(v, 1.0);
    EXPECT_NEAR(v, nmi(b, a), 1e-12);
    std::set<int> sa(a.begin(), a.end()), sb(b.begin(), b.end());
    if (sa.size() > 1 && sb.size() > 1) {
      EXPECT_NEAR(v, nmi_oracle(a, b), 1e-12);
    }
    std::vector<int> relabel(n);
    for (std::size_t i = 0; i < n; ++i) relabel[i] = 7 - a[i];
    EXPECT_NEAR(nmi(relabel, b), v, 1e-12);
  }
}

TEST(Nmi, ArithmeticVariant) {
  const std::vector<int> p{0, 0, 1, 1}, t{0, 0, 1, 2};
  EXPECT_NEAR(nmi(p, t, NmiNorm::arithmetic), std::log(2.0) / (0.5 * 2.5 * std::log(2.0)), 1e-12);
}

TEST(Nmi, LengthMismatch) {
  EXPECT_THROW(nmi(std::vector<int>{0, 1}, std::vector<int>{0}), ContractViolation);
}

// ---- evaluate -------------------------------------------------------------------

Dataset separable_pool(std::size_t classes, std::size_t per, Rng& rng) {
  return generate_synthetic(classes, classes, per, 50.0, 0.1, rng);
}

TEST(Evaluate, PerfectClassifier) {
  Rng rng(3);
  const Dataset ds = separable_pool(3, 20, rng);
  // Linear model with weights = class directions: logits = separation * <u_c, x>.
  const Matrix u = class_directions(3, 3);
  ModelParams p{{3, 3}, std::vector<double>(12, 0.0)};
  for (std::size_t c = 0; c < 3; ++c)
    for (std::size_t j = 0; j < 3; ++j) p.values[c * 3 + j] = u(c, j);
  std::vector<Dataset> shards{ds.subset(std::vector<std::size_t>{0, 1, 2}),
                              ds.subset(std::vector<std::size_t>{25, 45})};
  const auto ev = evaluate(p, shards, ds);
  EXPECT_EQ(ev.global_acc, 1.0);
  for (double a : ev.client_accs) EXPECT_EQ(a, 1.0);
  EXPECT_EQ(sigma_acc(ev.client_accs, ev.global_acc), 0.0);
}

TEST(Evaluate, ZeroNetIsUniformPredictor) {
  Rng rng(4);
  const Dataset ds = separable_pool(10, 30, rng);
  const auto p = zero_mlp({10, 5, 10});
  const auto sc = score(p, ds);
  EXPECT_NEAR(sc.loss, std::log(10.0), 1e-12);
  // Ties go to class 0, so exactly the class-0 share is correct.
  EXPECT_NEAR(sc.accuracy, 0.1, 3 * std::sqrt(0.1 * 0.9 / 300.0));
}

TEST(Evaluate, SingleSampleAccuracyIsBinary) {
  Rng rng(5);
  const Dataset ds = separable_pool(4, 5, rng);
  Rng init(1);
  const auto p = init_mlp({4, 6, 4}, init);
  for (std::size_t i = 0; i < ds.size(); ++i) {
    const double a = score(p, ds.subset(std::vector<std::size_t>{i})).accuracy;
    EXPECT_TRUE(a == 0.0 || a == 1.0);
  }
}

TEST(Evaluate, RejectsEmptyShard) {
  Rng rng(6);
  const Dataset ds = separable_pool(2, 5, rng);
  std::vector<Dataset> shards{ds.subset(std::vector<std::size_t>{})};
  EXPECT_THROW(evaluate(zero_mlp({2, 2}), shards, ds), ContractViolation);
}

}  // namespace
}  // namespace efl
