#include <gtest/gtest.h>

#include <cmath>
#include <functional>
#include <random>

#include "lrsdp/sensing.hpp"
#include "oracles.hpp"

using namespace lrsdp;

namespace {

SensingInstance small_instance(Index p = 5, Index r = 2, Index n = 40, std::uint64_t seed = 1) {
  return SensingInstance::generate({p, r, n, seed, std::nullopt});
}

std::vector<Eigen::MatrixXd> dense_measurements(const SensingInstance& inst) {
  std::vector<Eigen::MatrixXd> out;
  for (Index i = 0; i < inst.num_samples(); ++i) out.push_back(inst.measurement(i).mat());
  return out;
}

std::vector<Index> all_indices(Index n) {
  std::vector<Index> v(static_cast<std::size_t>(n));
  for (Index i = 0; i < n; ++i) v[static_cast<std::size_t>(i)] = i;
  return v;
}

// Calls fn on every sorted b-subset of {0..n-1}.
void for_each_subset(Index n, Index b, const std::function<void(const std::vector<Index>&)>& fn) {
  std::vector<Index> idx(static_cast<std::size_t>(b));
  for (Index k = 0; k < b; ++k) idx[static_cast<std::size_t>(k)] = k;
  while (true) {
    fn(idx);
    Index k = b - 1;
    while (k >= 0 && idx[static_cast<std::size_t>(k)] == n - b + k) --k;
    if (k < 0) return;
    ++idx[static_cast<std::size_t>(k)];
    for (Index j = k + 1; j < b; ++j) idx[static_cast<std::size_t>(j)] = idx[static_cast<std::size_t>(j - 1)] + 1;
  }
}

}  // namespace

TEST(Sensing, MeasurementsAreSymmetric) {
  const auto inst = small_instance();
  for (Index i = 0; i < inst.num_samples(); ++i) {
    const Eigen::MatrixXd a = Eigen::Map<const Eigen::MatrixXd>(
        inst.measurement_rows().row(i).data(), inst.dim(), inst.dim());
    EXPECT_EQ((a - a.transpose()).norm(), 0.0);
  }
}

TEST(Sensing, ObservationsMatchPlantedOptimum) {
  const auto inst = small_instance(6, 2, 30, 9);
  const auto a = dense_measurements(inst);
  const Eigen::MatrixXd xs = inst.planted_factor().mat() * inst.planted_factor().mat().transpose();
  for (Index i = 0; i < inst.num_samples(); ++i) {
    const double ip = a[static_cast<std::size_t>(i)].cwiseProduct(xs).sum();
    EXPECT_NEAR(inst.observations()(i), ip, 1e-10 * (1.0 + std::abs(ip)));
  }
  EXPECT_NEAR(inst.value_full(inst.planted_matrix()), 0.0, 1e-20);
  EXPECT_LT(inst.grad_full(inst.planted_matrix()).norm(), 1e-10);
}

TEST(Sensing, GenerationIsDeterministic) {
  const auto a = small_instance(5, 2, 20, 77);
  const auto b = small_instance(5, 2, 20, 77);
  const auto c = small_instance(5, 2, 20, 78);
  EXPECT_EQ(a.measurement_rows(), b.measurement_rows());
  EXPECT_EQ(a.observations(), b.observations());
  EXPECT_EQ(a.L_hat(), b.L_hat());
  EXPECT_EQ(a.mu_hat(), b.mu_hat());
  EXPECT_NE(a.measurement_rows(), c.measurement_rows());
}

TEST(Sensing, ValueMatchesNaiveSum) {
  const auto inst = small_instance(4, 1, 25, 3);
  const auto a = dense_measurements(inst);
  std::mt19937_64 gen(5);
  for (int trial = 0; trial < 10; ++trial) {
    const Eigen::MatrixXd x = oracle::random_symmetric(4, gen);
    const double ref = oracle::naive_loss(a, inst.observations(), x, all_indices(25));
    EXPECT_NEAR(inst.value_full(SymMatrix::from_upper(x)), ref, 1e-10 * (1.0 + ref));
    const std::vector<Index> batch{2, 7, 11};
    const double refb = oracle::naive_loss(a, inst.observations(), x, batch);
    EXPECT_NEAR(inst.value_batch(SymMatrix::from_upper(x), batch), refb, 1e-10 * (1.0 + refb));
  }
}

TEST(Sensing, GradientMatchesCentralDifferences) {
  const auto inst = small_instance(5, 2, 30, 4);
  std::mt19937_64 gen(6);
  for (int trial = 0; trial < 10; ++trial) {
    const SymMatrix x = SymMatrix::from_upper(oracle::random_symmetric(5, gen));
    const SymMatrix h = SymMatrix::from_upper(oracle::random_symmetric(5, gen));
    const double fd = oracle::central_difference(
        [&](double e) { return inst.value_full(x + e * h); }, 1e-5);
    const double an = inst.grad_full(x).inner(h);
    EXPECT_NEAR(an, fd, 1e-5 * std::max(1.0, std::abs(an)));

    const std::vector<Index> batch{0, 4, 9, 17};
    const double fdb = oracle::central_difference(
        [&](double e) { return inst.value_batch(x + e * h, batch); }, 1e-5);
    const double anb = inst.grad_batch(x, batch).inner(h);
    EXPECT_NEAR(anb, fdb, 1e-5 * std::max(1.0, std::abs(anb)));
  }
}

TEST(Sensing, FactoredGradientMatchesCentralDifferences) {
  const auto inst = small_instance(5, 2, 30, 12);
  std::mt19937_64 gen(13);
  for (int trial = 0; trial < 10; ++trial) {
    const Eigen::MatrixXd u = oracle::random_matrix(5, 2, gen);
    const Eigen::MatrixXd d = oracle::random_matrix(5, 2, gen);
    auto g = [&](double e) {
      const Eigen::MatrixXd v = u + e * d;
      return inst.value_full(SymMatrix::from_upper(v * v.transpose()));
    };
    const double fd = oracle::central_difference(g, 1e-5);
    const Eigen::MatrixXd grad = 2.0 * inst.grad_full(Factor(u).gram()).mat() * u;
    const double an = grad.cwiseProduct(d).sum();
    EXPECT_NEAR(an, fd, 1e-5 * std::max(1.0, std::abs(an)));
  }
}

TEST(Sensing, BatchGradientIsUnbiasedByEnumeration) {
  for (Index n : {1, 4, 8}) {
    const auto inst = small_instance(3, 1, n, static_cast<std::uint64_t>(n));
    std::mt19937_64 gen(static_cast<std::uint64_t>(n) + 100);
    const SymMatrix x = SymMatrix::from_upper(oracle::random_symmetric(3, gen));
    const SymMatrix full = inst.grad_full(x);
    for (Index b = 1; b <= std::min<Index>(3, n); ++b) {
      Eigen::MatrixXd acc = Eigen::MatrixXd::Zero(3, 3);
      long count = 0;
      for_each_subset(n, b, [&](const std::vector<Index>& s) {
        acc += inst.grad_batch(x, s).mat();
        ++count;
      });
      acc /= static_cast<double>(count);
      EXPECT_LT((acc - full.mat()).norm(), 1e-12 * (1.0 + full.norm())) << "n=" << n << " b=" << b;
    }
  }
}

TEST(Sensing, BatchDifferenceEqualsDifferenceOfBatchGradients) {
  const auto inst = small_instance(4, 2, 20, 21);
  std::mt19937_64 gen(22);
  const SymMatrix x = SymMatrix::from_upper(oracle::random_symmetric(4, gen));
  const SymMatrix y = SymMatrix::from_upper(oracle::random_symmetric(4, gen));
  for (const std::vector<Index>& batch :
       {std::vector<Index>{3}, std::vector<Index>{1, 5, 19}, all_indices(20)}) {
    const SymMatrix direct = inst.grad_batch(x, batch) - inst.grad_batch(y, batch);
    EXPECT_LT((inst.grad_batch_diff(x, y, batch) - direct).norm(), 1e-12 * (1.0 + direct.norm()));
  }
}

TEST(Sensing, FullBatchDelegatesToFullGradient) {
  const auto inst = small_instance(4, 2, 12, 8);
  std::mt19937_64 gen(1);
  const SymMatrix x = SymMatrix::from_upper(oracle::random_symmetric(4, gen));
  EXPECT_EQ(inst.grad_batch(x, all_indices(12)).mat(), inst.grad_full(x).mat());
}

TEST(Sensing, BatchContract) {
  const auto inst = small_instance(3, 1, 5, 2);
  const SymMatrix x = SymMatrix::zero(3);
  EXPECT_THROW(inst.grad_batch(x, std::vector<Index>{}), ContractViolation);
  EXPECT_THROW(inst.grad_batch(x, std::vector<Index>{2, 1}), ContractViolation);
  EXPECT_THROW(inst.grad_batch(x, std::vector<Index>{1, 1}), ContractViolation);
  EXPECT_THROW(inst.grad_batch(x, std::vector<Index>{5}), ContractViolation);
  EXPECT_THROW(inst.grad_full(SymMatrix::zero(4)), ContractViolation);
  EXPECT_THROW(SensingInstance::generate({3, 4, 5, 0, std::nullopt}), ContractViolation);
  EXPECT_THROW(SensingInstance::generate({3, 1, 0, 0, std::nullopt}), ContractViolation);
}

TEST(Sensing, IdentityMeasurementHasCurvatureP) {
  for (Index p : {2, 5, 9}) {
    std::vector<SymMatrix> a{SymMatrix::identity(p)};
    Eigen::VectorXd y(1);
    y << static_cast<double>(p);
    const auto inst = SensingInstance::from_measurements(a, y, Factor(Eigen::MatrixXd::Identity(p, 1)));
    EXPECT_NEAR(inst.L_hat(), static_cast<double>(p), 1e-8 * static_cast<double>(p));
  }
}

TEST(Sensing, LHatMatchesExplicitOperator) {
  for (std::uint64_t seed : {1, 2, 3}) {
    const auto inst = small_instance(8, 2, 100, seed);
    const auto ev = oracle::jacobi_eigenvalues(oracle::gram_operator(dense_measurements(inst)));
    EXPECT_NEAR(inst.L_hat(), ev(0), 1e-6 * ev(0));
    EXPECT_GT(inst.mu_hat(), 0.0);
    EXPECT_LE(inst.mu_hat(), inst.L_hat());
    // Sampled low-rank directions cannot go below the full operator minimum.
    EXPECT_GE(inst.mu_hat(), ev(ev.size() - 1) - 1e-9);
  }
}

TEST(Sensing, FullyDeterminedInstanceIsStronglyConvex) {
  const auto inst = small_instance(4, 1, 40, 5);
  const auto ev = oracle::jacobi_eigenvalues(oracle::gram_operator(dense_measurements(inst)));
  EXPECT_GT(ev(ev.size() - 1), 0.0);
}

TEST(Sensing, ObjectiveIsConvex) {
  const auto inst = small_instance(5, 2, 15, 30);
  std::mt19937_64 gen(31);
  std::uniform_real_distribution<double> ud(0.0, 1.0);
  for (int trial = 0; trial < 50; ++trial) {
    const SymMatrix x = SymMatrix::from_upper(oracle::random_symmetric(5, gen));
    const SymMatrix y = SymMatrix::from_upper(oracle::random_symmetric(5, gen));
    const double t = ud(gen);
    const double lhs = inst.value_full(t * x + (1.0 - t) * y);
    const double rhs = t * inst.value_full(x) + (1.0 - t) * inst.value_full(y);
    EXPECT_LE(lhs, rhs + 1e-10 * (1.0 + std::abs(rhs)));
  }
}

TEST(Sensing, LowRankCurvatureLiesBetweenOperatorBounds) {
  const auto inst = small_instance(6, 2, 60, 40);
  const Eigen::MatrixXd op = oracle::gram_operator(dense_measurements(inst));
  const auto ev = oracle::jacobi_eigenvalues(op);
  std::mt19937_64 gen(41);
  for (int trial = 0; trial < 50; ++trial) {
    const Eigen::MatrixXd g1 = oracle::random_matrix(6, 2, gen);
    const Eigen::MatrixXd g2 = oracle::random_matrix(6, 2, gen);
    const SymMatrix d = SymMatrix::from_upper(g1 * g1.transpose() - g2 * g2.transpose());
    // <D, H D> with H the Hessian, computed through the gradient difference.
    const double q = inst.grad_full(d).inner(d) - inst.grad_full(SymMatrix::zero(6)).inner(d);
    const double rq = q / d.squared_norm();
    EXPECT_LE(rq, ev(0) * (1.0 + 1e-9));
    EXPECT_GE(rq, ev(ev.size() - 1) * (1.0 - 1e-9));
  }
}

TEST(Sensing, SpectrumIsForced) {
  SensingParams params{6, 3, 30, 17, std::vector<double>{1.0, 4.0, 2.5}};
  const auto inst = SensingInstance::generate(params);
  const auto ev = oracle::jacobi_eigenvalues(inst.planted_matrix().mat());
  EXPECT_NEAR(ev(0), 4.0, 1e-10);
  EXPECT_NEAR(ev(1), 2.5, 1e-10);
  EXPECT_NEAR(ev(2), 1.0, 1e-10);
  EXPECT_NEAR(ev(3), 0.0, 1e-10);
  params.spectrum = std::vector<double>{1.0, -1.0, 2.0};
  EXPECT_THROW(SensingInstance::generate(params), ContractViolation);
  params.spectrum = std::vector<double>{1.0};
  EXPECT_THROW(SensingInstance::generate(params), ContractViolation);
}

TEST(Sensing, ExplicitMeasurementsWithoutPlantedOptimum) {
  std::vector<SymMatrix> a{SymMatrix::identity(2), SymMatrix::identity(2)};
  Eigen::VectorXd y(2);
  y << 1.0, 3.0;
  const auto inst = SensingInstance::from_measurements(a, y);
  EXPECT_FALSE(inst.has_planted());
  EXPECT_THROW(inst.planted_factor(), ContractViolation);
  EXPECT_NEAR(inst.value_full(SymMatrix::zero(2)), (1.0 + 9.0) / 4.0, 1e-15);
}

TEST(Serialization, RoundTrip) {
  for (const SensingParams& params :
       {SensingParams{2, 1, 4, 0, std::nullopt}, SensingParams{100, 5, 1000, 42, std::nullopt},
        SensingParams{12, 2, 80, 18446744073709551615ull, std::vector<double>{1.0, 0.1}}}) {
    const std::string text = serialize_params(params);
    EXPECT_EQ(text.rfind("LRSDP1\n", 0), 0u);
    const SensingParams back = parse_params(text);
    EXPECT_EQ(back, params);
    EXPECT_EQ(serialize_params(back), text);
  }
}

TEST(Serialization, RegeneratedInstanceIsIdentical) {
  const SensingParams params{3, 1, 7, 5, std::vector<double>{0.3}};
  const auto a = SensingInstance::generate(params);
  const auto b = SensingInstance::generate(parse_params(serialize_params(params)));
  EXPECT_EQ(a.measurement_rows(), b.measurement_rows());
  EXPECT_EQ(a.planted_factor().mat(), b.planted_factor().mat());
}

TEST(Serialization, RejectsMalformedFiles) {
  EXPECT_THROW(parse_params("LRSDP2\np 2\n"), ContractViolation);
  EXPECT_THROW(parse_params("LRSDP1\np 2\nr 1\nn 4\n"), ContractViolation);
  EXPECT_THROW(parse_params("LRSDP1\np 2\nr 1\nn 4\nseed 0\nspectrum x\n"), ContractViolation);
  EXPECT_THROW(parse_params("LRSDP1\np 2\nr 1\nn 4\nseed 0\nspectrum -\ncolour blue\n"), ContractViolation);
}
