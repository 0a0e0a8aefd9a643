#include "cmest/ustat.hpp"
#include "support.hpp"

#include <gtest/gtest.h>

#include <set>

using namespace cmest;
using cmest::testing::vec;

namespace {

Matrix row(std::initializer_list<double> xs) { return vec(xs).transpose(); }

Matrix pts(std::initializer_list<Vector> xs) {
    Matrix m(xs.begin()->size(), static_cast<Eigen::Index>(xs.size()));
    Eigen::Index j = 0;
    for (const auto& x : xs) m.col(j++) = x;
    return m;
}

const GiniKernel kGiniAbsDiffIdentity{1.0, ScalarLoss{ScalarLoss::Kind::square, 1.0}};

}  // namespace

TEST(UStat, RiskExamples) {
    // Raw mean of |x1 - x2| over the 3 pairs of {0,1,2}.
    double acc = 0;
    SubsetPlan::complete(3, 2).for_each([&](const std::vector<Eigen::Index>& idx) {
        acc += std::abs(static_cast<double>(idx[0]) - static_cast<double>(idx[1]));
    });
    EXPECT_DOUBLE_EQ(acc / 3.0, 4.0 / 3.0);

    EXPECT_DOUBLE_EQ(u_risk(OjaKernel{2}, pts({vec({0, 0}), vec({1, 0})}), vec({0, 1})), 0.5);
    EXPECT_DOUBLE_EQ(u_risk(MoMKernel{2}, row({0, 2, 4}), vec({2})), 2.0 / 3.0);
}

TEST(UStat, SubgradExamples) {
    EXPECT_DOUBLE_EQ(u_subgrad(MoMKernel{2}, row({0, 2, 4}), vec({10}))[0], 1.0);
    EXPECT_DOUBLE_EQ(u_subgrad(kGiniAbsDiffIdentity, row({0, 1}), vec({0}))[0], -2.0);
    EXPECT_THROW(u_risk(MoMKernel{3}, row({0, 2}), vec({0})), InvalidArgument);
}

TEST(UStat, KernelSymmetry) {
    CounterRng rng(1);
    for (int rep = 0; rep < 50; ++rep) {
        const Matrix t = Matrix::NullaryExpr(3, 3, [&] { return rng.normal(); });
        Matrix swapped = t;
        swapped.col(0).swap(swapped.col(2));
        const Vector th = rng.normal_vector(3);
        EXPECT_NEAR(kernel_eval(OjaKernel{3}, t, th), kernel_eval(OjaKernel{3}, swapped, th), 1e-12);
        EXPECT_LE((kernel_subgrad(OjaKernel{3}, t, th) - kernel_subgrad(OjaKernel{3}, swapped, th)).norm(), 1e-12);
    }
}

TEST(UStat, OjaMatchesBorderedDeterminant) {
    CounterRng rng(2);
    for (int rep = 0; rep < 50; ++rep) {
        const Matrix t = Matrix::NullaryExpr(2, 2, [&] { return rng.normal(); });
        const Vector th = rng.normal_vector(2);
        Matrix bordered(3, 3);
        bordered.row(0).setOnes();
        bordered.block(1, 0, 2, 2) = t;
        bordered.block(1, 2, 2, 1) = th;
        EXPECT_NEAR(kernel_eval(OjaKernel{2}, t, th), std::abs(bordered.determinant()) / 2.0, 1e-12);
    }
}

TEST(UStat, KernelsConvexWithValidSubgradients) {
    CounterRng rng(3);
    const std::vector<UKernel> kernels = {OjaKernel{2}, GiniKernel{1.0, {ScalarLoss::Kind::square, 1}},
                                          GiniKernel{2.0, {ScalarLoss::Kind::huber, 0.5}},
                                          GiniKernel{1.0, {ScalarLoss::Kind::abs, 1}}, MoMKernel{3}};
    for (const auto& k : kernels) {
        const Eigen::Index dd = std::holds_alternative<OjaKernel>(k) ? 2 : 1;
        for (int rep = 0; rep < 300; ++rep) {
            const Matrix t = Matrix::NullaryExpr(dd, order(k), [&] { return rng.normal(); });
            const Vector a = rng.normal_vector(param_dim(k)), b = rng.normal_vector(param_dim(k));
            const double fa = kernel_eval(k, t, a), fb = kernel_eval(k, t, b);
            EXPECT_GE(fb, fa + kernel_subgrad(k, t, a).dot(b - a) - 1e-9 * (1 + std::abs(fa) + std::abs(fb)));
            EXPECT_LE(kernel_eval(k, t, 0.5 * (a + b)), 0.5 * (fa + fb) + 1e-9 * (1 + std::abs(fa) + std::abs(fb)));
        }
    }
}

TEST(UStat, ColexUnrankEnumeratesInOrder) {
    std::vector<std::vector<Eigen::Index>> seen;
    SubsetPlan::complete(7, 3).for_each([&](const std::vector<Eigen::Index>& idx) { seen.push_back(idx); });
    ASSERT_EQ(seen.size(), 35u);
    std::vector<Eigen::Index> out;
    for (std::uint64_t r = 0; r < 35; ++r) {
        unrank_colex(r, 3, 7, out);
        EXPECT_EQ(out, seen[r]);
    }
    EXPECT_EQ(binomial(2000, 2), 1999000u);
    EXPECT_EQ(binomial(5, 7), 0u);
}

TEST(UStat, ExhaustiveBudgetEqualsComplete) {
    CounterRng rng(4);
    for (Eigen::Index n : {4, 7, 12}) {
        const Matrix data = Matrix::NullaryExpr(2, n, [&] { return rng.normal(); });
        const Vector th = rng.normal_vector(2);
        const double full = u_risk(OjaKernel{2}, data, th);
        const std::uint64_t total = binomial(static_cast<std::uint64_t>(n), 2);
        EXPECT_EQ(u_risk(OjaKernel{2}, data, th, total, 99), full);
        EXPECT_EQ(u_subgrad(OjaKernel{2}, data, th, total, 99), u_subgrad(OjaKernel{2}, data, th));
        EXPECT_NE(u_risk(OjaKernel{2}, data, th, total - 1, 99), full);
    }
}

TEST(UStat, EnumerationCap) {
    EXPECT_THROW(SubsetPlan::complete(3000, 2), ResourceLimit);
    EXPECT_NO_THROW(SubsetPlan::complete(2000, 2));
    const SubsetPlan p = SubsetPlan::sampled(3000, 2, 500, 1);
    EXPECT_EQ(p.size(), 500u);
    EXPECT_TRUE(p.incomplete());
    std::set<std::vector<Eigen::Index>> distinct;
    p.for_each([&](const std::vector<Eigen::Index>& idx) {
        EXPECT_LT(idx[0], idx[1]);
        distinct.insert(idx);
    });
    EXPECT_EQ(distinct.size(), 500u);
}

TEST(UStat, ObjectiveMatchesDirectSums) {
    CounterRng rng(5);
    const Matrix data1 = Matrix::NullaryExpr(1, 30, [&] { return rng.normal(); });
    const Matrix data2 = Matrix::NullaryExpr(2, 30, [&] { return rng.normal(); });
    const std::vector<UKernel> kernels = {OjaKernel{2}, GiniKernel{1.0, {ScalarLoss::Kind::square, 1}},
                                          GiniKernel{1.5, {ScalarLoss::Kind::huber, 0.4}},
                                          GiniKernel{1.0, {ScalarLoss::Kind::abs, 1}}, MoMKernel{3}};
    for (const auto& k : kernels) {
        const Matrix& data = std::holds_alternative<OjaKernel>(k) ? data2 : data1;
        const UObjective obj(k, data, SubsetPlan::complete(data.cols(), order(k)));
        for (int rep = 0; rep < 20; ++rep) {
            const Vector th = rng.normal_vector(param_dim(k));
            EXPECT_NEAR(obj.risk(th), u_risk(k, data, th), 1e-10);
            EXPECT_LE((obj.subgrad(th) - u_subgrad(k, data, th)).norm(), 1e-10);
        }
    }
}

TEST(UStat, SigmaHatExamples) {
    CounterRng rng(6);
    const Eigen::Index n = 4000;
    const Matrix x = Matrix::NullaryExpr(1, n, [&] { return 1.0 + rng.normal(); });
    auto linear = [&](const std::vector<Eigen::Index>& idx) { return Vector::Constant(1, x(0, idx[0]) + x(0, idx[1])); };
    auto product = [&](const std::vector<Eigen::Index>& idx) { return Vector::Constant(1, x(0, idx[0]) * x(0, idx[1])); };
    auto constant = [&](const std::vector<Eigen::Index>&) { return Vector::Constant(1, 3.0); };
    EXPECT_NEAR(sigma_hat(linear, n, 2, 7)(0, 0), 1.0, 0.1);
    EXPECT_NEAR(sigma_hat(product, n, 2, 7)(0, 0), 1.0, 0.1);
    EXPECT_NEAR(sigma_hat(constant, n, 2, 7)(0, 0), 0.0, 1e-12);
    EXPECT_THROW(sigma_hat(linear, 2, 2, 7), InvalidArgument);
}

TEST(UStat, GiniLlnUniform) {
    CounterRng rng(8);
    const Matrix x = Matrix::NullaryExpr(1, 2000, [&] { return rng.uniform(); });
    const UObjective obj(kGiniAbsDiffIdentity, x, SubsetPlan::complete(2000, 2));
    // With square inner the minimizer is the mean pairwise distance.
    EXPECT_NEAR(obj.start()[0], 1.0 / 3.0, 0.02 / 3.0);
}

TEST(UStat, CltVarianceLinearKernel) {
    // sqrt(n)(U_n - E h) has variance k^2 Sigma = 4 var(X) for h = x1 + x2.
    const int reps = 400;
    const Eigen::Index n = 400;
    std::vector<double> z;
    for (int r = 0; r < reps; ++r) {
        CounterRng rng(derive_seed(77, {static_cast<std::uint64_t>(r)}));
        const Vector x = Vector::NullaryExpr(n, [&] { return 1.0 + rng.normal(); });
        // Complete U-statistic of x1 + x2 equals 2 * mean.
        double acc = 0;
        SubsetPlan::complete(n, 2).for_each([&](const std::vector<Eigen::Index>& idx) { acc += x[idx[0]] + x[idx[1]]; });
        const double u = acc / static_cast<double>(binomial(n, 2));
        z.push_back(std::sqrt(static_cast<double>(n)) * (u - 2.0));
    }
    double m = 0, v = 0;
    for (double s : z) m += s;
    m /= reps;
    for (double s : z) v += (s - m) * (s - m);
    v /= reps - 1;
    EXPECT_NEAR(v, 4.0, 0.15 * 4.0);
}
