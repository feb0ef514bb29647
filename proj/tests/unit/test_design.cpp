#include <nbpss/design.hpp>

#include <gtest/gtest.h>

#include <random>

using namespace nbpss;

namespace {

Vector uniform_x(Index n, std::uint64_t seed, double lo = -2.0, double hi = 2.0) {
    std::mt19937_64 eng(seed);
    std::uniform_real_distribution<double> ud(lo, hi);
    Vector x(n);
    for (Index i = 0; i < n; ++i) x(i) = ud(eng);
    return x;
}

// Cox-de Boor recursion on the full knot sequence, independent of bspline_row.
double cox_de_boor(const std::vector<double>& t, int i, int p, double x) {
    if (p == 0) return (t[i] <= x && x < t[i + 1]) ? 1.0 : 0.0;
    double left = 0.0, right = 0.0;
    if (t[i + p] != t[i]) left = (x - t[i]) / (t[i + p] - t[i]) * cox_de_boor(t, i, p - 1, x);
    if (t[i + p + 1] != t[i + 1]) right = (t[i + p + 1] - x) / (t[i + p + 1] - t[i + 1]) * cox_de_boor(t, i + 1, p - 1, x);
    return left + right;
}

} // namespace

TEST(BSpline, TwentyInteriorKnotsCubicGivesTwentyTwoColumns) {
    const EffectBlock b = make_bspline_block(uniform_x(100, 1), 20, 3, 2);
    EXPECT_EQ(b.dim(), 22);
    EXPECT_EQ(b.knots->dimension(), 22);
    EXPECT_EQ(b.n(), 100);
}

TEST(BSpline, KnotSequenceStrictlyIncreasing) {
    const Knots k = make_knots(-1.0, 3.0, 20, 3);
    for (std::size_t i = 1; i < k.full_sequence.size(); ++i) EXPECT_LT(k.full_sequence[i - 1], k.full_sequence[i]);
}

TEST(BSpline, RowsSumToOne) {
    const EffectBlock b = make_bspline_block(uniform_x(500, 2), 20, 3, 2);
    const Matrix bd = b.B.to_dense();
    for (Index i = 0; i < bd.rows(); ++i) EXPECT_NEAR(bd.row(i).sum(), 1.0, 1e-12);
}

TEST(BSpline, MatchesCoxDeBoorRecursion) {
    const Vector x = uniform_x(60, 3, 0.0, 1.0);
    const EffectBlock b = make_bspline_block(x, 8, 3, 2);
    const Matrix bd = b.B.to_dense();
    const auto& t = b.knots->full_sequence;
    for (Index i = 0; i < x.size(); ++i) {
        if (x(i) >= b.knots->upper) continue;
        for (int j = 0; j < b.knots->dimension(); ++j) EXPECT_NEAR(bd(i, j), cox_de_boor(t, j, 3, x(i)), 1e-12);
    }
}

TEST(BSpline, Rw2PenaltyAnnihilatesConstantsAndLines) {
    const EffectBlock b = make_bspline_block(uniform_x(50, 4), 20, 3, 2);
    const Matrix k = b.penalty.dense();
    EXPECT_EQ(b.penalty.rank, 20);
    EXPECT_EQ((k - k.transpose()).cwiseAbs().maxCoeff(), 0.0);
    const Vector ones = Vector::Ones(22);
    const Vector lin = Vector::LinSpaced(22, 1.0, 22.0);
    EXPECT_LT((k * ones).cwiseAbs().maxCoeff(), 1e-12);
    EXPECT_LT((k * lin).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(BSpline, Rw1PenaltyRankAndConstraint) {
    const EffectBlock b = make_bspline_block(uniform_x(50, 5), 20, 3, 1);
    EXPECT_EQ(b.penalty.rank, 21);
    EXPECT_EQ(b.constraint.rows(), 1);
}

TEST(BSpline, RejectsBadInput) {
    EXPECT_THROW(make_bspline_block(Vector::Constant(10, 1.0)), ConfigError);
    Vector x = uniform_x(10, 6);
    x(3) = std::numeric_limits<double>::quiet_NaN();
    EXPECT_THROW(make_bspline_block(x), ConfigError);
    EXPECT_THROW(make_bspline_block(uniform_x(10, 7), 20, 3, 3), ConfigError);
    EXPECT_THROW(make_knots(0.0, 1.0, 1, 3), ConfigError);
}

TEST(BSpline, EvaluateReproducesDesignAtTrainingPoints) {
    const Vector x = uniform_x(40, 8);
    const EffectBlock b = make_bspline_block(x, 10, 3, 2);
    const Matrix again = b.evaluate(Matrix(x));
    EXPECT_LT((again - b.B.to_dense()).cwiseAbs().maxCoeff(), 1e-14);
}

TEST(Constraint, Rw2KernelHasTwoRowsSpanningConstantAndTrend) {
    const EffectBlock b = make_bspline_block(uniform_x(80, 9), 20, 3, 2);
    const Matrix& a = b.constraint.A;
    ASSERT_EQ(a.rows(), 2);
    EXPECT_LT((a * a.transpose() - Matrix::Identity(2, 2)).cwiseAbs().maxCoeff(), 1e-12);
    // both 1 and (1..22) lie in the row span of A
    for (const Vector& v : {Vector(Vector::Ones(22)), Vector(Vector::LinSpaced(22, 1.0, 22.0))}) {
        const Vector proj = a.transpose() * (a * v);
        EXPECT_LT((proj - v).norm() / v.norm(), 1e-10);
    }
}

TEST(Constraint, IdentityPenaltyGivesEmptyConstraint) {
    SparseMatrix eye(3, 3);
    eye.setIdentity();
    EXPECT_TRUE(make_constraint(make_penalty(eye, PenaltyKind::identity), false).empty());
}

TEST(Constraint, CenteringRowAppendedOnlyWhenIndependent) {
    SparseMatrix eye(3, 3);
    eye.setIdentity();
    const PenaltyMatrix p = make_penalty(eye, PenaltyKind::identity);
    const DesignMatrix b(Matrix((Matrix(2, 3) << 1, 0, 0, 0, 1, 1).finished()));
    const ConstraintMatrix c = make_constraint(p, true, &b);
    ASSERT_EQ(c.rows(), 1);
    EXPECT_NEAR(c.A.row(0).norm(), 1.0, 1e-14);
    // 1'B = (1, 1, 1) direction
    EXPECT_NEAR(std::fabs(c.A(0, 0) - c.A(0, 1)) + std::fabs(c.A(0, 1) - c.A(0, 2)), 0.0, 1e-14);
}

TEST(Constraint, PenalizedDirectionsRemainPositiveDefinite) {
    const EffectBlock b = make_bspline_block(uniform_x(80, 10), 20, 3, 2);
    const SymmetricSpectrum s = symmetric_spectrum(b.penalty.dense());
    const Matrix& a = b.constraint.A;
    const Matrix akat = a * s.generalized_inverse() * a.transpose();
    // A spans ker K, so A K^- A' = 0 while the complement of ker A carries all of K
    EXPECT_LT(akat.cwiseAbs().maxCoeff(), 1e-8);
    EXPECT_LT((a * s.range_basis).cwiseAbs().maxCoeff(), 1e-10);
}

TEST(Gmrf, PathGraphLaplacian) {
    Matrix adj = Matrix::Zero(3, 3);
    adj(0, 1) = adj(1, 0) = adj(1, 2) = adj(2, 1) = 1.0;
    const RegionGraph g = RegionGraph::from_adjacency(adj);
    const EffectBlock b = make_gmrf_block({"0", "1", "2", "1"}, g);
    const Matrix expected = (Matrix(3, 3) << 1, -1, 0, -1, 2, -1, 0, -1, 1).finished();
    EXPECT_EQ(b.penalty.dense(), expected);
    EXPECT_EQ(b.penalty.rank, 2);
    EXPECT_LT((b.penalty.dense() * Vector::Ones(3)).norm(), 1e-15);
    const Matrix bd = b.B.to_dense();
    for (Index i = 0; i < bd.rows(); ++i) {
        EXPECT_EQ(bd.row(i).sum(), 1.0);
        EXPECT_EQ((bd.row(i).array() != 0.0).count(), 1);
    }
    ASSERT_EQ(b.constraint.rows(), 1);
    EXPECT_NEAR(std::fabs(b.constraint.A.sum()), std::sqrt(3.0), 1e-12);
}

TEST(Gmrf, DisconnectedGraphRankMatchesEigenOracle) {
    Matrix adj = Matrix::Zero(5, 5);
    adj(0, 1) = adj(1, 0) = 1.0;
    adj(2, 3) = adj(3, 2) = adj(3, 4) = adj(4, 3) = 1.0;
    const EffectBlock b = make_gmrf_block({"0", "2"}, RegionGraph::from_adjacency(adj));
    Eigen::SelfAdjointEigenSolver<Matrix> es(b.penalty.dense());
    const Index oracle = (es.eigenvalues().array() > 1e-9).count();
    EXPECT_EQ(oracle, 3);
    EXPECT_EQ(b.penalty.rank, oracle);
    EXPECT_EQ(b.constraint.rows(), 2);
}

TEST(Gmrf, RejectsBadGraphs) {
    Matrix adj = Matrix::Zero(2, 2);
    adj(0, 1) = 1.0;
    EXPECT_THROW(make_gmrf_block({"0"}, RegionGraph::from_adjacency(adj)), ConfigError);
    adj(1, 0) = 1.0;
    EXPECT_THROW(make_gmrf_block({"7"}, RegionGraph::from_adjacency(adj)), ConfigError);
}

TEST(Linear, IdentityPenaltyNoConstraint) {
    const Matrix x = uniform_x(20, 11);
    const EffectBlock b = make_linear_block(x);
    EXPECT_EQ(b.dim(), 1);
    EXPECT_EQ(b.penalty.dense(), Matrix::Identity(1, 1));
    EXPECT_TRUE(b.constraint.empty());
    Matrix two(20, 2);
    two << x, uniform_x(20, 12);
    const EffectBlock b2 = make_linear_block(two);
    EXPECT_EQ(b2.penalty.rank, 2);
    EXPECT_EQ(b2.penalty.dense(), Matrix::Identity(2, 2));
}

TEST(Linear, ConstantColumnUnderSelectionRejected) {
    EXPECT_THROW(make_linear_block(Matrix::Ones(10, 1)), ConfigError);
    EXPECT_NO_THROW(make_intercept_block(10));
}

TEST(Decompose, Rw2SplitsIntoCentredLinearAndConstrainedNonlinear) {
    const Vector x = uniform_x(200, 13);
    const EffectBlock b = make_bspline_block(x, 20, 3, 2, "f");
    const DecomposedEffect d = decompose_effect(b);
    ASSERT_TRUE(d.linear_part.has_value());
    EXPECT_EQ(d.linear_part->dim(), 1);
    EXPECT_NEAR(d.linear_part->B.to_dense().col(0).mean(), 0.0, 1e-12);
    EXPECT_EQ(d.nonlinear_part.dim(), 22);
    EXPECT_EQ(d.nonlinear_part.constraint.rows(), 2);
    EXPECT_EQ(d.linear_part->label, "f_lin");
    EXPECT_EQ(d.nonlinear_part.label, "f_nonlin");
}

TEST(Decompose, Rw1HasNoLinearPart) {
    const DecomposedEffect d = decompose_effect(make_bspline_block(uniform_x(100, 14), 20, 3, 1));
    EXPECT_FALSE(d.linear_part.has_value());
    EXPECT_EQ(d.nonlinear_part.constraint.rows(), 1);
}

TEST(Decompose, SpansOriginalColumnSpaceUpToCentering) {
    const Vector x = uniform_x(300, 15);
    const EffectBlock b = make_bspline_block(x, 12, 3, 2);
    const DecomposedEffect d = decompose_effect(b);
    const Matrix bd = b.B.to_dense();
    // nonlinear columns restricted to null(A), plus the centred covariate and a constant
    const SymmetricSpectrum s = symmetric_spectrum(d.nonlinear_part.constraint.A.transpose() * d.nonlinear_part.constraint.A);
    Matrix span(bd.rows(), s.kernel_basis.cols() + 2);
    span << bd * s.kernel_basis, d.linear_part->B.to_dense(), Vector::Ones(bd.rows());
    const Eigen::ColPivHouseholderQR<Matrix> qr(span);
    std::mt19937_64 eng(16);
    std::normal_distribution<double> nd;
    for (int rep = 0; rep < 5; ++rep) {
        Vector beta(bd.cols());
        for (Index i = 0; i < beta.size(); ++i) beta(i) = nd(eng);
        const Vector f = bd * beta;
        const Vector coef = qr.solve(f);
        EXPECT_LT((span * coef - f).norm() / f.norm(), 1e-8);
    }
}

TEST(Decompose, RejectsNonSplineBlocks) {
    EXPECT_THROW(decompose_effect(make_linear_block(uniform_x(10, 17))), ConfigError);
}

TEST(IidBlock, LevelsInFirstSeenOrder) {
    const EffectBlock b = make_iid_block({"b", "a", "b", "c"});
    EXPECT_EQ(b.levels, (std::vector<std::string>{"b", "a", "c"}));
    EXPECT_EQ(b.dim(), 3);
    EXPECT_EQ(b.B.to_dense()(2, 0), 1.0);
}
