#include "support.hpp"

#include <gtest/gtest.h>

#include <cmath>

namespace {

using namespace dfr;

Sample make_sample(std::initializer_list<double> values)
{
    Sample s;
    s.series.resize(static_cast<Eigen::Index>(values.size()), 1);
    Eigen::Index k = 0;
    for (double v : values) {
        s.series(k++, 0) = v;
    }
    return s;
}

ReservoirParams unit_params(double A, double B, std::size_t nodes = 1)
{
    ReservoirParams p;
    p.A = A;
    p.B = B;
    p.mask.entries = Eigen::MatrixXd::Ones(static_cast<Eigen::Index>(nodes), 1);
    return p;
}

TEST(SplitMix64, ReferenceOutputs)
{
    SplitMix64 a(1234567);
    EXPECT_EQ(a.next(), 6457827717110365317ULL);
    EXPECT_EQ(a.next(), 3203168211198807973ULL);
    EXPECT_EQ(a.next(), 9817491932198370423ULL);
    SplitMix64 z(0);
    EXPECT_EQ(z.next(), 0xe220a8397b1dcdafULL);
}

TEST(SplitMix64, BelowAndUniformStayInRange)
{
    SplitMix64 r(5);
    for (int i = 0; i < 1000; ++i) {
        EXPECT_LT(r.below(7), 7u);
        const double u = r.uniform();
        EXPECT_GE(u, 0.0);
        EXPECT_LT(u, 1.0);
    }
}

TEST(Mask, DeterministicAndBipolar)
{
    const Mask a = generate_mask(77, 12, 3);
    const Mask b = generate_mask(77, 12, 3);
    EXPECT_EQ(a, b);
    EXPECT_EQ(a.nodes(), 12u);
    EXPECT_EQ(a.inputs(), 3u);
    for (Eigen::Index i = 0; i < a.entries.size(); ++i) {
        const double v = a.entries.data()[i];
        EXPECT_TRUE(v == 1.0 || v == -1.0);
    }
}

TEST(Mask, EntriesFollowBitZeroOfSplitMixStream)
{
    const Mask m = generate_mask(99, 4, 3);
    SplitMix64 r(99);
    for (Eigen::Index n = 0; n < 4; ++n) {
        for (Eigen::Index u = 0; u < 3; ++u) {
            EXPECT_EQ(m.entries(n, u), (r.next() & 1U) ? 1.0 : -1.0);
        }
    }
}

TEST(Mask, BitZeroBalanceAtSeedZero)
{
    const Mask m = generate_mask(0, 100, 100);
    const double plus = static_cast<double>((m.entries.array() > 0.0).count()) / 1e4;
    EXPECT_GE(plus, 0.47);
    EXPECT_LE(plus, 0.53);
}

TEST(Mask, RejectsEmptyShapes)
{
    EXPECT_THROW(generate_mask(0, 0, 1), ConfigError);
    EXPECT_THROW(generate_mask(0, 1, 0), ConfigError);
}

TEST(MaskInput, ZeroDirectAndLinear)
{
    const Mask m = generate_mask(3, 6, 2);
    EXPECT_EQ(mask_input(m, Eigen::Vector2d::Zero()), Eigen::VectorXd::Zero(6));

    Mask col;
    col.entries.resize(2, 1);
    col.entries << 1.0, -1.0;
    const Eigen::VectorXd j = mask_input(col, Eigen::VectorXd::Constant(1, 2.0));
    EXPECT_EQ(j(0), 2.0);
    EXPECT_EQ(j(1), -2.0);

    SplitMix64 r(8);
    for (int t = 0; t < 20; ++t) {
        Eigen::Vector2d a(r.normal(), r.normal());
        Eigen::Vector2d b(r.normal(), r.normal());
        const Eigen::VectorXd lhs = mask_input(m, a + b);
        const Eigen::VectorXd rhs = mask_input(m, a) + mask_input(m, b);
        EXPECT_LE((lhs - rhs).cwiseAbs().maxCoeff(), 1e-12);
    }
}

TEST(MaskInput, DimensionMismatchThrows)
{
    const Mask m = generate_mask(3, 6, 2);
    EXPECT_THROW(mask_input(m, Eigen::VectorXd::Zero(3)), ConfigError);
}

TEST(Nonlinearity, HandValues)
{
    const auto lin = nonlinearity(Nonlinearity::linear(), 2.0, 3.0);
    EXPECT_EQ(lin.value, 6.0);
    EXPECT_EQ(lin.d_dz, 2.0);
    EXPECT_EQ(lin.d_dA, 3.0);

    const auto mg = nonlinearity(Nonlinearity::mackey_glass(2), 1.0, 1.0);
    EXPECT_DOUBLE_EQ(mg.value, 0.5);
    EXPECT_DOUBLE_EQ(mg.d_dz, 0.0);
    EXPECT_DOUBLE_EQ(mg.d_dA, 0.5);
}

TEST(Nonlinearity, SlopeMatchesFiniteDifference)
{
    SplitMix64 r(21);
    const double h = 1e-6;
    for (const Nonlinearity f : {Nonlinearity::linear(), Nonlinearity::mackey_glass(2), Nonlinearity::mackey_glass(4)}) {
        for (int t = 0; t < 50; ++t) {
            const double A = 0.1 + r.uniform();
            const double z = 3.0 * r.normal();
            const double fd = (nonlinearity(f, A, z + h).value - nonlinearity(f, A, z - h).value) / (2.0 * h);
            const double got = nonlinearity(f, A, z).d_dz;
            if (std::abs(fd) < 1e-6) {
                EXPECT_NEAR(got, fd, 1e-8);
            } else {
                EXPECT_LE(oracle::relative_error(got, fd), 1e-6) << f.name() << " z=" << z;
            }
        }
    }
}

TEST(Nonlinearity, OnlyEvenExponentsAllowed)
{
    EXPECT_THROW(Nonlinearity::mackey_glass(3), ConfigError);
    EXPECT_THROW(Nonlinearity::mackey_glass(0), ConfigError);
    EXPECT_NO_THROW(Nonlinearity::mackey_glass(8));
    EXPECT_EQ(Nonlinearity::linear().name(), "linear");
    EXPECT_EQ(Nonlinearity::mackey_glass(2).name(), "mackey-glass");
}

TEST(Reservoir, ZeroAGivesZeroStates)
{
    SplitMix64 r(4);
    auto in = oracle::random_instance(r, Nonlinearity::linear());
    in.params.A = 0.0;
    const ReservoirTrace t = run_reservoir(in.params, in.sample, TraceMode::full);
    for (const auto& x : t.states) {
        EXPECT_EQ(x, Eigen::VectorXd::Zero(x.size()));
    }
}

TEST(Reservoir, SingleNodeHandRecurrence)
{
    const ReservoirTrace t = run_reservoir(unit_params(0.5, 0.3), make_sample({2.0, 2.0}), TraceMode::full);
    ASSERT_EQ(t.states.size(), 3u);
    EXPECT_EQ(t.at(0)(0), 0.0);
    EXPECT_DOUBLE_EQ(t.at(1)(0), 1.0);
    EXPECT_DOUBLE_EQ(t.at(2)(0), 1.8);
}

TEST(Reservoir, RingContinuationAcrossSteps)
{
    // Two nodes, B only: node 1 at step 2 sees node 2 from step 1.
    ReservoirParams p = unit_params(1.0, 0.5, 2);
    const ReservoirTrace t = run_reservoir(p, make_sample({1.0, 0.0}), TraceMode::full);
    // k=1: x1 = 1, x2 = (1 + 0) + 0.5*1 = 1.5
    EXPECT_DOUBLE_EQ(t.at(1)(0), 1.0);
    EXPECT_DOUBLE_EQ(t.at(1)(1), 1.5);
    // k=2: x1 = (0 + 1) + 0.5*1.5 = 1.75, x2 = (0 + 1.5) + 0.5*1.75 = 2.375
    EXPECT_DOUBLE_EQ(t.at(2)(0), 1.75);
    EXPECT_DOUBLE_EQ(t.at(2)(1), 2.375);
}

TEST(Reservoir, MatchesIndependentScalarRecurrence)
{
    SplitMix64 r(31);
    for (int t = 0; t < 100; ++t) {
        const Nonlinearity f = t % 2 ? Nonlinearity::mackey_glass(2) : Nonlinearity::linear();
        const auto in = oracle::random_instance(r, f, 12, 6);
        const auto ref = oracle::reference_states(in.params, in.sample);
        const ReservoirTrace tr = run_reservoir(in.params, in.sample, TraceMode::full);
        ASSERT_EQ(tr.states.size(), ref.size());
        for (std::size_t k = 0; k < ref.size(); ++k) {
            EXPECT_LE((tr.at(k) - ref[k]).cwiseAbs().maxCoeff(), 1e-12);
        }
    }
}

TEST(Reservoir, TruncatedKeepsLastTwoOfFull)
{
    SplitMix64 r(32);
    for (int t = 0; t < 50; ++t) {
        const auto in = oracle::random_instance(r, t % 2 ? Nonlinearity::mackey_glass(4) : Nonlinearity::linear());
        const ReservoirTrace full = run_reservoir(in.params, in.sample, TraceMode::full);
        const ReservoirTrace tr = run_reservoir(in.params, in.sample, TraceMode::truncated);
        EXPECT_EQ(full.stored_state_vectors(), in.sample.steps() + 1);
        EXPECT_EQ(tr.stored_state_vectors(), 2u);
        EXPECT_EQ(tr.last(), full.last());
        EXPECT_EQ(tr.before_last(), full.before_last());
    }
}

TEST(Reservoir, LinearWithoutFeedbackDecouplesNodes)
{
    SplitMix64 r(33);
    auto in = oracle::random_instance(r, Nonlinearity::linear(), 10, 5);
    in.params.B = 0.0;
    const ReservoirTrace t = run_reservoir(in.params, in.sample, TraceMode::full);
    for (std::size_t k = 1; k <= t.steps; ++k) {
        const Eigen::VectorXd j = masked_input_at(in.params, in.sample, k);
        const Eigen::VectorXd expect = in.params.A * (j + t.at(k - 1));
        EXPECT_EQ(t.at(k), expect);
    }
}

TEST(Reservoir, NegatingMaskAndInputLeavesTraceUnchanged)
{
    SplitMix64 r(34);
    for (int t = 0; t < 20; ++t) {
        const auto in = oracle::random_instance(r, Nonlinearity::mackey_glass(2));
        ReservoirParams neg = in.params;
        neg.mask.entries = -neg.mask.entries;
        Sample s = in.sample;
        s.series = -s.series;
        const auto a = run_reservoir(in.params, in.sample, TraceMode::full);
        const auto b = run_reservoir(neg, s, TraceMode::full);
        ASSERT_EQ(a.states.size(), b.states.size());
        for (std::size_t k = 0; k < a.states.size(); ++k) {
            EXPECT_EQ(a.states[k], b.states[k]);
        }
    }
}

TEST(Reservoir, PureFunction)
{
    SplitMix64 r(35);
    const auto in = oracle::random_instance(r, Nonlinearity::linear());
    const auto a = run_reservoir(in.params, in.sample, TraceMode::full);
    const auto b = run_reservoir(in.params, in.sample, TraceMode::full);
    EXPECT_EQ(a.states, b.states);
}

TEST(Reservoir, DivergenceCarriesStepAndNode)
{
    try {
        run_reservoir(unit_params(1e200, 0.0), make_sample({1.0, 1.0, 1.0}), TraceMode::full);
        FAIL() << "expected DivergenceError";
    } catch (const DivergenceError& e) {
        EXPECT_EQ(e.step(), 2u);
        EXPECT_EQ(e.node(), 1u);
    }
}

TEST(Reservoir, RejectsShapeMismatch)
{
    ReservoirParams p = unit_params(0.5, 0.5);
    Sample s;
    s.series = Eigen::MatrixXd::Zero(3, 2);
    EXPECT_THROW(run_reservoir(p, s, TraceMode::full), ConfigError);
}

} // namespace
