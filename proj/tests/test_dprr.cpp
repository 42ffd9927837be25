#include "support.hpp"

#include <gtest/gtest.h>

namespace {

using namespace dfr;

TEST(DprrIndex, LayoutExamples)
{
    EXPECT_EQ(dprr_index(1, 1, 30), 0u);
    EXPECT_EQ(dprr_index(2, 3, 30), 32u);
    EXPECT_EQ(dprr_sum_index(1, 30), 900u);
    EXPECT_EQ(dprr_sum_index(30, 30), 929u);
    EXPECT_EQ(dprr_size(30), 930u);
}

TEST(DprrIndex, OutOfRangeThrows)
{
    EXPECT_THROW(dprr_index(0, 1, 3), ConfigError);
    EXPECT_THROW(dprr_index(1, 4, 3), ConfigError);
    EXPECT_THROW(dprr_sum_index(4, 3), ConfigError);
    EXPECT_THROW(dprr_sum_index(0, 3), ConfigError);
}

TEST(Dprr, ZeroTraceGivesZeroFeatures)
{
    ReservoirTrace t;
    t.steps = 4;
    t.states.assign(5, Eigen::VectorXd::Zero(3));
    EXPECT_EQ(accumulate_dprr(t), Eigen::VectorXd::Zero(12));
}

TEST(Dprr, SingleNodeHandSums)
{
    ReservoirTrace t;
    t.steps = 2;
    t.states = {Eigen::VectorXd::Constant(1, 0.0), Eigen::VectorXd::Constant(1, 1.0),
                Eigen::VectorXd::Constant(1, 1.8)};
    const Eigen::VectorXd r = accumulate_dprr(t);
    ASSERT_EQ(r.size(), 2);
    EXPECT_DOUBLE_EQ(r(0), 1.8);
    EXPECT_DOUBLE_EQ(r(1), 2.8);
}

TEST(Dprr, StreamingMatchesBruteForce)
{
    SplitMix64 rng(101);
    for (int t = 0; t < 40; ++t) {
        const std::size_t T = 1 + rng.below(200);
        const std::size_t nx = 1 + rng.below(30);
        const ReservoirTrace tr = oracle::random_trace(rng, T, nx);
        const Eigen::VectorXd ref = oracle::brute_force_dprr(tr.states);
        const Eigen::VectorXd got = accumulate_dprr(tr);
        ASSERT_EQ(got.size(), static_cast<Eigen::Index>(dprr_size(nx)));
        const double scale = std::max(1.0, ref.cwiseAbs().maxCoeff());
        EXPECT_LE((got - ref).cwiseAbs().maxCoeff(), 1e-12 * scale) << "T=" << T << " nx=" << nx;
    }
}

TEST(Dprr, ForwardPassStreamsSameFeaturesInEitherMode)
{
    SplitMix64 rng(102);
    for (int t = 0; t < 30; ++t) {
        const auto in = oracle::random_instance(rng, Nonlinearity::mackey_glass(2), 20, 8);
        const ForwardPass full = run_forward(in.params, in.sample, TraceMode::full);
        const ForwardPass tr = run_forward(in.params, in.sample, TraceMode::truncated);
        const Eigen::VectorXd ref = oracle::brute_force_dprr(oracle::reference_states(in.params, in.sample));
        EXPECT_EQ(full.dprr, tr.dprr);
        EXPECT_EQ(full.dprr, accumulate_dprr(full.trace));
        EXPECT_LE((full.dprr - ref).cwiseAbs().maxCoeff(), 1e-12 * std::max(1.0, ref.cwiseAbs().maxCoeff()));
        EXPECT_EQ(compute_dprr(in.params, in.sample), tr.dprr);
    }
}

TEST(Dprr, SingleStepHasZeroProductBlock)
{
    SplitMix64 rng(103);
    const ReservoirTrace tr = oracle::random_trace(rng, 1, 6);
    const Eigen::VectorXd r = accumulate_dprr(tr);
    EXPECT_EQ(r.head(36), Eigen::VectorXd::Zero(36));
    EXPECT_EQ(r.tail(6), tr.at(1));
}

TEST(Dprr, LengthIndependentOfSteps)
{
    SplitMix64 rng(104);
    for (std::size_t T : {1u, 7u, 64u, 128u}) {
        EXPECT_EQ(accumulate_dprr(oracle::random_trace(rng, T, 5)).size(), 30);
    }
}

TEST(Dprr, TruncatedTraceRejected)
{
    ReservoirTrace t;
    t.mode = TraceMode::truncated;
    t.steps = 5;
    t.states.assign(2, Eigen::VectorXd::Zero(2));
    EXPECT_THROW(accumulate_dprr(t), ConfigError);
}

} // namespace
