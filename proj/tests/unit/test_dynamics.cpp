#include <gtest/gtest.h>

#include "poke2vid/dynamics/cells.hpp"
#include "poke2vid/dynamics/hierarchy.hpp"
#include "support.hpp"

using namespace poke2vid;
namespace pt = poke2vid::testing;

namespace {

torch::Tensor scalar(double v) { return torch::full({1, 1, 1, 1}, v, torch::kFloat64); }

}  // namespace

TEST(LinearResidualCell, ExplicitEulerArithmetic) {
    LinearResidualCell cell(1, -0.5, 1.0, 0.1);
    EXPECT_DOUBLE_EQ(cell.step(scalar(1.0), scalar(0.0)).item<double>(), 0.95);
}

TEST(ConvGruCell, IdentityWhenUpdateGateIsShut) {
    torch::manual_seed(0);
    ConvGruCell cell(4, 6);
    cell.make_identity();
    const auto s = torch::randn({2, 6, 8, 8});
    EXPECT_TRUE(torch::equal(cell.step(s, torch::randn({2, 4, 8, 8})), s));
}

TEST(ConvGruCell, ResidualDecomposition) {
    torch::manual_seed(1);
    ConvGruCell cell(3, 5);
    cell.to(torch::kFloat64);
    const auto s = torch::randn({1, 5, 6, 6}, torch::kFloat64), u = torch::randn({1, 3, 6, 6}, torch::kFloat64);
    const auto g = cell.gates(s, u);
    const auto g1 = -g.update * s, g2 = g.update * g.candidate;
    EXPECT_TRUE(torch::allclose(cell.step(s, u), s + g1 + g2, 1e-12, 1e-12));
    EXPECT_TRUE(torch::allclose(cell.step(s, u), (1 - g.update) * s + g.update * g.candidate, 1e-12, 1e-12));
}

TEST(ConvGruCell, ShapeMismatch) {
    ConvGruCell cell(3, 5);
    EXPECT_THROW(cell.step(torch::zeros({1, 4, 6, 6}), torch::zeros({1, 3, 6, 6})), ValidationError);
    EXPECT_THROW(cell.step(torch::zeros({1, 5, 6, 6}), torch::zeros({1, 3, 4, 4})), ValidationError);
}

TEST(HierarchicalDynamics, CellsMatchEncoderChannels) {
    const CodecConfig c{64, 32, 8, 0};
    auto dyn = HierarchicalDynamics::make(c);
    ASSERT_EQ(dyn->depth(), 3);
    for (int n = 1; n <= 3; ++n) {
        EXPECT_EQ(dyn->cell(n).hidden_channels(), c.channels(n));
        EXPECT_EQ(dyn->cell(n).input_channels(), c.channels(n));
    }
}

TEST(Upsampler, SixtyFourPixelShapesAndLinearity) {
    TransposedConvUpsampler up(128, 64);
    EXPECT_EQ(up.forward(torch::randn({1, 128, 8, 8})).sizes(), (std::vector<std::int64_t>{1, 64, 16, 16}));
    {
        torch::NoGradGuard no_grad;
        up.conv->bias.zero_();
    }
    EXPECT_EQ(up.forward(torch::zeros({1, 128, 8, 8})).abs().max().item<float>(), 0.f);
    EXPECT_THROW(up.forward(torch::zeros({1, 64, 8, 8})), ValidationError);
}

TEST(HierarchicalDynamics, SingleStepIsSemiImplicitEuler) {
    const double gamma = 0.3, phi = 0.7, h = 0.1;
    auto dyn = pt::linear_oscillator(gamma, h);
    const auto next = dyn->step(ObjectStateHierarchy{{scalar(0.2), scalar(-0.4)}}, scalar(phi));
    const auto oracle = pt::semi_implicit_euler(gamma, phi, h, {0.2, -0.4}, 1).front();
    EXPECT_EQ(next.level(1).item<double>(), oracle.v);
    EXPECT_EQ(next.level(2).item<double>(), oracle.x);
}

TEST(HierarchicalDynamics, StaleWiringDivergesAtStepOne) {
    auto dyn = pt::linear_oscillator(0.3, 0.1, Wiring::kStale);
    const auto next = dyn->step(ObjectStateHierarchy{{scalar(0.2), scalar(-0.4)}}, scalar(0.7));
    const auto oracle = pt::semi_implicit_euler(0.3, 0.7, 0.1, {0.2, -0.4}, 1).front();
    EXPECT_NE(next.level(2).item<double>(), oracle.x);
}

TEST(HierarchicalDynamics, ZeroFixedPoint) {
    auto dyn = HierarchicalDynamics::make(CodecConfig{32, 8, 8, 0});
    {
        torch::NoGradGuard no_grad;
        for (auto& p : dyn->parameters()) p.zero_();
    }
    ObjectStateHierarchy zero{{torch::zeros({1, 16, 8, 8}), torch::zeros({1, 8, 16, 16})}};
    const auto next = dyn->step(zero, torch::zeros({1, 16, 8, 8}));
    for (const auto& l : next.levels) EXPECT_EQ(l.abs().max().item<float>(), 0.f);
}

TEST(HierarchicalDynamics, LevelCountMismatch) {
    auto dyn = HierarchicalDynamics::make(CodecConfig{32, 8, 8, 0});
    EXPECT_THROW(dyn->step(ObjectStateHierarchy{{torch::zeros({1, 16, 8, 8})}}, torch::zeros({1, 16, 8, 8})),
                 ValidationError);
}

TEST(InteractionSchedule, ShiftAndImpulse) {
    const auto phi = torch::randn({1, 4, 2, 2});
    const auto shift = interaction_schedule(phi, PokeMode::kShift, 10);
    ASSERT_EQ(shift.length(), 10u);
    for (const auto& s : shift.steps) EXPECT_TRUE(torch::equal(s, phi));
    const auto impulse = interaction_schedule(phi, PokeMode::kImpulse, 3);
    ASSERT_EQ(impulse.length(), 3u);
    EXPECT_TRUE(torch::equal(impulse.steps[0], phi));
    EXPECT_EQ(impulse.steps[1].abs().max().item<float>(), 0.f);
    EXPECT_EQ(impulse.steps[2].abs().max().item<float>(), 0.f);
    for (auto mode : {PokeMode::kShift, PokeMode::kImpulse}) {
        const auto one = interaction_schedule(phi, mode, 1);
        ASSERT_EQ(one.length(), 1u);
        EXPECT_TRUE(torch::equal(one.steps[0], phi));
    }
    EXPECT_THROW(interaction_schedule(phi, PokeMode::kShift, 0), ValidationError);
}

TEST(Rollout, LongImpulseRollout) {
    const CodecConfig c{32, 8, 8, 0};
    auto dyn = make_dynamics(c, DynamicsConfig{});
    ObjectStateHierarchy s0{{torch::randn({1, 16, 8, 8}), torch::randn({1, 8, 16, 16})}};
    const auto states = rollout(*dyn, s0, interaction_schedule(torch::randn({1, 16, 8, 8}), PokeMode::kImpulse, 25));
    ASSERT_EQ(states.size(), 25u);
    for (const auto& s : states) EXPECT_NO_THROW(validate_hierarchy(s, c));
}

TEST(Rollout, UnforcedIntegratorRamps) {
    auto dyn = pt::linear_oscillator(0.0, 0.5);
    const auto states =
        rollout(*dyn, ObjectStateHierarchy{{scalar(2.0), scalar(1.0)}}, interaction_schedule(scalar(0.0), PokeMode::kShift, 6));
    for (std::size_t i = 0; i < states.size(); ++i) {
        EXPECT_EQ(states[i].level(1).item<double>(), 2.0);
        EXPECT_DOUBLE_EQ(states[i].level(2).item<double>(), 1.0 + static_cast<double>(i + 1));
    }
}

TEST(Rollout, DampedSystemMatchesClosedForm) {
    const double gamma = 0.8, phi = 0.5;
    auto worst_error = [&](double h, int steps) {
        auto dyn = pt::linear_oscillator(gamma, h);
        const auto states = rollout(*dyn, ObjectStateHierarchy{{scalar(1.0), scalar(0.0)}},
                                    interaction_schedule(scalar(phi), PokeMode::kShift, steps));
        double worst = 0.0;
        for (std::size_t i = 0; i < states.size(); ++i) {
            const auto exact = pt::damped_solution(gamma, phi, {1.0, 0.0}, h * static_cast<double>(i + 1));
            worst = std::max({worst, std::abs(states[i].level(1).item<double>() - exact.v),
                              std::abs(states[i].level(2).item<double>() - exact.x)});
        }
        return worst;
    };
    const double coarse = worst_error(0.01, 100), fine = worst_error(0.001, 1000);
    EXPECT_LT(coarse, 0.2 * 0.01);
    EXPECT_LT(fine, 0.2 * 0.001);
    EXPECT_NEAR(coarse / fine, 10.0, 1.0);
}

TEST(Rollout, IdentityCellsKeepTheInitialState) {
    const CodecConfig c{32, 8, 8, 0};
    auto dyn = HierarchicalDynamics::make(c);
    for (int n = 1; n <= dyn->depth(); ++n) dynamic_cast<ConvGruCell&>(dyn->cell(n)).make_identity();
    ObjectStateHierarchy s0{{torch::randn({1, 16, 8, 8}), torch::randn({1, 8, 16, 16})}};
    const auto states = rollout(*dyn, s0, interaction_schedule(torch::randn({1, 16, 8, 8}), PokeMode::kShift, 5));
    for (const auto& s : states)
        for (int n = 1; n <= 2; ++n) EXPECT_TRUE(torch::equal(s.level(n), s0.level(n)));
}

TEST(Rollout, NonFiniteStateNamesTheStep) {
    auto dyn = pt::linear_oscillator(-1e300, 1.0);
    try {
        rollout(*dyn, ObjectStateHierarchy{{scalar(1.0), scalar(0.0)}}, interaction_schedule(scalar(0.0), PokeMode::kShift, 5));
        FAIL() << "expected a rollout error";
    } catch (const RolloutError& e) {
        EXPECT_EQ(e.step(), 2);
    }
}

TEST(Rollout, Deterministic) {
    auto dyn = make_dynamics(CodecConfig{32, 8, 8, 0}, DynamicsConfig{});
    ObjectStateHierarchy s0{{torch::randn({1, 16, 8, 8}), torch::randn({1, 8, 16, 16})}};
    const auto sched = interaction_schedule(torch::randn({1, 16, 8, 8}), PokeMode::kShift, 4);
    const auto a = rollout(*dyn, s0, sched), b = rollout(*dyn, s0, sched);
    for (std::size_t i = 0; i < a.size(); ++i)
        for (int n = 1; n <= 2; ++n) EXPECT_TRUE(torch::equal(a[i].level(n), b[i].level(n)));
}

TEST(BottleneckRnn, FinerLevelsStayPut) {
    const CodecConfig c{32, 8, 8, 0};
    auto dyn = make_dynamics(c, DynamicsConfig{DynamicsKind::kBottleneckRnn, 3, 3});
    ObjectStateHierarchy s0{{torch::randn({1, 16, 8, 8}), torch::randn({1, 8, 16, 16})}};
    const auto states = rollout(*dyn, s0, interaction_schedule(torch::randn({1, 16, 8, 8}), PokeMode::kShift, 3));
    for (const auto& s : states) {
        EXPECT_NO_THROW(validate_hierarchy(s, c));
        EXPECT_TRUE(torch::equal(s.level(2), s0.level(2)));
    }
}

TEST(DepthSweep, SixtyFourPixelShapes) {
    for (int depth : {1, 2, 3}) {
        const CodecConfig c{64, 32, 8, depth};
        auto dyn = make_dynamics(c, DynamicsConfig{});
        ObjectStateHierarchy s0;
        for (int n = 1; n <= depth; ++n) s0.levels.push_back(torch::randn({1, c.channels(n), c.level_size(n), c.level_size(n)}));
        const auto states = rollout(*dyn, s0, interaction_schedule(torch::randn({1, 128, 8, 8}), PokeMode::kShift, 2));
        EXPECT_EQ(states.back().depth(), static_cast<std::size_t>(depth));
    }
}
