#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <numbers>
#include <random>

#include "homsim/event_sim.hpp"
#include "homsim/interference.hpp"
#include "homsim/quadrature.hpp"

using namespace homsim;
using Catch::Approx;

namespace {

constexpr double kDt = 450e-9;

TwoPhotonSetup make_setup(double theta, double phi, double mu) {
    TwoPhotonSetup s;
    s.mode_a = PhotonMode(TemporalEnvelope::sin2_double_hump(kDt), PhaseProfile{0.0, 0.0});
    s.mode_b = PhotonMode(TemporalEnvelope::sin2_double_hump(kDt), PhaseProfile{0.0, phi});
    s.theta = theta;
    s.coherence = CoherenceModel(mu);
    return s;
}

// independent 2-D quadrature of the cross density over one (bin, bin) quadrant
double quadrant_cross_mass(const TwoPhotonSetup& s, int bin0, int bin1,
                           const FeedbackPolicy& fb = {}) {
    const double lo0 = bin0 == 0 ? 0.0 : 0.5 * kDt, hi0 = lo0 + 0.5 * kDt;
    const double lo1 = bin1 == 0 ? 0.0 : 0.5 * kDt, hi1 = lo1 + 0.5 * kDt;
    return simpson(
        [&](double t0) {
            return simpson([&](double t1) { return pjoint_t0_tau(s, t0, t1 - t0, fb); }, lo1,
                           hi1, 512);
        },
        lo0, hi0, 512);
}

}  // namespace

TEST_CASE("identical coherent modes never produce cross-detector clicks") {
    const auto s = make_setup(0.0, 0.0, 1.0);
    // densities scale like the squared peak intensity, so "zero" means small
    // relative to that scale
    const double scale = (8.0 / (3.0 * kDt)) * (8.0 / (3.0 * kDt));
    for (auto [t0, tau] : {std::pair{0.1 * kDt, 0.2 * kDt}, {0.3 * kDt, -0.1 * kDt},
                           {0.7 * kDt, 0.05 * kDt}, {0.25 * kDt, 0.5 * kDt}})
        CHECK(pjoint_t0_tau(s, t0, tau) == Approx(0.0).margin(1e-12 * scale));
}

TEST_CASE("perpendicular photons split cross and same mass evenly") {
    const auto s = make_setup(0.5 * std::numbers::pi, 0.0, 1.0);
    for (auto [t0, tau] : {std::pair{0.1 * kDt, 0.2 * kDt}, {0.6 * kDt, -0.3 * kDt}}) {
        const auto d = pair_density(s, t0, tau);
        CHECK(d.cross == Approx(d.same()).epsilon(1e-12));
        CHECK(d.same_cc == Approx(d.same_dd).epsilon(1e-12));
    }
}

TEST_CASE("interference term is linear in the mutual coherence") {
    for (double mu : {0.17, 0.5, 0.61, 0.83}) {
        const auto s0 = make_setup(0.0, std::numbers::pi, 0.0);
        const auto s1 = make_setup(0.0, std::numbers::pi, 1.0);
        const auto sm = make_setup(0.0, std::numbers::pi, mu);
        const double t0 = 0.2 * kDt, tau = 0.4 * kDt;
        const double expected = (1.0 - mu) * pjoint_t0_tau(s0, t0, tau) +
                                mu * pjoint_t0_tau(s1, t0, tau);
        CHECK(pjoint_t0_tau(sm, t0, tau) == Approx(expected).epsilon(1e-12));
    }
}

TEST_CASE("incompatible envelopes are rejected") {
    TwoPhotonSetup s;
    s.mode_a = PhotonMode(TemporalEnvelope::sin2_double_hump(kDt), PhaseProfile{});
    s.mode_b = PhotonMode(TemporalEnvelope::sin2_double_hump(2.0 * kDt), PhaseProfile{});
    CHECK_THROWS_AS(s.delta_t(), ConfigError);
}

TEST_CASE("joint density curves are normalized for every scenario") {
    for (auto kind : {ScenarioKind::Perpendicular, ScenarioKind::ParallelPhi0,
                      ScenarioKind::ParallelPhiPi, ScenarioKind::Feedback}) {
        const auto sc = Scenario::make(kind);
        const auto curve = pjoint_tau(scenario_setup(sc), scenario_feedback_policy(sc));
        CHECK(curve.normalization() == Approx(1.0).margin(1e-4));
    }
}

TEST_CASE("static scenario curves are symmetric in the time difference") {
    for (auto kind : {ScenarioKind::Perpendicular, ScenarioKind::ParallelPhiPi}) {
        const auto sc = Scenario::make(kind);
        const auto curve = pjoint_tau(scenario_setup(sc));
        const std::size_t n = curve.tau.size();
        for (std::size_t i = 0; i < n; i += 40) {
            CHECK(curve.cross_detector[i] ==
                  Approx(curve.cross_detector[n - 1 - i]).margin(1e-3 / kDt));
            CHECK(curve.same_detector[i] ==
                  Approx(curve.same_detector[n - 1 - i]).margin(1e-3 / kDt));
        }
    }
}

TEST_CASE("opposed-phase satellite peaks double the perpendicular ones") {
    const auto perp = pjoint_tau(scenario_setup(Scenario::make(ScenarioKind::Perpendicular)));
    const auto anti = pjoint_tau(scenario_setup(Scenario::make(ScenarioKind::ParallelPhiPi)));
    // satellite peaks sit at half the photon length; the 801-point grid hits
    // them exactly
    const std::size_t i_left = 200, i_right = 600;
    REQUIRE(perp.tau[i_left] == Approx(-0.5 * kDt));
    REQUIRE(perp.tau[i_right] == Approx(0.5 * kDt));
    for (std::size_t i : {i_left, i_right})
        CHECK(anti.cross_detector[i] == Approx(2.0 * perp.cross_detector[i]).epsilon(1e-3));
}

TEST_CASE("feedback curve suppresses the late satellite and doubles the early one") {
    const auto sc = Scenario::make(ScenarioKind::Feedback);
    const auto perp = pjoint_tau(scenario_setup(Scenario::make(ScenarioKind::Perpendicular)));
    const auto feed = pjoint_tau(scenario_setup(sc), scenario_feedback_policy(sc));
    const std::size_t i_left = 200, i_right = 600;
    // tau < 0: D clicked first, the phase switch has taken effect
    CHECK(feed.cross_detector[i_left] ==
          Approx(2.0 * perp.cross_detector[i_left]).epsilon(1e-3));
    // tau > 0: C clicked first, no switch, bosonic null (zero relative to the
    // undoubled satellite height)
    CHECK(feed.cross_detector[i_right] ==
          Approx(0.0).margin(1e-9 * perp.cross_detector[i_right]));
}

TEST_CASE("curve generation rejects bad grids and exposes curve errors") {
    const auto s = make_setup(0.0, 0.0, 1.0);
    CHECK_THROWS_AS(pjoint_tau(s, {}, 128), ConfigError);  // even
    CHECK_THROWS_AS(pjoint_tau(s, {}, 101), ConfigError);  // too coarse
}

TEST_CASE("time-bin outcome weights match the beam-splitter expansion") {
    SECTION("coherent, phi = 0") {
        const auto d = timebin_output_distribution(0.0, CoherenceModel(1.0));
        CHECK(d.at("C1C2") == Approx(0.25));
        CHECK(d.at("D1D2") == Approx(0.25));
        CHECK(d.at("C1D2") == Approx(0.0).margin(1e-15));
        CHECK(d.at("C2D1") == Approx(0.0).margin(1e-15));
        CHECK(d.at("C1D1") == 0.0);
        CHECK(d.at("C2D2") == 0.0);
        for (const char* k : {"C1C1", "C2C2", "D1D1", "D2D2"}) CHECK(d.at(k) == Approx(0.125));
        CHECK(d.total() == Approx(1.0));
    }
    SECTION("coherent, phi = pi") {
        const auto d = timebin_output_distribution(std::numbers::pi, CoherenceModel(1.0));
        CHECK(d.at("C1D2") == Approx(0.25));
        CHECK(d.at("C2D1") == Approx(0.25));
        CHECK(d.at("C1C2") == Approx(0.0).margin(1e-15));
        CHECK(d.at("D1D2") == Approx(0.0).margin(1e-15));
        CHECK(d.cross_detector_total() == Approx(0.5));
        CHECK(d.total() == Approx(1.0));
    }
    SECTION("perpendicular: photons route independently") {
        const auto d = timebin_output_distribution(0.0, CoherenceModel(1.0), true);
        for (const char* k : {"C1C1", "C2C2", "D1D1", "D2D2"}) CHECK(d.at(k) == Approx(0.0625));
        for (const char* k : {"C1C2", "C1D1", "C1D2", "C2D1", "C2D2", "D1D2"})
            CHECK(d.at(k) == Approx(0.125));
        CHECK(d.total() == Approx(1.0));
    }
    SECTION("partial coherence mixes the two cases") {
        const double mu = 0.61;
        const auto d = timebin_output_distribution(std::numbers::pi, CoherenceModel(mu));
        CHECK(d.at("C1D2") == Approx(mu * 0.25 + (1.0 - mu) * 0.125));
        CHECK(d.at("C1C2") == Approx((1.0 - mu) * 0.125));
        CHECK(d.at("C1D1") == Approx((1.0 - mu) * 0.125));
        CHECK(d.total() == Approx(1.0));
    }
    SECTION("total is one and cross mass bounded by one half for random inputs") {
        std::mt19937 gen(7);
        std::uniform_real_distribution<double> u(0.0, 1.0);
        for (int i = 0; i < 50; ++i) {
            const double phi = 2.0 * std::numbers::pi * u(gen);
            const double mu = u(gen);
            const auto d = timebin_output_distribution(phi, CoherenceModel(mu), u(gen) < 0.3);
            CHECK(d.total() == Approx(1.0).epsilon(1e-12));
            CHECK(d.cross_detector_total() <= 0.5 + 1e-12);
        }
    }
}

TEST_CASE("coherence model rejects values outside the unit interval") {
    CHECK_THROWS_AS(CoherenceModel(-0.1), ConfigError);
    CHECK_THROWS_AS(CoherenceModel(1.1), ConfigError);
}

TEST_CASE("conditional second-bin outcomes follow the projected substate") {
    const auto dc = conditional_second_bin({Detector::D, TimeBin::I1}, std::numbers::pi);
    CHECK(dc.p_c2 == Approx(1.0));
    CHECK(dc.p_d2 == Approx(0.0).margin(1e-15));
    const auto cc = conditional_second_bin({Detector::C, TimeBin::I1}, std::numbers::pi);
    CHECK(cc.p_c2 == Approx(0.0).margin(1e-15));
    CHECK(cc.p_d2 == Approx(1.0));
    const auto c0 = conditional_second_bin({Detector::C, TimeBin::I1}, 0.0);
    CHECK(c0.p_c2 == Approx(1.0));
    const auto half = conditional_second_bin({Detector::D, TimeBin::I1}, 0.5 * std::numbers::pi);
    CHECK(half.p_c2 == Approx(0.5));
    CHECK_THROWS_AS(conditional_second_bin({Detector::C, TimeBin::I2}, 0.0), ConfigError);
}

TEST_CASE("continuous quadrant masses agree with the discrete algebra") {
    SECTION("opposed phases") {
        const auto s = make_setup(0.0, std::numbers::pi, 1.0);
        const auto d = timebin_output_distribution(std::numbers::pi, CoherenceModel(1.0));
        CHECK(quadrant_cross_mass(s, 0, 1) == Approx(d.at("C1D2")).margin(1e-3));
        CHECK(quadrant_cross_mass(s, 1, 0) == Approx(d.at("C2D1")).margin(1e-3));
        CHECK(quadrant_cross_mass(s, 0, 0) == Approx(0.0).margin(1e-3));
        CHECK(quadrant_cross_mass(s, 1, 1) == Approx(0.0).margin(1e-3));
    }
    SECTION("perpendicular") {
        const auto s = make_setup(0.5 * std::numbers::pi, 0.0, 1.0);
        const auto d = timebin_output_distribution(0.0, CoherenceModel(1.0), true);
        // the continuous cross density covers both (C at t0, D at t1) orders,
        // so one quadrant carries C1D2 and the mirrored D-first order C2D1
        CHECK(quadrant_cross_mass(s, 0, 1) == Approx(d.at("C1D2")).margin(1e-3));
        CHECK(quadrant_cross_mass(s, 0, 0) == Approx(d.at("C1D1")).margin(1e-3));
    }
}

TEST_CASE("outcome labels are canonical") {
    CHECK(outcome_label({Detector::C, TimeBin::I1}) == "C1");
    CHECK(outcome_label({Detector::D, TimeBin::I2}) == "D2");
    CHECK(pair_label({Detector::D, TimeBin::I2}, {Detector::C, TimeBin::I1}) == "C1D2");
    CHECK(pair_label({Detector::C, TimeBin::I1}, {Detector::D, TimeBin::I2}) == "C1D2");
    CHECK(OutcomeDistribution::bunched("C1C1"));
    CHECK_FALSE(OutcomeDistribution::bunched("C1C2"));
}
