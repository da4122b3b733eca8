// Acceptance suite: prints one PASS/FAIL line per criterion and exits
// nonzero if any criterion fails.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "homsim/homsim.hpp"

namespace {

using namespace homsim;
using Clock = std::chrono::steady_clock;

int g_failures = 0;

void report(int number, const std::string& name, bool ok, const std::string& detail) {
    std::printf("%s  criterion %2d  %-28s %s\n", ok ? "PASS" : "FAIL", number, name.c_str(),
                detail.c_str());
    if (!ok) ++g_failures;
}

double seconds_since(Clock::time_point t0) {
    return std::chrono::duration<double>(Clock::now() - t0).count();
}

// --------------------------------------------------------------------------

void criterion_1_normalization() {
    bool ok = true;
    std::string detail;
    for (auto kind : {ScenarioKind::Perpendicular, ScenarioKind::ParallelPhi0,
                      ScenarioKind::ParallelPhiPi, ScenarioKind::Feedback}) {
        const auto sc = Scenario::make(kind);
        const auto t0 = Clock::now();
        double norm = 0.0;
        try {
            norm = pjoint_tau(scenario_setup(sc), scenario_feedback_policy(sc)).normalization();
        } catch (const std::exception& e) {
            ok = false;
            detail += std::string(" [") + e.what() + "]";
            continue;
        }
        const double dt = seconds_since(t0);
        if (std::abs(norm - 1.0) > 1e-4 || dt >= 1.0) ok = false;
        char buf[80];
        std::snprintf(buf, sizeof(buf), " |norm-1|=%.1e t=%.2fs", std::abs(norm - 1.0), dt);
        detail += buf;
    }
    report(1, "curve normalization", ok, detail);
}

void criterion_2_bosonic_null() {
    const auto sc = Scenario::make(ScenarioKind::ParallelPhi0, 1.0);
    const auto curve = pjoint_tau(scenario_setup(sc));
    double max_cross = 0.0;
    for (double v : curve.cross_detector) max_cross = std::max(max_cross, std::abs(v));
    const bool analytic_ok = max_cross * kDefaultPhotonLength <= 1e-12;  // dimensionless

    ExperimentConfig cfg;
    cfg.dark_rate = 0.0;
    cfg.detector_efficiency = 1.0;
    cfg.scenario = sc;
    const std::int64_t n_cycles = 1000000;
    const auto res = run_experiment(cfg, n_cycles, false);
    std::set<std::int64_t> cycles_c(res.stream_c.cycle_index.begin(),
                                    res.stream_c.cycle_index.end());
    std::int64_t coincidences = 0;
    for (std::int64_t cyc : res.stream_d.cycle_index)
        if (cycles_c.count(cyc)) ++coincidences;

    char buf[128];
    std::snprintf(buf, sizeof(buf), "max|p_cross|*dt=%.2e, %lld coincidences in %lld pairs",
                  max_cross * kDefaultPhotonLength, static_cast<long long>(coincidences),
                  static_cast<long long>(res.totals.pair_events));
    report(2, "bosonic null", analytic_ok && coincidences == 0 && res.totals.pair_events > 0,
           buf);
}

void criterion_3_fermionic_doubling() {
    const auto perp = pjoint_tau(scenario_setup(Scenario::make(ScenarioKind::Perpendicular)));
    const auto anti = pjoint_tau(scenario_setup(Scenario::make(ScenarioKind::ParallelPhiPi)));
    bool ok = true;
    double worst = 0.0;
    for (std::size_t i : {std::size_t{200}, std::size_t{600}}) {  // tau = -dt/2, +dt/2
        const double ratio = anti.cross_detector[i] / perp.cross_detector[i];
        worst = std::max(worst, std::abs(ratio - 2.0) / 2.0);
        if (std::abs(ratio - 2.0) / 2.0 > 1e-3) ok = false;
    }
    char buf[64];
    std::snprintf(buf, sizeof(buf), "max relative deviation from 2x: %.2e", worst);
    report(3, "satellite-peak doubling", ok, buf);
}

void criterion_4_eighth_matrix() {
    Rng rng(2024);
    const auto sc = Scenario::make(ScenarioKind::Perpendicular);
    const int n = 400000;
    std::map<std::string, int> counts;
    for (int i = 0; i < n; ++i) {
        const auto ev = sample_pair_event(sc, rng);
        if (ev.first.outcome.detector == ev.second.outcome.detector) continue;
        counts[pair_label(ev.first.outcome, ev.second.outcome)]++;
    }
    const double p = 0.125;
    const double limit = 3.0 * std::sqrt(p * (1.0 - p) / n);
    bool ok = true;
    double worst = 0.0;
    for (const char* k : {"C1D1", "C1D2", "C2D1", "C2D2"}) {
        const double f = static_cast<double>(counts[k]) / n;
        worst = std::max(worst, std::abs(f - p));
        if (std::abs(f - p) > limit) ok = false;
    }
    char buf[96];
    std::snprintf(buf, sizeof(buf), "n=%d, worst |f-1/8|=%.2e (3 sigma=%.2e)", n, worst, limit);
    report(4, "cross-bin entries = 1/8", ok, buf);
}

void criterion_5_feedback_steering() {
    bool ok = true;
    std::string notes;
    {  // zero latency: every cross-bin second click lands on C
        Rng rng(5);
        const auto sc = Scenario::make(ScenarioKind::Feedback, 1.0, kDefaultPhotonLength, 0.0);
        int cross = 0, to_c = 0;
        for (int i = 0; i < 100000; ++i) {
            const auto ev = sample_pair_event(sc, rng);
            if (!ev.cross_bin) continue;
            ++cross;
            if (ev.second.outcome.detector == Detector::C) ++to_c;
        }
        const double frac = static_cast<double>(to_c) / cross;
        const double sigma = std::sqrt(1.0 / cross);  // p=1 limit: <= 1/sqrt(n)
        if (1.0 - frac > 3.0 * sigma) ok = false;
        char buf[64];
        std::snprintf(buf, sizeof(buf), " P(C|click)=%.5f", frac);
        notes += buf;
    }
    {  // 97 ns latency over one million cycles
        ExperimentConfig cfg;
        cfg.scenario = Scenario::make(ScenarioKind::Feedback);
        const auto t0 = Clock::now();
        const auto res = run_experiment(cfg, 1000000, false);
        const double elapsed = seconds_since(t0);
        const double frac = static_cast<double>(res.totals.steering_violations) /
                            static_cast<double>(res.totals.d_first_cross);
        const double quad = error_rate(97.0 / 450.0);
        const double sigma =
            std::sqrt(quad * (1.0 - quad) / static_cast<double>(res.totals.d_first_cross));
        if (std::abs(frac - quad) > 3.0 * sigma) ok = false;
        // the observed violation fraction is also consistent with the round
        // 0.2% figure at the available statistics
        if (std::abs(frac - 0.002) > 3.0 * sigma) ok = false;
        if (elapsed >= 60.0) ok = false;

        // independent Monte Carlo oracle for the quadrature value
        Rng rng(8);
        const int nmc = 4000000;
        int hits = 0;
        const double t_frac = 97.0 / 450.0;
        for (int i = 0; i < nmc; ++i) {
            const double t1 = detail::sample_intensity_time(rng, 1.0, 0.0, 0.5);
            const double t2 = detail::sample_intensity_time(rng, 1.0, 0.5, 1.0);
            if (t2 - t1 < t_frac) ++hits;
        }
        const double mc = static_cast<double>(hits) / nmc;
        const double mc_sigma = std::sqrt(mc * (1.0 - mc) / nmc);
        if (std::abs(mc - quad) > 3.0 * mc_sigma) ok = false;

        char buf[160];
        std::snprintf(buf, sizeof(buf),
                      " violations=%.5f quadrature=%.5f oracle=%.5f t=%.1fs", frac, quad, mc,
                      elapsed);
        notes += buf;
    }
    report(5, "feedback steering + dead time", ok, notes);
}

struct ScenarioCounts {
    double total = 0.0;
    double cross = 0.0;
    double d1c2 = 0.0;
    double c1d2 = 0.0;
};

ScenarioCounts run_and_count(ScenarioKind kind, double mu, std::uint64_t seed,
                             std::int64_t n_cycles) {
    ExperimentConfig cfg;
    cfg.dark_rate = 100.0;
    cfg.rng_seed = seed;
    cfg.scenario = Scenario::make(kind, mu);
    const auto sim = run_experiment(cfg, n_cycles, false);
    const auto res = analyze_streams(sim.stream_c, sim.stream_d, n_cycles, AnalysisConfig{});
    ScenarioCounts out;
    for (const auto& [k, v] : res.cross_bin) out.total += v;
    out.cross = res.cross_bin.at("C1D2") + res.cross_bin.at("C2D1");
    out.d1c2 = res.cross_bin.at("C2D1");  // D fired first, C followed
    out.c1d2 = res.cross_bin.at("C1D2");
    return out;
}

void criterion_6_visibility_identities() {
    bool ok = true;
    std::string detail;
    const std::int64_t n_cycles = 400000;
    for (double mu : {1.0, 0.61}) {
        const auto a = run_and_count(ScenarioKind::Perpendicular, mu, 101, n_cycles);
        const auto b = run_and_count(ScenarioKind::ParallelPhi0, mu, 102, n_cycles);
        const auto c = run_and_count(ScenarioKind::ParallelPhiPi, mu, 103, n_cycles);
        const auto d = run_and_count(ScenarioKind::Feedback, mu, 104, n_cycles);
        CorrelationAggregates n;
        n.n_parallel_total = b.total;
        n.n_perp_total = a.total;
        n.n_parallel_cross = b.cross;
        n.n_perp_cross = a.cross;
        n.n_phi0_cross = b.cross;
        n.n_phipi_cross = c.cross;
        n.n_d1c2 = d.d1c2;
        n.n_c1d2 = d.c1d2;
        const auto v = visibilities(n);
        if (std::abs(v.v_ref - mu) > 0.03) ok = false;
        // statistical agreement between the three interference visibilities
        if (std::abs(v.v_phi - v.v_ref) > 0.05) ok = false;
        if (std::abs(v.v_feed - v.v_ref) > 0.05) ok = false;
        char buf[128];
        std::snprintf(buf, sizeof(buf), " mu=%.2f: V_ref=%.3f V_phi=%.3f V_feed=%.3f", mu,
                      v.v_ref, v.v_phi, v.v_feed);
        detail += buf;
    }
    report(6, "visibility identities V = mu", ok, detail);
}

void criterion_7_pipeline_closure() {
    ExperimentConfig cfg;
    cfg.scenario = Scenario::make(ScenarioKind::ParallelPhiPi);
    const std::int64_t n_cycles = 400000;
    const auto sim = run_experiment(cfg, n_cycles, false);
    const auto res = analyze_streams(sim.stream_c, sim.stream_d, n_cycles, AnalysisConfig{});
    const auto curve = pjoint_tau(scenario_setup(cfg.scenario));

    const double dt = kDefaultPhotonLength;
    const double width = 2.0 * dt / 50.0;
    const auto comp =
        sliding_histogram(res.correlations, width, width, dt - 0.5 * width, res.norm_total);
    auto theory_at = [&](double tau) {
        const double pos = (tau - curve.tau.front()) /
                           (curve.tau.back() - curve.tau.front()) *
                           static_cast<double>(curve.tau.size() - 1);
        const auto i = static_cast<std::size_t>(
            std::clamp(pos, 0.0, static_cast<double>(curve.tau.size() - 2)));
        const double w = pos - static_cast<double>(i);
        return (1.0 - w) * curve.cross_detector[i] + w * curve.cross_detector[i + 1];
    };
    double chi2 = 0.0;
    int dof = 0;
    for (std::size_t i = 0; i < comp.centers.size(); ++i) {
        const double expected = theory_at(comp.centers[i]) * width * res.norm_total;
        if (expected < 5.0) continue;
        const double d = comp.counts[i] - expected;
        chi2 += d * d / expected;
        ++dof;
    }
    const double per_dof = dof > 0 ? chi2 / dof : 1e9;
    char buf[96];
    std::snprintf(buf, sizeof(buf), "chi2/dof = %.3f over %d windows", per_dof, dof);
    report(7, "pipeline matches theory curve", dof >= 20 && per_dof < 2.0, buf);
}

void criterion_8_mle_and_normalization() {
    std::mt19937 gen(8);
    std::uniform_real_distribution<double> u(0.0, 50.0);
    bool ok = normalization_factor(1.0) == 0.25;
    for (int i = 0; i < 1000; ++i) {
        const double n = std::floor(u(gen));
        const double lb = u(gen);
        if (mle_signal(n, lb) != std::max(0.0, n - lb)) ok = false;
    }
    report(8, "signal MLE and pair normalization", ok,
           "1000 random pairs exact, eta=1 ratio = 0.25");
}

void criterion_9_gate_fit() {
    GateFit truth;
    truth.a = 2.0;
    truth.b = 50.0;
    truth.c = 20.0;
    truth.p1 = 0.0;
    truth.p2 = 450e-9;
    truth.p3 = 500e-9;
    truth.p4 = 1000e-9;
    const int nb = 250;
    const double bw = 1000e-9 / nb;
    std::vector<double> clean(nb);
    for (int i = 0; i < nb; ++i)
        clean[i] = truth.bin_integral(i * bw, (i + 1) * bw) / bw;

    const GateFit fit = fit_gate(clean, bw);
    const double scale = nb * bw;
    auto rel = [&](double got, double want, double s) { return std::abs(got - want) / s; };
    double worst = 0.0;
    worst = std::max(worst, rel(fit.p1, truth.p1, scale));
    worst = std::max(worst, rel(fit.p2, truth.p2, scale));
    worst = std::max(worst, rel(fit.p3, truth.p3, scale));
    worst = std::max(worst, rel(fit.p4, truth.p4, scale));
    worst = std::max(worst, rel(fit.a, truth.a, truth.a));
    worst = std::max(worst, rel(fit.b, truth.b, truth.b));
    worst = std::max(worst, rel(fit.c, truth.c, truth.c));
    const bool noiseless_ok = worst <= 1e-6;

    std::mt19937 gen(9);
    int good = 0;
    const int trials = 100;
    for (int t = 0; t < trials; ++t) {
        std::vector<double> noisy(nb);
        for (int i = 0; i < nb; ++i)
            noisy[i] = std::poisson_distribution<int>(clean[i])(gen);
        try {
            const GateFit f = fit_gate(noisy, bw);
            if (std::abs(f.p1 - truth.p1) <= 10e-9 && std::abs(f.p2 - truth.p2) <= 10e-9)
                ++good;
        } catch (const AnalysisError&) {
        }
    }
    char buf[96];
    std::snprintf(buf, sizeof(buf), "noiseless worst rel err %.1e; noisy %d/%d within 10 ns",
                  worst, good, trials);
    report(9, "gate-fit round trip", noiseless_ok && good >= 95, buf);
}

void criterion_10_circuit_truth_table() {
    bool ok = true;
    // for every static combination of (det, w_det, w_phase): after an armed
    // idle step, a detector edge toggles the flip-flop only when the window
    // is open, and the phase output is q AND w_phase
    for (int mask = 0; mask < 8; ++mask) {
        const bool det = mask & 1, w_det = mask & 2, w_phase = mask & 4;
        CircuitState st;
        circuit_step(st, {.det = false, .w_det = w_det, .w_phase = w_phase}, 0.0);
        const auto out = circuit_step(st, {.det = det, .w_det = w_det, .w_phase = w_phase}, 1.0);
        const bool expect_q = det && w_det;
        const bool expect_phase = expect_q && w_phase;
        if (st.jk_q != expect_q || out.phase != expect_phase) ok = false;
    }
    report(10, "circuit truth table", ok, "8/8 input combinations");
}

}  // namespace

int main() {
    criterion_1_normalization();
    criterion_2_bosonic_null();
    criterion_3_fermionic_doubling();
    criterion_4_eighth_matrix();
    criterion_5_feedback_steering();
    criterion_6_visibility_identities();
    criterion_7_pipeline_closure();
    criterion_8_mle_and_normalization();
    criterion_9_gate_fit();
    criterion_10_circuit_truth_table();
    if (g_failures > 0) {
        std::printf("ACCEPTANCE: %d criterion(s) FAILED\n", g_failures);
        return 1;
    }
    std::printf("ACCEPTANCE: all criteria passed\n");
    return 0;
}
