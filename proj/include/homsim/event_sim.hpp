#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>
#include <string>
#include <vector>

#include "homsim/errors.hpp"
#include "homsim/feedback.hpp"
#include "homsim/interference.hpp"
#include "homsim/photon_model.hpp"

namespace homsim {

inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

// Deterministic RNG; all draws go through explicit helpers so streams are
// reproducible bit for bit.
class Rng {
  public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    // substream for one cycle, derived from (seed, cycle_index)
    static Rng substream(std::uint64_t seed, std::uint64_t cycle) {
        return Rng(splitmix64(seed ^ splitmix64(cycle)));
    }

    double uniform() {  // [0, 1)
        return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
    }

    bool bernoulli(double p) { return uniform() < p; }

    int poisson(double lambda) {
        // Knuth; fine for the small per-cycle rates used here
        const double limit = std::exp(-lambda);
        int k = 0;
        double p = 1.0;
        do {
            ++k;
            p *= uniform();
        } while (p > limit);
        return k - 1;
    }

  private:
    std::mt19937_64 engine_;
};

enum class ScenarioKind { Perpendicular, ParallelPhi0, ParallelPhiPi, Feedback };

// One of the four experiment configurations plus coherence and feedback
// parameters.
struct Scenario {
    ScenarioKind kind = ScenarioKind::Perpendicular;
    double phi = 0.0;  // inter-bin phase for the parallel cases
    double mu = 1.0;   // mutual coherence
    double delta_t = kDefaultPhotonLength;
    double feedback_latency = 97.0e-9;

    static Scenario make(ScenarioKind kind, double mu = 1.0,
                         double delta_t = kDefaultPhotonLength,
                         double feedback_latency = 97.0e-9) {
        Scenario s;
        s.kind = kind;
        s.mu = mu;
        s.delta_t = delta_t;
        s.feedback_latency = feedback_latency;
        s.phi = kind == ScenarioKind::ParallelPhiPi ? std::numbers::pi : 0.0;
        return s;
    }

    bool perpendicular() const { return kind == ScenarioKind::Perpendicular; }
    double theta() const { return perpendicular() ? 0.5 * std::numbers::pi : 0.0; }
};

inline TwoPhotonSetup scenario_setup(const Scenario& sc) {
    TwoPhotonSetup s;
    s.mode_a = PhotonMode(TemporalEnvelope::sin2_double_hump(sc.delta_t), PhaseProfile{0.0, 0.0});
    s.mode_b = PhotonMode(TemporalEnvelope::sin2_double_hump(sc.delta_t),
                          PhaseProfile{0.0, sc.phi});
    s.theta = sc.theta();
    s.coherence = CoherenceModel(sc.mu);
    return s;
}

inline FeedbackPolicy scenario_feedback_policy(const Scenario& sc) {
    FeedbackPolicy fb;
    fb.active = sc.kind == ScenarioKind::Feedback;
    fb.latency = sc.feedback_latency;
    return fb;
}

struct ExperimentConfig {
    double repetition_period = 1e-6;
    double photon_window = 450e-9;
    double repump_window = 550e-9;
    double delay_transmission = 0.5;          // eta_L
    double photon_emission_probability = 0.5;  // per cycle
    double detector_efficiency = 1.0;          // per detector
    double dark_rate = 0.0;                    // counts/s per detector
    double tdc_resolution = 81e-12;
    std::uint64_t rng_seed = 1;
    Scenario scenario;

    void validate() const {
        if (photon_window <= 0.0 || repump_window <= 0.0 || repetition_period <= 0.0)
            throw ConfigError("config: windows must have non-zero duration");
        if (std::abs(photon_window + repump_window - repetition_period) >
            1e-12 * repetition_period)
            throw ConfigError("config: photon_window + repump_window must equal the period");
        for (double p : {delay_transmission, photon_emission_probability, detector_efficiency})
            if (p < 0.0 || p > 1.0) throw ConfigError("config: probabilities must lie in [0,1]");
        if (delay_transmission <= 0.0)
            throw ConfigError("config: delay transmission must be positive");
        if (dark_rate < 0.0) throw ConfigError("config: dark rate must be non-negative");
        if (tdc_resolution <= 0.0) throw ConfigError("config: tdc resolution must be positive");
        if (scenario.delta_t > photon_window)
            throw ConfigError("config: photon length exceeds the photon window");
    }
};

// Raw click record of one detector; times quantized to the TDC resolution.
struct TimestampStream {
    Detector detector = Detector::C;
    std::vector<std::int64_t> timestamp_ps;
    std::vector<std::int64_t> cycle_index;
};

struct TimedClick {
    DetectionOutcome outcome;
    double t;  // seconds within the photon window
};

struct PairEvent {
    TimedClick first;
    TimedClick second;
    bool coherent = true;
    double phi_eff = 0.0;   // phase seen by the second click (cross-bin only)
    bool switched = false;  // feedback switch took effect before the second click
    bool cross_bin = false;
    // D-first cross-bin event whose second click did not land on C
    bool steering_violation = false;
};

namespace detail {

inline double sample_intensity_time(Rng& rng, double dt, double lo, double hi) {
    // rejection under sin^4(2 pi t / dt); the mode is 1
    for (;;) {
        const double t = lo + (hi - lo) * rng.uniform();
        const double s = std::sin(2.0 * std::numbers::pi * t / dt);
        if (rng.uniform() < s * s * s * s) return t;
    }
}

}  // namespace detail

// Draws one photon-pair interference event. The stepwise phase factorizes
// the sampling: a bin pair first, then independent within-bin detection
// times from the intensity envelope, then detectors from the time-bin
// algebra (conditioned on the effective phase for feedback).
inline PairEvent sample_pair_event(const Scenario& sc, Rng& rng) {
    const double dt = sc.delta_t;
    const double half = 0.5 * dt;
    PairEvent ev;
    ev.coherent = !sc.perpendicular() && rng.bernoulli(sc.mu);

    const double r = rng.uniform();
    TimeBin bin1, bin2;
    if (r < 0.25) {
        bin1 = bin2 = TimeBin::I1;
    } else if (r < 0.5) {
        bin1 = bin2 = TimeBin::I2;
    } else {
        bin1 = TimeBin::I1;
        bin2 = TimeBin::I2;
    }
    double t1 = detail::sample_intensity_time(rng, dt, bin1 == TimeBin::I1 ? 0.0 : half,
                                              bin1 == TimeBin::I1 ? half : dt);
    double t2 = detail::sample_intensity_time(rng, dt, bin2 == TimeBin::I1 ? 0.0 : half,
                                              bin2 == TimeBin::I1 ? half : dt);
    if (t2 < t1) std::swap(t1, t2);
    ev.cross_bin = bin1 != bin2;

    Detector d1, d2;
    if (!ev.coherent) {
        d1 = rng.bernoulli(0.5) ? Detector::C : Detector::D;
        d2 = rng.bernoulli(0.5) ? Detector::C : Detector::D;
    } else if (!ev.cross_bin) {
        // bunched: within one bin the photons are identical
        d1 = d2 = rng.bernoulli(0.5) ? Detector::C : Detector::D;
    } else {
        d1 = rng.bernoulli(0.5) ? Detector::C : Detector::D;
        double phi_eff = sc.phi;
        if (sc.kind == ScenarioKind::Feedback) {
            // same rule as effective_phase_timeline, inlined for the hot path
            const double target = decide_phase(d1);
            const double t_switch = t1 + sc.feedback_latency;
            ev.switched = target != 0.0 && t_switch <= dt && t2 >= t_switch;
            phi_eff = ev.switched ? target : 0.0;
        }
        ev.phi_eff = phi_eff;
        const auto cond = conditional_second_bin({d1, TimeBin::I1}, phi_eff);
        d2 = rng.bernoulli(cond.p_c2) ? Detector::C : Detector::D;
    }
    ev.first = {{d1, bin1}, t1};
    ev.second = {{d2, bin2}, t2};
    if (sc.kind == ScenarioKind::Feedback && ev.cross_bin && d1 == Detector::D)
        ev.steering_violation = d2 != Detector::C;
    return ev;
}

// Slow validation oracle: 2-D rejection sampling on the analytic pair
// densities instead of the factorized bin-then-time draw.
class RejectionPairSampler {
  public:
    explicit RejectionPairSampler(const Scenario& sc)
        : sc_(sc), setup_(scenario_setup(sc)), fb_(scenario_feedback_policy(sc)) {
        const double dt = sc_.delta_t;
        const int ng = 128;
        for (int i = 0; i <= ng; ++i)
            for (int j = i; j <= ng; ++j) {
                const auto ch = channels(dt * i / ng, dt * j / ng);
                bound_ = std::max(bound_, ch[0] + ch[1] + ch[2] + ch[3]);
            }
        bound_ *= 1.5;
    }

    PairEvent sample(Rng& rng) const {
        const double dt = sc_.delta_t;
        for (;;) {
            const double x = dt * rng.uniform();
            const double y = dt * rng.uniform();
            const double t1 = std::min(x, y), t2 = std::max(x, y);
            const auto ch = channels(t1, t2);
            const double total = ch[0] + ch[1] + ch[2] + ch[3];
            if (total > bound_)
                throw AccuracyError("rejection sampler: density bound exceeded");
            if (rng.uniform() * bound_ >= total) continue;

            const double pick = rng.uniform() * total;
            Detector d1, d2;
            if (pick < ch[0]) {
                d1 = Detector::C;
                d2 = Detector::D;
            } else if (pick < ch[0] + ch[1]) {
                d1 = Detector::D;
                d2 = Detector::C;
            } else if (pick < ch[0] + ch[1] + ch[2]) {
                d1 = d2 = Detector::C;
            } else {
                d1 = d2 = Detector::D;
            }
            PairEvent ev;
            const double half = 0.5 * dt;
            const TimeBin b1 = t1 < half ? TimeBin::I1 : TimeBin::I2;
            const TimeBin b2 = t2 < half ? TimeBin::I1 : TimeBin::I2;
            ev.first = {{d1, b1}, t1};
            ev.second = {{d2, b2}, t2};
            ev.cross_bin = b1 != b2;
            if (sc_.kind == ScenarioKind::Feedback && ev.cross_bin && d1 == Detector::D)
                ev.steering_violation = d2 != Detector::C;
            return ev;
        }
    }

  private:
    // ordered times t1 < t2; the four channel densities (C-first cross,
    // D-first cross, both-on-C, both-on-D)
    std::array<double, 4> channels(double t1, double t2) const {
        const PairDensity a = pair_density(setup_, t1, t2 - t1, fb_);  // C clicks first
        const PairDensity b = pair_density(setup_, t2, t1 - t2, fb_);  // D clicks first
        return {a.cross, b.cross, 2.0 * a.same_cc, 2.0 * a.same_dd};
    }

    Scenario sc_;
    TwoPhotonSetup setup_;
    FeedbackPolicy fb_;
    double bound_ = 0.0;
};

struct GroundTruthEntry {
    std::int64_t cycle = 0;
    std::string outcome;  // first->second labels, e.g. "D1C2"
    double t_first = 0.0;
    double t_second = 0.0;
    bool coherent = true;
    double phi_eff = 0.0;
    bool switched = false;
    bool steering_violation = false;
};

struct SimTotals {
    std::int64_t cycles = 0;
    std::int64_t emitted = 0;
    std::int64_t pair_events = 0;
    std::int64_t singles = 0;
    std::int64_t dark_counts = 0;
    std::int64_t d_first_cross = 0;
    std::int64_t steering_violations = 0;
};

struct SimResult {
    TimestampStream stream_c;
    TimestampStream stream_d;
    std::vector<GroundTruthEntry> ground_truth;
    SimTotals totals;
};

// Generates raw detector timestamp streams for n_cycles production cycles:
// per-cycle emission, PBS routing into short/delay arms, delay-arm loss,
// interference when a delayed photon meets the next short one, detector
// efficiency, dark counts over the whole cycle, TDC quantization.
inline SimResult run_experiment(const ExperimentConfig& cfg, std::int64_t n_cycles,
                                bool keep_ground_truth = true) {
    cfg.validate();
    if (n_cycles < 1) throw ConfigError("run_experiment: n_cycles must be >= 1");

    SimResult res;
    res.stream_c.detector = Detector::C;
    res.stream_d.detector = Detector::D;
    res.totals.cycles = n_cycles;

    const std::int64_t tdc_ps = std::llround(cfg.tdc_resolution * 1e12);
    const std::int64_t period_ps = std::llround(cfg.repetition_period * 1e12);
    auto record = [&](Detector det, std::int64_t cycle, double t_in_cycle) {
        std::int64_t ps = cycle * period_ps + std::llround(t_in_cycle * 1e12);
        ps -= ps % tdc_ps;  // the tagger quantizes absolute time
        auto& stream = det == Detector::C ? res.stream_c : res.stream_d;
        stream.timestamp_ps.push_back(ps);
        stream.cycle_index.push_back(cycle);
    };

    bool delayed_present = false;  // long-arm photon from the previous cycle
    for (std::int64_t cycle = 0; cycle < n_cycles; ++cycle) {
        Rng rng = Rng::substream(cfg.rng_seed, static_cast<std::uint64_t>(cycle));

        const bool emitted = rng.bernoulli(cfg.photon_emission_probability);
        bool route_long = false;
        if (emitted) {
            ++res.totals.emitted;
            route_long = rng.bernoulli(0.5);
        }
        const bool short_now = emitted && !route_long;

        if (delayed_present && short_now) {
            ++res.totals.pair_events;
            const PairEvent ev = sample_pair_event(cfg.scenario, rng);
            for (const TimedClick& click : {ev.first, ev.second})
                if (rng.bernoulli(cfg.detector_efficiency))
                    record(click.outcome.detector, cycle, click.t);
            if (ev.cross_bin && ev.first.outcome.detector == Detector::D) {
                ++res.totals.d_first_cross;
                if (ev.steering_violation) ++res.totals.steering_violations;
            }
            if (keep_ground_truth) {
                GroundTruthEntry gt;
                gt.cycle = cycle;
                gt.outcome = outcome_label(ev.first.outcome) + outcome_label(ev.second.outcome);
                gt.t_first = ev.first.t;
                gt.t_second = ev.second.t;
                gt.coherent = ev.coherent;
                gt.phi_eff = ev.phi_eff;
                gt.switched = ev.switched;
                gt.steering_violation = ev.steering_violation;
                res.ground_truth.push_back(gt);
            }
        } else if (delayed_present || short_now) {
            // a lone photon at the beam splitter routes randomly
            ++res.totals.singles;
            const Detector det = rng.bernoulli(0.5) ? Detector::C : Detector::D;
            const double t = detail::sample_intensity_time(rng, cfg.scenario.delta_t, 0.0,
                                                           cfg.scenario.delta_t);
            if (rng.bernoulli(cfg.detector_efficiency)) record(det, cycle, t);
        }

        // the long-arm photon of this cycle becomes next cycle's delayed one
        delayed_present = emitted && route_long && rng.bernoulli(cfg.delay_transmission);

        const double lambda = cfg.dark_rate * cfg.repetition_period;
        if (lambda > 0.0) {
            for (Detector det : {Detector::C, Detector::D}) {
                const int n = rng.poisson(lambda);
                res.totals.dark_counts += n;
                for (int k = 0; k < n; ++k)
                    record(det, cycle, cfg.repetition_period * rng.uniform());
            }
        }
    }

    auto sort_stream = [](TimestampStream& s) {
        std::vector<std::size_t> idx(s.timestamp_ps.size());
        for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
        std::stable_sort(idx.begin(), idx.end(), [&s](std::size_t a, std::size_t b) {
            return s.timestamp_ps[a] < s.timestamp_ps[b];
        });
        TimestampStream out;
        out.detector = s.detector;
        out.timestamp_ps.reserve(idx.size());
        out.cycle_index.reserve(idx.size());
        for (std::size_t i : idx) {
            out.timestamp_ps.push_back(s.timestamp_ps[i]);
            out.cycle_index.push_back(s.cycle_index[i]);
        }
        s = std::move(out);
    };
    sort_stream(res.stream_c);
    sort_stream(res.stream_d);
    return res;
}

}  // namespace homsim
