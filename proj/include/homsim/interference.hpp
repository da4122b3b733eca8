#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <map>
#include <string>
#include <vector>

#include "homsim/errors.hpp"
#include "homsim/photon_model.hpp"
#include "homsim/quadrature.hpp"

namespace homsim {

enum class Detector { C, D };
enum class TimeBin { I1, I2 };

struct DetectionOutcome {
    Detector detector;
    TimeBin bin;

    bool operator==(const DetectionOutcome&) const = default;
};

inline std::string outcome_label(DetectionOutcome o) {
    std::string s(1, o.detector == Detector::C ? 'C' : 'D');
    s += o.bin == TimeBin::I1 ? '1' : '2';
    return s;
}

// Canonical label for an unordered outcome pair, e.g. "C1D2".
inline std::string pair_label(DetectionOutcome a, DetectionOutcome b) {
    std::string la = outcome_label(a), lb = outcome_label(b);
    return la <= lb ? la + lb : lb + la;
}

inline const std::array<DetectionOutcome, 4>& all_outcomes() {
    static const std::array<DetectionOutcome, 4> v{{{Detector::C, TimeBin::I1},
                                                    {Detector::C, TimeBin::I2},
                                                    {Detector::D, TimeBin::I1},
                                                    {Detector::D, TimeBin::I2}}};
    return v;
}

// Probabilities over unordered pairs of detector/time-bin outcomes,
// including the bunched (same detector, same bin) entries that a
// non-number-resolving detector cannot see.
struct OutcomeDistribution {
    std::map<std::string, double> weights;

    double at(const std::string& label) const {
        auto it = weights.find(label);
        return it == weights.end() ? 0.0 : it->second;
    }

    static bool bunched(const std::string& label) {
        return label.size() == 4 && label.substr(0, 2) == label.substr(2, 2);
    }

    double total() const {
        double s = 0.0;
        for (auto& [k, w] : weights) s += w;
        return s;
    }

    double bunched_total() const {
        double s = 0.0;
        for (auto& [k, w] : weights)
            if (bunched(k)) s += w;
        return s;
    }

    // Mass on pairs hitting both detectors C and D.
    double cross_detector_total() const {
        double s = 0.0;
        for (auto& [k, w] : weights)
            if (k.find('C') != std::string::npos && k.find('D') != std::string::npos) s += w;
        return s;
    }
};

// One-parameter mutual-coherence model; mu = 1 gives the ideal formulas,
// mu scales only the two-photon interference term.
struct CoherenceModel {
    double mu = 1.0;

    CoherenceModel() = default;
    explicit CoherenceModel(double m) : mu(m) {
        if (mu < 0.0 || mu > 1.0) throw ConfigError("mutual coherence mu must lie in [0,1]");
    }
};

struct TwoPhotonSetup {
    PhotonMode mode_a;
    PhotonMode mode_b;
    double theta = 0.0;  // relative polarization angle
    CoherenceModel coherence;

    double delta_t() const {
        if (std::abs(mode_a.envelope.duration() - mode_b.envelope.duration()) >
            1e-15 * mode_a.envelope.duration())
            throw ConfigError("incompatible modes: envelopes must share the same delta_t");
        return mode_a.envelope.duration();
    }
};

// Replaces the static phase step of mode B with the measurement-conditioned
// one: phi = pi after a first click on D (once the latency has elapsed),
// phi = 0 otherwise.
struct FeedbackPolicy {
    bool active = false;
    double latency = 0.0;  // seconds
};

struct PairDensity {
    double cross;    // C at t0, D at t0+tau (both time orders via the sign of tau)
    double same_cc;  // both clicks on C, ordered times
    double same_dd;  // both clicks on D, ordered times

    double same() const { return same_cc + same_dd; }
};

namespace detail {

inline double phase_cos_static(const TwoPhotonSetup& s, double t0, double t1, double dt) {
    const double arg = s.mode_a.phase.at(t0, dt) - s.mode_a.phase.at(t1, dt) +
                       s.mode_b.phase.at(t1, dt) - s.mode_b.phase.at(t0, dt);
    return std::cos(arg);
}

// Effective interference phase factor for a detection pair under feedback.
// Cross-bin pairs see phi = pi only if the first click was on D and the
// second click falls outside the dead-time window.
inline double phase_cos_feedback(Detector first_det, double t_first, double t_second,
                                 double dt, double latency) {
    const bool cross_bin = (t_first < 0.5 * dt) != (t_second < 0.5 * dt);
    if (!cross_bin) return 1.0;
    const bool switched = (first_det == Detector::D) && (t_second - t_first >= latency);
    return switched ? -1.0 : 1.0;
}

}  // namespace detail

// Joint detection probability densities at (t0, t0+tau) for the three
// detector pairings. The cross-detector term is
//   P^(HV)(t0,tau) - mu cos^2(theta) F(t0,tau),
// the same-detector terms carry the interference term with opposite sign.
inline PairDensity pair_density(const TwoPhotonSetup& s, double t0, double tau,
                                const FeedbackPolicy& fb = {}) {
    const double dt = s.delta_t();
    const double t1 = t0 + tau;
    const double ea0 = s.mode_a.envelope.amplitude(t0);
    const double eb1 = s.mode_b.envelope.amplitude(t1);
    const double ea1 = s.mode_a.envelope.amplitude(t1);
    const double eb0 = s.mode_b.envelope.amplitude(t0);
    const double phv = 0.25 * (ea0 * eb1 * ea0 * eb1 + ea1 * eb0 * ea1 * eb0);
    const double g = 0.5 * ea0 * eb1 * ea1 * eb0;
    const double c2t = std::cos(s.theta) * std::cos(s.theta);
    const double mu = s.coherence.mu;

    PairDensity d{};
    if (!fb.active) {
        const double f = mu * c2t * g * detail::phase_cos_static(s, t0, t1, dt);
        d.cross = phv - f;
        d.same_cc = 0.5 * (phv + f);
        d.same_dd = d.same_cc;
        return d;
    }
    const double t_first = std::min(t0, t1);
    const double t_second = std::max(t0, t1);
    // cross pair: C clicks at t0, so the first detector depends on the sign of tau
    const Detector cross_first = tau >= 0.0 ? Detector::C : Detector::D;
    const double fx = mu * c2t * g *
                      detail::phase_cos_feedback(cross_first, t_first, t_second, dt, fb.latency);
    const double fc = mu * c2t * g *
                      detail::phase_cos_feedback(Detector::C, t_first, t_second, dt, fb.latency);
    const double fd = mu * c2t * g *
                      detail::phase_cos_feedback(Detector::D, t_first, t_second, dt, fb.latency);
    d.cross = phv - fx;
    d.same_cc = 0.5 * (phv + fc);
    d.same_dd = 0.5 * (phv + fd);
    return d;
}

// Cross-detector joint density P_joint(t0, tau).
inline double pjoint_t0_tau(const TwoPhotonSetup& s, double t0, double tau,
                            const FeedbackPolicy& fb = {}) {
    return pair_density(s, t0, tau, fb).cross;
}

struct JointDensityCurve {
    std::vector<double> tau;            // seconds, uniform over [-dt, dt]
    std::vector<double> cross_detector;  // density 1/s
    std::vector<double> same_detector;   // density 1/s

    // int (P_joint + P_same) dtau via Simpson on the uniform grid.
    double normalization() const {
        const int n = static_cast<int>(tau.size()) - 1;
        const double h = (tau.back() - tau.front()) / n;
        double s = cross_detector.front() + same_detector.front() + cross_detector.back() +
                   same_detector.back();
        double odd = 0.0, even = 0.0;
        for (int i = 1; i < n; ++i) {
            const double v = cross_detector[i] + same_detector[i];
            (i % 2 ? odd : even) += v;
        }
        return (s + 4.0 * odd + 2.0 * even) * h / 3.0;
    }
};

// Integrates the pair densities over t0 on a fixed Simpson grid.
inline JointDensityCurve pjoint_tau(const TwoPhotonSetup& s, const FeedbackPolicy& fb = {},
                                    int n_tau = 801, int n_t0 = 4096) {
    const double dt = s.delta_t();
    if (n_tau < 129 || n_tau % 2 == 0)
        throw ConfigError("pjoint_tau: need an odd tau grid with >= 64 points per photon length");
    JointDensityCurve curve;
    curve.tau.resize(n_tau);
    curve.cross_detector.resize(n_tau);
    curve.same_detector.resize(n_tau);
    for (int i = 0; i < n_tau; ++i) {
        const double tau = -dt + 2.0 * dt * i / (n_tau - 1);
        curve.tau[i] = tau;
        // support of the integrand in t0 is [max(0,-tau), min(dt, dt-tau)]
        const double lo = std::max(0.0, -tau);
        const double hi = std::min(dt, dt - tau);
        if (hi <= lo) {
            curve.cross_detector[i] = 0.0;
            curve.same_detector[i] = 0.0;
            continue;
        }
        // The stepwise phase makes the integrand jump where t0 or t0+tau
        // crosses the bin boundary; integrate each smooth piece separately.
        std::vector<double> cuts{lo, hi};
        for (double b : {0.5 * dt, 0.5 * dt - tau})
            if (b > lo + 1e-18 && b < hi - 1e-18) cuts.push_back(b);
        std::sort(cuts.begin(), cuts.end());
        double cross = 0.0, same = 0.0;
        for (std::size_t p = 0; p + 1 < cuts.size(); ++p) {
            const double a = cuts[p], b = cuts[p + 1];
            int n = std::max(2, static_cast<int>(n_t0 * (b - a) / (hi - lo)));
            if (n % 2) ++n;
            const double h = (b - a) / n;
            for (int j = 0; j <= n; ++j) {
                const PairDensity d = pair_density(s, a + j * h, tau, fb);
                const double w = (j == 0 || j == n) ? 1.0 : (j % 2 ? 4.0 : 2.0);
                cross += w * d.cross * h / 3.0;
                same += w * d.same() * h / 3.0;
            }
        }
        curve.cross_detector[i] = cross;
        curve.same_detector[i] = same;
    }
    const double norm = curve.normalization();
    if (std::abs(norm - 1.0) > 1e-4)
        throw AccuracyError("pjoint_tau: grid too coarse, normalization off by " +
                            std::to_string(norm - 1.0));
    return curve;
}

// Discrete time-bin outcome algebra at the beam splitter.
//
// Expanding the two-photon input state through a^dag_{Aj,Bj} =
// (a^dag_{Cj} +/- a^dag_{Dj})/sqrt(2) gives, for mutually coherent photons:
//   bunched (X_j X_j):          1/8 each
//   C1C2, D1D2:                 (1 + cos phi)/8
//   C1D2, C2D1:                 (1 - cos phi)/8
//   C1D1, C2D2:                 0
// Distinguishable photons route independently instead. The mixture weight
// is the mutual coherence mu; perpendicular polarization forces the
// distinguishable case.
inline OutcomeDistribution timebin_output_distribution(double phi, CoherenceModel coherence,
                                                       bool perpendicular = false) {
    const double mu = perpendicular ? 0.0 : coherence.mu;
    const double c = std::cos(phi);
    OutcomeDistribution dist;
    auto add = [&dist](const char* k, double w) { dist.weights[k] += w; };
    // coherent part
    add("C1C1", mu / 8.0);
    add("C2C2", mu / 8.0);
    add("D1D1", mu / 8.0);
    add("D2D2", mu / 8.0);
    add("C1C2", mu * (1.0 + c) / 8.0);
    add("D1D2", mu * (1.0 + c) / 8.0);
    add("C1D2", mu * (1.0 - c) / 8.0);
    add("C2D1", mu * (1.0 - c) / 8.0);
    add("C1D1", 0.0);
    add("C2D2", 0.0);
    // distinguishable part: each photon picks detector and bin independently
    const double q = 1.0 - mu;
    add("C1C1", q / 16.0);
    add("C2C2", q / 16.0);
    add("D1D1", q / 16.0);
    add("D2D2", q / 16.0);
    add("C1C2", q / 8.0);
    add("C1D1", q / 8.0);
    add("C1D2", q / 8.0);
    add("C2D1", q / 8.0);
    add("C2D2", q / 8.0);
    add("D1D2", q / 8.0);
    return dist;
}

struct SecondBinDistribution {
    double p_c2;
    double p_d2;
};

// Distribution of the remaining photon's detector, given a first click in I1,
// from projecting the observable substate and renormalizing.
inline SecondBinDistribution conditional_second_bin(DetectionOutcome first, double phi) {
    if (first.bin != TimeBin::I1)
        throw ConfigError("conditional_second_bin: first click must be in I1");
    // amplitudes of the partner, given the first click:
    //   C1 -> (e^{i phi}+1) C2 - (e^{i phi}-1) D2
    //   D1 -> (e^{i phi}-1) C2 - (e^{i phi}+1) D2
    const double plus = 2.0 + 2.0 * std::cos(phi);   // |e^{i phi}+1|^2
    const double minus = 2.0 - 2.0 * std::cos(phi);  // |e^{i phi}-1|^2
    const double wc = first.detector == Detector::C ? plus : minus;
    const double wd = first.detector == Detector::C ? minus : plus;
    const double tot = wc + wd;
    if (tot <= 0.0)
        throw AnalysisError("undefined conditional: first outcome has zero probability");
    return {wc / tot, wd / tot};
}

}  // namespace homsim
