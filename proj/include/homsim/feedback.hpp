#pragma once

#include <cmath>
#include <limits>
#include <numbers>
#include <string>
#include <utility>
#include <vector>

#include "homsim/errors.hpp"
#include "homsim/interference.hpp"
#include "homsim/quadrature.hpp"

namespace homsim {

// Itemized feedback-loop latency. Components are stored in nanoseconds so
// the documented total of 97.0 ns is exact.
struct LatencyBudget {
    std::vector<std::pair<std::string, double>> components_ns;

    double total_ns() const {
        double s = 0.0;
        for (auto& [label, t] : components_ns) s += t;
        return s;
    }
    double total() const { return total_ns() * 1e-9; }

    static LatencyBudget measured_defaults() {
        LatencyBudget b;
        b.components_ns = {
            {"optical transit + SPCM response", 80.0},
            {"circuit response", 7.0},
            {"signal rise time", 5.5},
            {"cable delay", 4.5},
        };
        return b;
    }
};

// The steering target is always detector C: a first click on D needs the
// pi phase step, a first click on C needs none.
inline double decide_phase(Detector first_click) {
    return first_click == Detector::D ? std::numbers::pi : 0.0;
}

namespace detail {

// intensity envelope f(t) on the unit interval, each half integrating to 1
inline double unit_intensity(double u) {
    const double s = std::sin(2.0 * std::numbers::pi * u);
    const double s2 = s * s;
    return (16.0 / 3.0) * s2 * s2;
}

}  // namespace detail

// Probability of a cross-bin correlation landing inside the dead time,
//   P(t~) = int_{max[1/2-t~,0]}^{1/2} f(t1) int_{1/2}^{min[t1+t~,1]} f(t2) dt2 dt1,
// with the dead time t~ given as a fraction of the photon length.
inline double error_rate(double dead_time_fraction, int n_quad = 1024) {
    if (dead_time_fraction < 0.0)
        throw ConfigError("error_rate: dead-time fraction must be non-negative");
    const double t = dead_time_fraction;
    if (t == 0.0) return 0.0;
    const double lo = std::max(0.5 - t, 0.0);
    auto outer = [t, n_quad](double t1) {
        const double hi2 = std::min(t1 + t, 1.0);
        if (hi2 <= 0.5) return 0.0;
        return detail::unit_intensity(t1) * simpson(detail::unit_intensity, 0.5, hi2, n_quad);
    };
    return simpson(outer, lo, 0.5, n_quad);
}

enum class JkMode { Toggle, Hold };

// State of the TTL feedback circuit: a JK flip-flop gated by the W_det
// window (buffered through a D latch), with the phase output wired-AND to
// W_phase.
struct CircuitState {
    bool jk_q = false;
    JkMode jk_mode = JkMode::Hold;
    bool latch_out = false;  // buffered W_det
    bool phase_out = false;
    bool prev_det = false;
    double last_time = -std::numeric_limits<double>::infinity();
};

struct CircuitInputs {
    bool det = false;
    bool w_det = false;
    bool w_phase = false;
};

struct CircuitOutputs {
    bool phase = false;
};

// Event-driven step: feeds the input levels at time `now` and returns the
// phase output. A rising edge on det toggles the JK only while armed by
// the W_det window; after toggling the JK holds until the next window.
inline CircuitOutputs circuit_step(CircuitState& state, const CircuitInputs& in, double now) {
    if (now < state.last_time)
        throw AnalysisError("circuit_step: events must be processed in time order");
    state.last_time = now;

    const bool w_det_rising = in.w_det && !state.latch_out;
    state.latch_out = in.w_det;
    if (w_det_rising) state.jk_mode = JkMode::Toggle;  // re-armed by the window
    if (!in.w_det) state.jk_mode = JkMode::Hold;

    const bool det_rising = in.det && !state.prev_det;
    state.prev_det = in.det;
    if (det_rising && state.jk_mode == JkMode::Toggle && state.latch_out) {
        state.jk_q = !state.jk_q;
        state.jk_mode = JkMode::Hold;  // one toggle per window
    }

    state.phase_out = state.jk_q && in.w_phase;
    return {state.phase_out};
}

// Piecewise-constant phi(t) resulting from a first-bin click: phi switches
// to decide_phase(detector) one latency after the click, unless the switch
// would land outside the photon window.
struct PhaseTimeline {
    bool switches = false;
    double switch_time = 0.0;
    double phi_after = 0.0;
    bool clipped = false;  // switch would have landed after the window end

    double phi_at(double t) const {
        return (switches && t >= switch_time) ? phi_after : 0.0;
    }
};

inline PhaseTimeline effective_phase_timeline(Detector first_click_detector,
                                              double first_click_time,
                                              const LatencyBudget& latency,
                                              double window_end) {
    PhaseTimeline tl;
    const double phi = decide_phase(first_click_detector);
    if (phi == 0.0) return tl;  // target already satisfied, no switch
    const double t_switch = first_click_time + latency.total();
    if (t_switch > window_end) {
        tl.clipped = true;  // the circuit cannot act after emission ends
        return tl;
    }
    tl.switches = true;
    tl.switch_time = t_switch;
    tl.phi_after = phi;
    return tl;
}

}  // namespace homsim
