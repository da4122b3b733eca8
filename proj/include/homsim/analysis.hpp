#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <map>
#include <numbers>
#include <numeric>
#include <string>
#include <unordered_map>
#include <vector>

#include "homsim/errors.hpp"
#include "homsim/event_sim.hpp"
#include "homsim/interference.hpp"

namespace homsim {

// ---------------------------------------------------------------------------
// Gating fit

// Parameters of the gating function fitted to a cycle-folded arrival
// histogram: a constant offset a, a sin^2 photon hump of amplitude b on
// (p1, p2) and a flat repump plateau of amplitude c on (p3, p4).
struct GateFit {
    double a = 0.0;
    double b = 0.0;
    double c = 0.0;
    double p1 = 0.0, p2 = 0.0, p3 = 0.0, p4 = 0.0;  // seconds
    double residual_norm = 0.0;

    double midpoint() const { return 0.5 * (p1 + p2); }

    // Expected counts in a histogram bin [lo, hi] (integral of the model).
    double bin_integral(double lo, double hi) const {
        double v = a * (hi - lo);
        const double s_lo = std::max(lo, p1), s_hi = std::min(hi, p2);
        if (s_hi > s_lo) {
            const double k = 2.0 * std::numbers::pi / (p2 - p1);
            auto prim = [&](double x) {
                return 0.5 * (x - p1) - std::sin(2.0 * k * (x - p1)) / (4.0 * k);
            };
            v += b * (prim(s_hi) - prim(s_lo));
        }
        const double r_lo = std::max(lo, p3), r_hi = std::min(hi, p4);
        if (r_hi > r_lo) v += c * (r_hi - r_lo);
        return v;
    }
};

namespace detail {

// Nelder-Mead on a box-free objective; returns the best vertex.
inline std::vector<double> nelder_mead(const std::function<double(const std::vector<double>&)>& f,
                                       std::vector<double> x0, double scale, int max_iter,
                                       double tol) {
    const std::size_t n = x0.size();
    std::vector<std::vector<double>> simplex(n + 1, x0);
    for (std::size_t i = 0; i < n; ++i) simplex[i + 1][i] += scale;
    std::vector<double> fv(n + 1);
    for (std::size_t i = 0; i <= n; ++i) fv[i] = f(simplex[i]);

    auto order = [&] {
        std::vector<std::size_t> idx(n + 1);
        for (std::size_t i = 0; i <= n; ++i) idx[i] = i;
        std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return fv[a] < fv[b]; });
        std::vector<std::vector<double>> s2;
        std::vector<double> f2;
        for (std::size_t i : idx) {
            s2.push_back(simplex[i]);
            f2.push_back(fv[i]);
        }
        simplex.swap(s2);
        fv.swap(f2);
    };

    for (int iter = 0; iter < max_iter; ++iter) {
        order();
        if (std::abs(fv[n] - fv[0]) <= tol * (std::abs(fv[0]) + tol)) break;
        std::vector<double> centroid(n, 0.0);
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < n; ++j) centroid[j] += simplex[i][j] / n;
        auto blend = [&](double coef) {
            std::vector<double> p(n);
            for (std::size_t j = 0; j < n; ++j)
                p[j] = centroid[j] + coef * (simplex[n][j] - centroid[j]);
            return p;
        };
        auto xr = blend(-1.0);
        const double fr = f(xr);
        if (fr < fv[0]) {
            auto xe = blend(-2.0);
            const double fe = f(xe);
            if (fe < fr) {
                simplex[n] = xe;
                fv[n] = fe;
            } else {
                simplex[n] = xr;
                fv[n] = fr;
            }
        } else if (fr < fv[n - 1]) {
            simplex[n] = xr;
            fv[n] = fr;
        } else {
            auto xc = blend(fr < fv[n] ? -0.5 : 0.5);
            const double fc = f(xc);
            if (fc < std::min(fr, fv[n])) {
                simplex[n] = xc;
                fv[n] = fc;
            } else {
                for (std::size_t i = 1; i <= n; ++i) {
                    for (std::size_t j = 0; j < n; ++j)
                        simplex[i][j] = 0.5 * (simplex[i][j] + simplex[0][j]);
                    fv[i] = f(simplex[i]);
                }
            }
        }
    }
    order();
    return simplex[0];
}

// Least-squares amplitudes (a, b, c) for fixed breakpoints.
inline std::array<double, 3> profile_amplitudes(const std::vector<double>& counts,
                                                double bin_width, const GateFit& bp) {
    GateFit unit_b = bp, unit_c = bp;
    unit_b.a = 0.0;
    unit_b.b = 1.0;
    unit_b.c = 0.0;
    unit_c.a = 0.0;
    unit_c.b = 0.0;
    unit_c.c = 1.0;
    // normal equations for the bin-averaged model counts_i ~ a + b*S_i + c*R_i
    double m[3][3] = {};
    double rhs[3] = {};
    for (std::size_t i = 0; i < counts.size(); ++i) {
        const double lo = i * bin_width, hi = lo + bin_width;
        const double basis[3] = {1.0, unit_b.bin_integral(lo, hi) / bin_width,
                                 unit_c.bin_integral(lo, hi) / bin_width};
        for (int r = 0; r < 3; ++r) {
            rhs[r] += basis[r] * counts[i];
            for (int col = 0; col < 3; ++col) m[r][col] += basis[r] * basis[col];
        }
    }
    // non-negative least squares by enumerating active sets: for each subset
    // of amplitudes pinned to zero, solve the reduced system and keep the
    // feasible solution with the smallest residual quadratic form
    std::array<double, 3> best{0.0, 0.0, 0.0};
    double best_q = 0.0;  // -2 x.rhs + x.M.x, 0 for the all-zero solution
    for (int mask = 1; mask < 8; ++mask) {
        int idx[3];
        int k = 0;
        for (int j = 0; j < 3; ++j)
            if (mask & (1 << j)) idx[k++] = j;
        double a_red[3][4];
        for (int r = 0; r < k; ++r) {
            for (int col = 0; col < k; ++col) a_red[r][col] = m[idx[r]][idx[col]];
            a_red[r][k] = rhs[idx[r]];
        }
        bool singular = false;
        for (int col = 0; col < k && !singular; ++col) {
            int p = col;
            for (int r = col + 1; r < k; ++r)
                if (std::abs(a_red[r][col]) > std::abs(a_red[p][col])) p = r;
            if (std::abs(a_red[p][col]) < 1e-30) {
                singular = true;
                break;
            }
            for (int c2 = 0; c2 <= k; ++c2) std::swap(a_red[p][c2], a_red[col][c2]);
            for (int r = col + 1; r < k; ++r) {
                const double f = a_red[r][col] / a_red[col][col];
                for (int c2 = col; c2 <= k; ++c2) a_red[r][c2] -= f * a_red[col][c2];
            }
        }
        if (singular) continue;
        double sol_red[3];
        for (int r = k - 1; r >= 0; --r) {
            double v = a_red[r][k];
            for (int c2 = r + 1; c2 < k; ++c2) v -= a_red[r][c2] * sol_red[c2];
            sol_red[r] = v / a_red[r][r];
        }
        std::array<double, 3> x{0.0, 0.0, 0.0};
        bool feasible = true;
        for (int r = 0; r < k; ++r) {
            if (sol_red[r] < 0.0) feasible = false;
            x[idx[r]] = sol_red[r];
        }
        if (!feasible) continue;
        double q = 0.0;
        for (int r = 0; r < 3; ++r) {
            q -= 2.0 * x[r] * rhs[r];
            for (int col = 0; col < 3; ++col) q += x[r] * m[r][col] * x[col];
        }
        if (q < best_q) {
            best_q = q;
            best = x;
        }
    }
    return best;
}

struct Segment {
    std::size_t begin, end;  // bin index range, inclusive
};

inline std::vector<Segment> threshold_segments(const std::vector<double>& v, double thresh) {
    std::vector<Segment> segs;
    bool in = false;
    for (std::size_t i = 0; i < v.size(); ++i) {
        if (v[i] > thresh && !in) {
            segs.push_back({i, i});
            in = true;
        } else if (v[i] > thresh) {
            segs.back().end = i;
        } else {
            in = false;
        }
    }
    return segs;
}

}  // namespace detail

// Fits the gating function to a cycle-folded arrival histogram.
// counts[i] covers [i*bin_width, (i+1)*bin_width).
inline GateFit fit_gate(const std::vector<double>& counts, double bin_width) {
    if (counts.size() < 100)
        throw AnalysisError("fit_gate: histogram must cover the period with >= 100 bins");
    const double total = std::accumulate(counts.begin(), counts.end(), 0.0);
    if (total <= 0.0) throw AnalysisError("fit failure: histogram is empty");

    // smooth lightly, then segment above a quarter of the dynamic range
    std::vector<double> sm(counts.size());
    for (std::size_t i = 0; i < counts.size(); ++i) {
        const std::size_t a = i > 0 ? i - 1 : 0;
        const std::size_t b = i + 1 < counts.size() ? i + 1 : i;
        sm[i] = (counts[a] + counts[i] + counts[b]) / 3.0;
    }
    const double vmin = *std::min_element(sm.begin(), sm.end());
    const double vmax = *std::max_element(sm.begin(), sm.end());
    if (vmax <= vmin) throw AnalysisError("fit failure: degenerate histogram");
    auto segs = detail::threshold_segments(sm, vmin + 0.25 * (vmax - vmin));
    if (segs.empty()) throw AnalysisError("fit failure: no structure above threshold");

    const double period = counts.size() * bin_width;
    // extend a segment edge outward until the smoothed data reaches baseline
    const double baseline = vmin + 0.05 * (vmax - vmin);
    auto expand_left = [&](std::size_t i) {
        while (i > 0 && sm[i - 1] > baseline) --i;
        return i * bin_width;
    };
    auto expand_right = [&](std::size_t i) {
        while (i + 1 < sm.size() && sm[i + 1] > baseline) ++i;
        return (i + 1) * bin_width;
    };
    auto default_repump = [&](GateFit& g) {
        if (period - g.p2 < 4.0 * bin_width)
            throw AnalysisError("fit failure: expected photon and repump regions");
        g.p3 = g.p2 + 0.2 * (period - g.p2);
        g.p4 = period - 2.0 * bin_width;
    };

    // The photon window may appear as one or more segments (the sin^2 hump
    // dips to baseline mid-window, and noise can split a hump further) and
    // the repump plateau may sit below the threshold entirely. Enumerate
    // every contiguous split of the segments into photon window followed by
    // repump window -- plus the all-photon reading with a default repump --
    // and let the fit pick the best one.
    std::vector<GateFit> inits;
    for (std::size_t split = 1; split < segs.size(); ++split) {
        GateFit g;
        g.p1 = expand_left(segs[0].begin);
        g.p2 = expand_right(segs[split - 1].end);
        g.p3 = expand_left(segs[split].begin);
        g.p4 = expand_right(segs.back().end);
        if (g.p2 <= g.p3) inits.push_back(g);
    }
    {
        GateFit g;  // all segments belong to the photon window, repump below threshold
        g.p1 = expand_left(segs[0].begin);
        g.p2 = expand_right(segs.back().end);
        if (period - g.p2 >= 4.0 * bin_width) {
            default_repump(g);
            inits.push_back(g);
        }
    }
    if (inits.empty()) throw AnalysisError("fit failure: expected photon and repump regions");

    auto objective = [&](const std::vector<double>& p) {
        GateFit g;
        g.p1 = p[0] * period;
        g.p2 = p[1] * period;
        g.p3 = p[2] * period;
        g.p4 = p[3] * period;
        if (!(g.p1 < g.p2 && g.p2 <= g.p3 && g.p3 < g.p4) || g.p1 < -bin_width ||
            g.p4 > period + bin_width)
            return 1e300;
        auto [a, b, c] = detail::profile_amplitudes(counts, bin_width, g);
        g.a = a;
        g.b = b;
        g.c = c;
        double sse = 0.0;
        for (std::size_t i = 0; i < counts.size(); ++i) {
            const double lo = i * bin_width;
            const double pred = g.bin_integral(lo, lo + bin_width) / bin_width;
            const double r = counts[i] - pred;
            sse += r * r;
        }
        return sse;
    };

    std::vector<double> x;
    double best = std::numeric_limits<double>::infinity();
    for (const GateFit& init : inits) {
        std::vector<double> x0{init.p1 / period, init.p2 / period, init.p3 / period,
                               init.p4 / period};
        auto xi = detail::nelder_mead(objective, x0, 2.0 * bin_width / period, 600, 1e-14);
        const double fi = objective(xi);
        if (fi < best) {
            best = fi;
            x = xi;
        }
    }
    // polish with progressively tighter restarts around the found optimum;
    // each restart rebuilds a fresh simplex, which lets the search home in
    // far below one bin width
    for (double s = 0.5 * bin_width / period; s > 1e-8; s *= 0.15)
        x = detail::nelder_mead(objective, x, s, 400, 1e-30);

    GateFit fit;
    // the data cannot distinguish breakpoints outside the measured cycle, so
    // canonicalize the flat directions onto the period
    fit.p1 = std::max(0.0, x[0] * period);
    fit.p2 = x[1] * period;
    fit.p3 = x[2] * period;
    fit.p4 = std::min(period, x[3] * period);
    auto [a, b, c] = detail::profile_amplitudes(counts, bin_width, fit);
    fit.a = a;
    fit.b = b;
    fit.c = c;
    fit.residual_norm = std::sqrt(objective(x));
    if (!(fit.p1 < fit.p2 && fit.p2 <= fit.p3 && fit.p3 < fit.p4))
        throw AnalysisError("fit failure: breakpoints did not converge to p1<p2<=p3<p4");
    return fit;
}

// ---------------------------------------------------------------------------
// Background model

// Per-cycle detection densities (expected clicks per second of cycle time)
// for true background (B) and photon-caused (P) events on each detector,
// sampled on a common uniform grid.
struct BackgroundModel {
    double grid_dt = 0.0;  // seconds per sample
    std::vector<double> m_b_c, m_p_c, m_b_d, m_p_d;

    void validate() const {
        const std::size_t n = m_b_c.size();
        if (grid_dt <= 0.0 || n == 0 || m_p_c.size() != n || m_b_d.size() != n ||
            m_p_d.size() != n)
            throw AnalysisError("background model: densities must share one grid");
    }
};

// Pairwise cross-correlations of the background/photon densities across the
// two detectors, M_XY(tau) = int m_X^C(t) m_Y^D(t+tau) dt, on the lag grid
// tau_k = k * grid_dt, k in [-(n-1), n-1].
struct BackgroundCorrelations {
    double grid_dt = 0.0;
    std::vector<double> tau;
    std::vector<double> m_bb, m_bp, m_pb, m_pp, m_total;

    // total minus the photon-photon term, which is excluded from the
    // subtraction (it describes correlations across emission periods)
    double subtraction_density(double tau_s) const {
        if (tau.empty()) return 0.0;
        const double pos = (tau_s - tau.front()) / grid_dt;
        if (pos <= 0.0 || pos >= tau.size() - 1.0) return 0.0;
        const std::size_t i = static_cast<std::size_t>(pos);
        const double w = pos - i;
        auto v = [&](std::size_t k) { return m_total[k] - m_pp[k]; };
        return (1.0 - w) * v(i) + w * v(i + 1);
    }
};

inline BackgroundCorrelations background_correlations(const BackgroundModel& model) {
    model.validate();
    const std::size_t n = model.m_b_c.size();
    BackgroundCorrelations out;
    out.grid_dt = model.grid_dt;
    const int lags = static_cast<int>(n) - 1;
    auto xcorr = [&](const std::vector<double>& x, const std::vector<double>& y, int lag) {
        double s = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            const int j = static_cast<int>(i) + lag;
            if (j >= 0 && j < static_cast<int>(n)) s += x[i] * y[j];
        }
        return s * model.grid_dt;
    };
    for (int k = -lags; k <= lags; ++k) {
        out.tau.push_back(k * model.grid_dt);
        out.m_bb.push_back(xcorr(model.m_b_c, model.m_b_d, k));
        out.m_bp.push_back(xcorr(model.m_b_c, model.m_p_d, k));
        out.m_pb.push_back(xcorr(model.m_p_c, model.m_b_d, k));
        out.m_pp.push_back(xcorr(model.m_p_c, model.m_p_d, k));
        out.m_total.push_back(out.m_bb.back() + out.m_bp.back() + out.m_pb.back() +
                              out.m_pp.back());
    }
    return out;
}

// ---------------------------------------------------------------------------
// Poisson MLE and normalization

// Most likely mean signal count given n observed counts on a known mean
// background: max{0, n - lambda_B}.
inline double mle_signal(double n, double lambda_b) {
    if (n < 0.0 || lambda_b < 0.0)
        throw ConfigError("mle_signal: counts and background must be non-negative");
    return std::max(0.0, n - lambda_b);
}

// Ratio N0/N2 of simultaneous pair experiments to two-cycle-separated
// correlations: eta_L / (1 + eta_L)^2.
inline double normalization_factor(double eta_delay) {
    if (eta_delay <= 0.0)
        throw ConfigError("normalization_factor: delay transmission must be positive");
    if (eta_delay > 1.0) throw ConfigError("normalization_factor: transmission exceeds 1");
    return eta_delay / ((1.0 + eta_delay) * (1.0 + eta_delay));
}

// ---------------------------------------------------------------------------
// Correlations

struct CorrelationPair {
    TimeBin bin_c;  // bin of the detector-C click
    TimeBin bin_d;
    double tau;  // t_D - t_C, seconds
};

struct CorrelationSet {
    std::vector<CorrelationPair> pairs;
};

// Quadrant label in first->second time order, e.g. C in I1 and D in I2 is
// "C1D2" (C fired first).
inline std::string quadrant_label(const CorrelationPair& p) {
    std::string lc = p.bin_c == TimeBin::I1 ? "C1" : "C2";
    std::string ld = p.bin_d == TimeBin::I1 ? "D1" : "D2";
    return lc + ld;
}

struct SlidingHistogram {
    double bin_width = 0.0;
    double bin_step = 0.0;
    std::vector<double> centers;
    std::vector<double> counts;          // raw window counts
    std::vector<double> signal_counts;   // after background subtraction
    std::vector<double> values;          // probability density (1/s)
};

// Overlapping-window histogram of correlation lags. norm_total scales the
// corrected counts to a probability density (expected pair experiments).
inline SlidingHistogram sliding_histogram(const CorrelationSet& set, double width, double step,
                                          double range, double norm_total,
                                          const BackgroundCorrelations* bg = nullptr,
                                          double n_cycles = 0.0) {
    if (step > width)
        throw ConfigError("sliding_histogram: bin step must not exceed bin width");
    if (width <= 0.0 || step <= 0.0)
        throw ConfigError("sliding_histogram: width and step must be positive");
    SlidingHistogram h;
    h.bin_width = width;
    h.bin_step = step;
    std::vector<double> taus;
    taus.reserve(set.pairs.size());
    for (auto& p : set.pairs) taus.push_back(p.tau);
    std::sort(taus.begin(), taus.end());
    for (double c = -range; c <= range + 0.5 * step; c += step) {
        const double lo = c - 0.5 * width, hi = c + 0.5 * width;
        const auto it_lo = std::lower_bound(taus.begin(), taus.end(), lo);
        const auto it_hi = std::lower_bound(taus.begin(), taus.end(), hi);
        const double n = static_cast<double>(it_hi - it_lo);
        double lambda_b = 0.0;
        if (bg != nullptr && n_cycles > 0.0) {
            // integrate the background density over the window
            const int steps = 8;
            for (int k = 0; k < steps; ++k) {
                const double t = lo + (k + 0.5) * width / steps;
                lambda_b += bg->subtraction_density(t) * width / steps;
            }
            lambda_b *= n_cycles;
        }
        h.centers.push_back(c);
        h.counts.push_back(n);
        h.signal_counts.push_back(mle_signal(n, lambda_b));
        h.values.push_back(norm_total > 0.0 ? h.signal_counts.back() / (norm_total * width)
                                            : 0.0);
    }
    return h;
}

// Probabilities of the four cross-detector bin combinations.
inline std::map<std::string, double> cross_bin_matrix(const CorrelationSet& set,
                                                      double norm_total,
                                                      const std::map<std::string, double>&
                                                          background = {}) {
    std::map<std::string, double> counts{
        {"C1D1", 0.0}, {"C1D2", 0.0}, {"C2D1", 0.0}, {"C2D2", 0.0}};
    for (auto& p : set.pairs) counts[quadrant_label(p)] += 1.0;
    std::map<std::string, double> out;
    for (auto& [k, n] : counts) {
        double lb = 0.0;
        if (auto it = background.find(k); it != background.end()) lb = it->second;
        const double corrected = mle_signal(n, lb);
        out[k] = norm_total > 0.0 ? corrected / norm_total : corrected;
    }
    return out;
}

// ---------------------------------------------------------------------------
// Visibilities and SNR

struct CorrelationAggregates {
    // cross-detector correlation counts, background-corrected
    double n_parallel_total = 0.0;  // phi=0, all lags
    double n_perp_total = 0.0;      // perpendicular reference, all lags
    double n_parallel_cross = 0.0;  // phi=0, detections across I1/I2
    double n_perp_cross = 0.0;
    double n_phi0_cross = 0.0;
    double n_phipi_cross = 0.0;
    double n_d1c2 = 0.0;  // feedback run: D in I1, C in I2
    double n_c1d2 = 0.0;
};

struct Visibilities {
    double v_hom = 0.0;
    double v_ref = 0.0;   // cross-interval-restricted HOM visibility
    double v_phi = 0.0;
    double v_feed = 0.0;
};

inline Visibilities visibilities(const CorrelationAggregates& n) {
    if (n.n_perp_total <= 0.0 || n.n_perp_cross <= 0.0 ||
        n.n_phi0_cross + n.n_phipi_cross <= 0.0 || n.n_d1c2 + n.n_c1d2 <= 0.0)
        throw AnalysisError("undefined visibility: zero denominator");
    Visibilities v;
    v.v_hom = 1.0 - n.n_parallel_total / n.n_perp_total;
    v.v_ref = 1.0 - n.n_parallel_cross / n.n_perp_cross;
    v.v_phi = (n.n_phipi_cross - n.n_phi0_cross) / (n.n_phipi_cross + n.n_phi0_cross);
    v.v_feed = (n.n_d1c2 - n.n_c1d2) / (n.n_d1c2 + n.n_c1d2);
    return v;
}

// Integrated signal correlations over integrated background correction.
inline double snr(double signal_counts, double background_counts) {
    if (background_counts <= 0.0) throw AnalysisError("undefined ratio: zero background");
    if (signal_counts < 0.0) throw ConfigError("snr: negative signal");
    return signal_counts / background_counts;
}

// ---------------------------------------------------------------------------
// Full pipeline

struct AnalysisConfig {
    double repetition_period = 1e-6;
    double delta_t = kDefaultPhotonLength;  // tau histogram range
    double eta_delay = 0.5;
    double sliding_width = 50e-9;
    double sliding_step = 10e-9;
    int fold_bins = 250;
};

struct AnalysisResult {
    GateFit fit_c, fit_d;
    CorrelationSet correlations;  // gated same-cycle C-D pairs
    std::int64_t n2_pairs = 0;    // C-D pairs exactly two cycles apart
    double norm_total = 0.0;      // estimated pair experiments (x efficiency^2)
    SlidingHistogram histogram;
    std::map<std::string, double> cross_bin;          // corrected probabilities
    std::map<std::string, double> cross_bin_counts;   // raw quadrant counts
    std::map<std::string, double> quadrant_background;
    double signal_total = 0.0;      // corrected cross-detector correlations
    double background_total = 0.0;  // integrated correction
    double signal_cross_interval = 0.0;
    double snr_value = 0.0;
};

// Runs the full statistical pipeline on a pair of raw timestamp streams:
// gate fit, coincidence extraction, background convolution model, Poisson
// MLE subtraction, two-cycle normalization, sliding histogram, matrix, SNR.
inline AnalysisResult analyze_streams(const TimestampStream& stream_c,
                                      const TimestampStream& stream_d,
                                      std::int64_t n_cycles, const AnalysisConfig& cfg) {
    if (n_cycles < 1) throw ConfigError("analyze_streams: n_cycles must be >= 1");
    const double period = cfg.repetition_period;
    const std::int64_t period_ps = std::llround(period * 1e12);

    AnalysisResult res;

    // cycle-folded arrival histograms
    const int nb = cfg.fold_bins;
    const double bw = period / nb;
    auto fold = [&](const TimestampStream& s) {
        std::vector<double> h(nb, 0.0);
        for (std::int64_t ts : s.timestamp_ps) {
            const double t = static_cast<double>(ts % period_ps) * 1e-12;
            int i = static_cast<int>(t / bw);
            if (i >= nb) i = nb - 1;
            h[i] += 1.0;
        }
        return h;
    };
    const auto hist_c = fold(stream_c);
    const auto hist_d = fold(stream_d);
    res.fit_c = fit_gate(hist_c, bw);
    res.fit_d = fit_gate(hist_d, bw);

    // gate the clicks and group them per cycle
    struct GatedClick {
        double t;  // within-cycle seconds
        TimeBin bin;
    };
    auto gate = [&](const TimestampStream& s, const GateFit& fit) {
        std::unordered_map<std::int64_t, std::vector<GatedClick>> per_cycle;
        for (std::size_t i = 0; i < s.timestamp_ps.size(); ++i) {
            const double t = static_cast<double>(s.timestamp_ps[i] % period_ps) * 1e-12;
            if (t < fit.p1 || t > fit.p2) continue;
            per_cycle[s.cycle_index[i]].push_back(
                {t, t < fit.midpoint() ? TimeBin::I1 : TimeBin::I2});
        }
        return per_cycle;
    };
    auto clicks_c = gate(stream_c, res.fit_c);
    auto clicks_d = gate(stream_d, res.fit_d);

    for (auto& [cycle, cs] : clicks_c) {
        if (auto it = clicks_d.find(cycle); it != clicks_d.end())
            for (auto& cc : cs)
                for (auto& dd : it->second)
                    res.correlations.pairs.push_back({cc.bin, dd.bin, dd.t - cc.t});
        for (std::int64_t off : {-2, 2})
            if (auto it = clicks_d.find(cycle + off); it != clicks_d.end())
                res.n2_pairs += static_cast<std::int64_t>(cs.size() * it->second.size());
    }
    res.norm_total = 2.0 * static_cast<double>(res.n2_pairs) *
                     normalization_factor(cfg.eta_delay);

    // background model restricted to the gated window: the fitted offset is
    // the dark density, the remainder of the folded histogram is the
    // photon-caused density (per cycle, per second)
    BackgroundModel bgm;
    bgm.grid_dt = bw;
    const double nc = static_cast<double>(n_cycles);
    // dark level per detector from the quiet gap between the photon window
    // and the repump plateau (falls back to the fitted offset if the gap is
    // too narrow to average over)
    auto dark_level = [&](const GateFit& fit, const std::vector<double>& hist) {
        double sum = 0.0;
        int n = 0;
        for (int i = 0; i < nb; ++i) {
            const double mid = (i + 0.5) * bw;
            if (mid > fit.p2 && mid < fit.p3) {
                sum += hist[i];
                ++n;
            }
        }
        return n >= 3 ? sum / n : std::max(0.0, fit.a);
    };
    const double dark_c = dark_level(res.fit_c, hist_c);
    const double dark_d = dark_level(res.fit_d, hist_d);
    for (int i = 0; i < nb; ++i) {
        const double mid = (i + 0.5) * bw;
        auto densities = [&](const GateFit& fit, const std::vector<double>& hist, double dark,
                             double& mb, double& mp) {
            if (mid < fit.p1 || mid > fit.p2) {
                mb = mp = 0.0;
                return;
            }
            mb = dark / (bw * nc);
            mp = std::max(0.0, hist[i] - dark) / (bw * nc);
        };
        double mbc, mpc, mbd, mpd;
        densities(res.fit_c, hist_c, dark_c, mbc, mpc);
        densities(res.fit_d, hist_d, dark_d, mbd, mpd);
        bgm.m_b_c.push_back(mbc);
        bgm.m_p_c.push_back(mpc);
        bgm.m_b_d.push_back(mbd);
        bgm.m_p_d.push_back(mpd);
    }
    const BackgroundCorrelations bg = background_correlations(bgm);

    res.histogram = sliding_histogram(res.correlations, cfg.sliding_width, cfg.sliding_step,
                                      cfg.delta_t, res.norm_total, &bg, nc);

    // quadrant backgrounds: independent products of per-bin-interval click means
    auto interval_sums = [&](const std::vector<double>& mb, const std::vector<double>& mp,
                             const GateFit& fit) {
        std::array<double, 2> b{}, p{};
        for (int i = 0; i < nb; ++i) {
            const double mid = (i + 0.5) * bw;
            if (mid < fit.p1 || mid > fit.p2) continue;
            const int bin = mid < fit.midpoint() ? 0 : 1;
            b[bin] += mb[i] * bw;
            p[bin] += mp[i] * bw;
        }
        return std::pair{b, p};
    };
    auto [bc, pc] = interval_sums(bgm.m_b_c, bgm.m_p_c, res.fit_c);
    auto [bd, pd] = interval_sums(bgm.m_b_d, bgm.m_p_d, res.fit_d);
    for (int i = 0; i < 2; ++i)
        for (int j = 0; j < 2; ++j) {
            const std::string key = std::string("C") + char('1' + i) + "D" + char('1' + j);
            res.quadrant_background[key] =
                nc * (bc[i] * bd[j] + bc[i] * pd[j] + pc[i] * bd[j]);
        }
    res.cross_bin = cross_bin_matrix(res.correlations, res.norm_total,
                                     res.quadrant_background);
    {
        std::map<std::string, double> raw{
            {"C1D1", 0.0}, {"C1D2", 0.0}, {"C2D1", 0.0}, {"C2D2", 0.0}};
        for (auto& p : res.correlations.pairs) raw[quadrant_label(p)] += 1.0;
        res.cross_bin_counts = raw;
    }

    // integrated signal and background over the same-cycle correlations
    double lambda_total = 0.0;
    for (auto& [k, v] : res.quadrant_background) lambda_total += v;
    const double observed = static_cast<double>(res.correlations.pairs.size());
    res.background_total = lambda_total;
    res.signal_total = mle_signal(observed, lambda_total);
    const double cross_obs = res.cross_bin_counts["C1D2"] + res.cross_bin_counts["C2D1"];
    const double cross_bg =
        res.quadrant_background["C1D2"] + res.quadrant_background["C2D1"];
    res.signal_cross_interval = mle_signal(cross_obs, cross_bg);
    res.snr_value = lambda_total > 0.0 ? res.signal_total / lambda_total : 0.0;
    return res;
}

}  // namespace homsim
