#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <numbers>
#include <utility>
#include <vector>

#include "homsim/errors.hpp"
#include "homsim/quadrature.hpp"

namespace homsim {

inline constexpr double kDefaultPhotonLength = 450e-9;  // seconds

enum class EnvelopeShape { SinSquaredDoubleHump, Custom };

// Normalized temporal amplitude envelope eps(t) on [0, delta_t],
// with integral |eps|^2 dt == 1.
class TemporalEnvelope {
  public:
    static TemporalEnvelope sin2_double_hump(double delta_t = kDefaultPhotonLength) {
        if (delta_t <= 0.0) throw ConfigError("envelope: delta_t must be positive");
        TemporalEnvelope env;
        env.delta_t_ = delta_t;
        env.shape_ = EnvelopeShape::SinSquaredDoubleHump;
        // int sin^4(2 pi t/dt) dt over [0,dt] = 3 dt/8, so |eps|^2 normalizes
        // with eps_peak = sqrt(8/(3 dt)).
        env.norm_ = std::sqrt(8.0 / (3.0 * delta_t));
        return env;
    }

    // Sampled amplitude grid, linearly interpolated and renormalized.
    static TemporalEnvelope custom(std::vector<double> t, std::vector<double> amplitude) {
        if (t.size() < 2 || t.size() != amplitude.size())
            throw ConfigError("invalid envelope: need >= 2 (t, amplitude) samples");
        for (std::size_t i = 1; i < t.size(); ++i)
            if (!(t[i] > t[i - 1]))
                throw ConfigError("invalid envelope: non-monotonic time axis");
        if (t.front() < 0.0) throw ConfigError("invalid envelope: negative sample time");
        TemporalEnvelope env;
        env.shape_ = EnvelopeShape::Custom;
        env.delta_t_ = t.back();
        env.t_ = std::move(t);
        env.amp_ = std::move(amplitude);
        env.norm_ = 1.0;
        const double i2 = simpson([&env](double x) {
            const double a = env.amplitude(x);
            return a * a;
        }, 0.0, env.delta_t_);
        if (i2 <= 0.0) throw ConfigError("invalid envelope: zero amplitude");
        env.norm_ = 1.0 / std::sqrt(i2);
        return env;
    }

    double duration() const { return delta_t_; }
    EnvelopeShape shape() const { return shape_; }

    // Normalized amplitude eps(t); zero outside the support.
    double amplitude(double t) const {
        if (t < 0.0 || t > delta_t_) return 0.0;
        if (shape_ == EnvelopeShape::SinSquaredDoubleHump) {
            const double s = std::sin(2.0 * std::numbers::pi * t / delta_t_);
            return norm_ * s * s;
        }
        // linear interpolation between samples
        auto it = std::upper_bound(t_.begin(), t_.end(), t);
        if (it == t_.begin()) return norm_ * amp_.front();
        if (it == t_.end()) return norm_ * amp_.back();
        const std::size_t i = static_cast<std::size_t>(it - t_.begin());
        const double w = (t - t_[i - 1]) / (t_[i] - t_[i - 1]);
        return norm_ * ((1.0 - w) * amp_[i - 1] + w * amp_[i]);
    }

  private:
    TemporalEnvelope() = default;
    double delta_t_ = kDefaultPhotonLength;
    EnvelopeShape shape_ = EnvelopeShape::SinSquaredDoubleHump;
    double norm_ = 1.0;
    std::vector<double> t_, amp_;
};

inline double envelope_amplitude(const TemporalEnvelope& env, double t) {
    return env.amplitude(t);
}

// Intensity envelope f(t) = (16/3) sin^4(2 pi t/dt)/dt, normalized so that
// the integral over each half-interval equals 1.
inline double intensity_density(const TemporalEnvelope& env, double t) {
    if (env.shape() != EnvelopeShape::SinSquaredDoubleHump)
        throw ConfigError("intensity_density: requires the sin^2 double-hump envelope");
    const double dt = env.duration();
    if (t < 0.0 || t > dt) return 0.0;
    const double s = std::sin(2.0 * std::numbers::pi * t / dt);
    const double s2 = s * s;
    return (16.0 / 3.0) * s2 * s2 / dt;
}

// Stepwise phase: phi_early on I1 = [0, dt/2), phi_late on I2 = [dt/2, dt].
struct PhaseProfile {
    double phi_early = 0.0;
    double phi_late = 0.0;

    double at(double t, double delta_t) const {
        return t < 0.5 * delta_t ? phi_early : phi_late;
    }
};

struct PhotonMode {
    TemporalEnvelope envelope = TemporalEnvelope::sin2_double_hump();
    PhaseProfile phase;
    double polarization_angle = 0.0;  // radians, in [0, pi)

    PhotonMode() = default;
    PhotonMode(TemporalEnvelope env, PhaseProfile p, double pol = 0.0)
        : envelope(std::move(env)), phase(p), polarization_angle(pol) {
        if (polarization_angle < 0.0 || polarization_angle >= std::numbers::pi)
            throw ConfigError("polarization_angle must lie in [0, pi)");
    }
};

// zeta(t) = eps(t) exp(-i phi(t))
inline std::complex<double> spatio_temporal(const PhotonMode& mode, double t) {
    const double eps = mode.envelope.amplitude(t);
    const double phi = mode.phase.at(t, mode.envelope.duration());
    return std::polar(eps, -phi);
}

inline double relative_polarization_angle(const PhotonMode& a, const PhotonMode& b) {
    return std::abs(a.polarization_angle - b.polarization_angle);
}

}  // namespace homsim
