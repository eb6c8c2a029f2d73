#pragma once

#include <cmath>
#include <complex>
#include <cstdint>
#include <numbers>
#include <string>
#include <utility>
#include <vector>

#include "fws/errors.hpp"
#include "fws/grid.hpp"
#include "fws/rng.hpp"

namespace fws {

// ---------------------------------------------------------------------------
// Scene description
// ---------------------------------------------------------------------------

// Time-varying geometry of one moving reflector. The path delay oscillates
// around `base_delay_s`:
//
//     tau(t) = base_delay_s * (1 + delay_osc_amplitude * sin(2*pi*f*t + phase))
//
// and the path gain is amplitude-modulated by
//
//     env(t) = 1 + envelope_depth * cos(2*pi*f_env*t + phase).
//
// A fraction-of-base parameterization keeps tau(t) >= 0 whenever
// |delay_osc_amplitude| <= 1.
struct DynamicTrajectory {
    double base_delay_s = 0.0;
    double delay_osc_amplitude = 0.0;  // fraction of base delay
    double osc_freq_hz = 0.0;
    double osc_phase_rad = 0.0;
    double envelope_depth = 0.0;
    double envelope_freq_hz = 0.0;

    double delay_at(double t) const {
        const double s = std::sin(2.0 * std::numbers::pi * osc_freq_hz * t + osc_phase_rad);
        return base_delay_s * (1.0 + delay_osc_amplitude * s);
    }

    double envelope_at(double t) const {
        const double c = std::cos(2.0 * std::numbers::pi * envelope_freq_hz * t + osc_phase_rad);
        return 1.0 + envelope_depth * c;
    }

    void validate() const {
        if (base_delay_s < 0.0) throw ConfigError("trajectory: base delay must be >= 0");
        if (std::abs(delay_osc_amplitude) > 1.0) {
            throw ConfigError("trajectory: |delay oscillation amplitude| must be <= 1");
        }
        if (osc_freq_hz < 0.0 || envelope_freq_hz < 0.0) {
            throw ConfigError("trajectory: oscillation frequencies must be >= 0");
        }
    }
};

enum class PathKind { static_path, dynamic_path };

// One propagation path. Static paths are fully described by (gain, delay_s);
// dynamic paths take their delay and gain modulation from `trajectory`
// (delay_s is ignored for them).
struct PathComponent {
    PathKind kind = PathKind::static_path;
    std::complex<double> gain{0.0, 0.0};
    double delay_s = 0.0;
    DynamicTrajectory trajectory;

    double delay_at(double t) const {
        return kind == PathKind::static_path ? delay_s : trajectory.delay_at(t);
    }

    std::complex<double> gain_at(double t) const {
        return kind == PathKind::static_path ? gain : gain * trajectory.envelope_at(t);
    }

    void validate() const {
        if (kind == PathKind::static_path) {
            if (delay_s < 0.0) throw ConfigError("static path delay must be >= 0");
        } else {
            trajectory.validate();
        }
    }
};

// A multipath propagation environment observed over `antenna_count` spatial
// channels (one per tx/rx antenna pair). All antennas see the same paths;
// when `perturbation_scale` > 0 each (antenna, path) combination additionally
// applies a small fixed complex factor drawn from that antenna's seed, which
// models slightly different element positions and gains.
struct ChannelScene {
    std::vector<PathComponent> static_paths;
    std::vector<PathComponent> dynamic_paths;
    int antenna_count = 3;
    double perturbation_scale = 0.0;
    std::vector<std::uint64_t> antenna_seeds;

    void validate() const {
        if (static_paths.empty()) {
            throw ConfigError("scene must contain at least one static path");
        }
        if (antenna_count < 1) throw ConfigError("scene: antenna count must be >= 1");
        if (perturbation_scale < 0.0) {
            throw ConfigError("scene: perturbation scale must be >= 0");
        }
        if (perturbation_scale > 0.0 &&
            antenna_seeds.size() != static_cast<std::size_t>(antenna_count)) {
            throw ConfigError("scene: perturbation enabled but antenna seed list does not "
                              "match antenna count");
        }
        for (const auto& p : static_paths) {
            if (p.kind != PathKind::static_path) throw ConfigError("scene: static path list holds a dynamic path");
            p.validate();
        }
        for (const auto& p : dynamic_paths) {
            if (p.kind != PathKind::dynamic_path) throw ConfigError("scene: dynamic path list holds a static path");
            p.validate();
        }
    }

    // Fixed multiplicative factor for one (antenna, path) pair; 1 when
    // perturbations are disabled. `path_tag` distinguishes static from
    // dynamic path indices so the streams never collide.
    std::complex<double> antenna_factor(int antenna, std::size_t path_index,
                                        bool dynamic) const {
        if (perturbation_scale <= 0.0) return {1.0, 0.0};
        Rng r(derive_seed(antenna_seeds[static_cast<std::size_t>(antenna)],
                          path_index, dynamic ? 1 : 0));
        return {1.0 + perturbation_scale * r.normal(),
                perturbation_scale * r.normal()};
    }
};

// ---------------------------------------------------------------------------
// Captured data
// ---------------------------------------------------------------------------

// One received packet's CSI: a complex sample per (subcarrier, antenna pair).
// Stored row-major with the antenna index fastest.
struct RawCsiFrame {
    double timestamp_s = 0.0;
    int subcarrier_count = 0;
    int antenna_count = 0;
    std::vector<std::complex<double>> csi;

    std::complex<double>& at(int sc, int ant) {
        return csi[static_cast<std::size_t>(sc) * antenna_count + ant];
    }
    const std::complex<double>& at(int sc, int ant) const {
        return csi[static_cast<std::size_t>(sc) * antenna_count + ant];
    }
};

// A labeled capture: the frame sequence one receiver recorded for one event.
// `event_id` ties together the recordings different receivers made of the
// same physical event; -1 means unassigned.
struct CsiRecording {
    std::vector<RawCsiFrame> frames;
    int label = -1;
    std::string domain;
    int receiver_id = 0;
    double packet_rate_hz = 0.0;
    std::int64_t event_id = -1;

    void validate(const SubcarrierGrid* grid = nullptr) const {
        for (std::size_t k = 0; k < frames.size(); ++k) {
            const auto& f = frames[k];
            if (f.subcarrier_count < 1 || f.antenna_count < 1) {
                throw DataError("recording frame " + std::to_string(k) + ": empty dimensions");
            }
            if (f.csi.size() != static_cast<std::size_t>(f.subcarrier_count) * f.antenna_count) {
                throw DataError("recording frame " + std::to_string(k) + ": sample count mismatch");
            }
            if (grid && f.subcarrier_count != grid->count()) {
                throw DataError("recording frame " + std::to_string(k) +
                                ": subcarrier count does not match the grid");
            }
            if (f.subcarrier_count != frames[0].subcarrier_count ||
                f.antenna_count != frames[0].antenna_count) {
                throw DataError("recording frame " + std::to_string(k) + ": shape differs from frame 0");
            }
        }
    }
};

// ---------------------------------------------------------------------------
// Clean-channel synthesis
// ---------------------------------------------------------------------------

// Evaluates the multipath frequency response over a packet train:
//
//     H(f_i, t) = sum_static  h_s * A(ant,s) * exp(-j*2*pi*f_i*tau_s)
//               + sum_dynamic h_d(t) * A(ant,d) * exp(-j*2*pi*f_i*tau_d(t))
//
// sampled at t_k = k / rate_hz for k = 0 .. floor(duration*rate)-1. The
// result is noise-free and fully determined by the scene (no hidden RNG):
// antenna perturbation factors come from the scene's stored seeds.
inline CsiRecording synth_clean_csi(const ChannelScene& scene, const SubcarrierGrid& grid,
                                    double duration_s, double rate_hz) {
    scene.validate();
    grid.validate();
    if (!(duration_s > 0.0)) throw ConfigError("synth: duration must be > 0");
    if (!(rate_hz > 0.0)) throw ConfigError("synth: packet rate must be > 0");

    const int n_sc = grid.count();
    const int n_ant = scene.antenna_count;
    const auto frame_count = static_cast<std::size_t>(std::floor(duration_s * rate_hz));
    const double two_pi = 2.0 * std::numbers::pi;

    // Static paths do not depend on t: accumulate their response once.
    std::vector<std::complex<double>> static_sum(
        static_cast<std::size_t>(n_sc) * n_ant, {0.0, 0.0});
    for (std::size_t s = 0; s < scene.static_paths.size(); ++s) {
        const auto& p = scene.static_paths[s];
        for (int a = 0; a < n_ant; ++a) {
            const auto factor = p.gain * scene.antenna_factor(a, s, false);
            for (int i = 0; i < n_sc; ++i) {
                const double phase = -two_pi * grid.frequency_hz[i] * p.delay_s;
                static_sum[static_cast<std::size_t>(i) * n_ant + a] +=
                    factor * std::polar(1.0, phase);
            }
        }
    }

    std::vector<std::vector<std::complex<double>>> dyn_factors(scene.dynamic_paths.size());
    for (std::size_t d = 0; d < scene.dynamic_paths.size(); ++d) {
        dyn_factors[d].resize(n_ant);
        for (int a = 0; a < n_ant; ++a) {
            dyn_factors[d][a] = scene.antenna_factor(a, d, true);
        }
    }

    CsiRecording rec;
    rec.packet_rate_hz = rate_hz;
    rec.frames.resize(frame_count);
    for (std::size_t k = 0; k < frame_count; ++k) {
        const double t = static_cast<double>(k) / rate_hz;
        RawCsiFrame& fr = rec.frames[k];
        fr.timestamp_s = t;
        fr.subcarrier_count = n_sc;
        fr.antenna_count = n_ant;
        fr.csi = static_sum;
        for (std::size_t d = 0; d < scene.dynamic_paths.size(); ++d) {
            const auto& p = scene.dynamic_paths[d];
            const double tau = p.delay_at(t);
            const auto gain = p.gain_at(t);
            for (int i = 0; i < n_sc; ++i) {
                const auto ray = gain * std::polar(1.0, -two_pi * grid.frequency_hz[i] * tau);
                for (int a = 0; a < n_ant; ++a) {
                    fr.csi[static_cast<std::size_t>(i) * n_ant + a] += ray * dyn_factors[d][a];
                }
            }
        }
    }
    return rec;
}

// ---------------------------------------------------------------------------
// Receiver phase noise
// ---------------------------------------------------------------------------

// Per-packet phase distortion applied on top of the clean channel. Packet k
// multiplies subcarrier i (group index m_i) by exp(-j*(alpha_k + beta_k*m_i)):
// alpha models the common offset (CFO/PLL), beta the sampling-clock slope.
// Both sequences are drawn i.i.d. or as a random walk.
struct PhaseNoiseModel {
    enum class Kind { none, iid, random_walk };

    Kind kind = Kind::iid;
    double alpha_mean = 0.0;
    double alpha_std = 0.0;
    double beta_mean = 0.0;
    double beta_std = 0.0;

    void validate() const {
        if (alpha_std < 0.0 || beta_std < 0.0) {
            throw ConfigError("phase noise: standard deviations must be >= 0");
        }
    }

    // Deterministic (alpha, beta) sequences for `count` packets. Alpha and
    // beta use independent derived streams so changing one leaves the other's
    // draws untouched.
    std::pair<std::vector<double>, std::vector<double>>
    generate(std::size_t count, std::uint64_t seed) const {
        validate();
        std::vector<double> alpha(count, 0.0), beta(count, 0.0);
        if (kind == Kind::none) return {std::move(alpha), std::move(beta)};
        Rng ra(derive_seed(seed, 0xA1FA));
        Rng rb(derive_seed(seed, 0xBE7A));
        double acc_a = 0.0, acc_b = 0.0;
        for (std::size_t k = 0; k < count; ++k) {
            const double da = alpha_mean + alpha_std * ra.normal();
            const double db = beta_mean + beta_std * rb.normal();
            if (kind == Kind::iid) {
                alpha[k] = da;
                beta[k] = db;
            } else {
                acc_a += da;
                acc_b += db;
                alpha[k] = acc_a;
                beta[k] = acc_b;
            }
        }
        return {std::move(alpha), std::move(beta)};
    }
};

// Applies phase noise to a recording in place; amplitudes are untouched
// (|H| is preserved exactly, up to the rounding of one complex multiply).
inline void apply_phase_noise(CsiRecording& rec, const SubcarrierGrid& grid,
                              const PhaseNoiseModel& noise, std::uint64_t seed) {
    grid.validate();
    rec.validate(&grid);
    if (noise.kind == PhaseNoiseModel::Kind::none) return;
    const auto [alpha, beta] = noise.generate(rec.frames.size(), seed);
    for (std::size_t k = 0; k < rec.frames.size(); ++k) {
        RawCsiFrame& fr = rec.frames[k];
        for (int i = 0; i < fr.subcarrier_count; ++i) {
            const double phi = alpha[k] + beta[k] * grid.group_index[i];
            const auto rot = std::polar(1.0, -phi);
            for (int a = 0; a < fr.antenna_count; ++a) {
                fr.at(i, a) *= rot;
            }
        }
    }
}

}  // namespace fws
