#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <numeric>
#include <optional>
#include <vector>

#include "fws/csi.hpp"
#include "fws/errors.hpp"
#include "fws/rng.hpp"

namespace fws {

// Knobs for the synthetic activity-class generator. Classes are separated by
// construction: each class owns a geometric frequency band for its dynamic
// path and (under a decorrelating permutation) a band of phase-excursion
// amplitudes, so nearby tempos never share nearby excursions.
struct LibraryOptions {
    int antenna_count = 3;
    int static_path_count = 3;
    int dynamic_paths_per_class = 2;

    double min_osc_freq_hz = 0.4;
    double max_osc_freq_hz = 5.0;
    // Fraction of each per-class band actually used; the rest is guard band.
    double band_occupancy = 0.5;

    // Per-class peak phase swing (radians at the center frequency) of the
    // dynamic path; converted into a delay-oscillation amplitude.
    double min_excursion_rad = 0.6;
    double max_excursion_rad = 2.2;

    // Dynamic path gain magnitude relative to the ~unit static gains.
    double dynamic_gain = 0.35;
    double envelope_depth = 0.18;
    // Frequency ratio of the secondary dynamic path; varied per class.
    double harmonic_ratio = 2.0;

    double center_freq_hz = 5.32e9;  // used only to calibrate excursions
    double perturbation_scale = 0.0;
    int max_classes = 48;

    void validate() const {
        if (antenna_count < 1) throw ConfigError("library: antenna count must be >= 1");
        if (static_path_count < 1) throw ConfigError("library: need at least one static path");
        if (dynamic_paths_per_class < 1) {
            throw ConfigError("library: need at least one dynamic path per class");
        }
        if (!(min_osc_freq_hz > 0.0) || !(max_osc_freq_hz > min_osc_freq_hz)) {
            throw ConfigError("library: oscillation frequency range is empty");
        }
        if (!(band_occupancy > 0.0 && band_occupancy <= 1.0)) {
            throw ConfigError("library: band occupancy must be in (0, 1]");
        }
        if (!(min_excursion_rad > 0.0) || max_excursion_rad < min_excursion_rad) {
            throw ConfigError("library: excursion range is empty");
        }
        if (!(dynamic_gain > 0.0)) throw ConfigError("library: dynamic gain must be > 0");
        if (!(center_freq_hz > 0.0)) throw ConfigError("library: center frequency must be > 0");
        if (max_classes < 2) throw ConfigError("library: max classes must be >= 2");
        if (perturbation_scale < 0.0) throw ConfigError("library: perturbation scale must be >= 0");
    }
};

// Environment replacement plus bounded distortion of every class's dynamic
// parameters: the same activities seen in a different place.
struct DomainShiftSpec {
    std::uint64_t new_static_seed = 1;
    double trajectory_perturbation = 0.0;

    void validate() const {
        if (trajectory_perturbation < 0.0 || trajectory_perturbation > 0.5) {
            throw ConfigError("domain shift: trajectory perturbation must be in [0, 0.5]");
        }
    }
};

struct ActivityClass {
    int class_id = -1;
    ChannelScene scene;
};

namespace detail {

inline std::vector<PathComponent> make_static_paths(std::uint64_t static_seed,
                                                    const LibraryOptions& opt) {
    Rng r(derive_seed(static_seed, 0x57A7));
    std::vector<PathComponent> out;
    out.reserve(static_cast<std::size_t>(opt.static_path_count));
    for (int s = 0; s < opt.static_path_count; ++s) {
        PathComponent p;
        p.kind = PathKind::static_path;
        const double mag = s == 0 ? r.uniform(0.9, 1.2) : r.uniform(0.4, 0.9);
        p.gain = std::polar(mag, r.uniform(-std::numbers::pi, std::numbers::pi));
        p.delay_s = r.uniform(15e-9, 80e-9);
        out.push_back(p);
    }
    return out;
}

// Multiplies every class's dynamic tempo and per-path geometry by bounded
// random factors (one tempo factor per class, independent factors per path).
inline void perturb_trajectories(std::vector<ActivityClass>& classes, double fraction,
                                 std::uint64_t seed) {
    if (fraction == 0.0) return;
    for (ActivityClass& ac : classes) {
        Rng r(derive_seed(seed, 0x7E57, static_cast<std::uint64_t>(ac.class_id)));
        const double tempo = 1.0 + fraction * r.uniform(-1.0, 1.0);
        for (PathComponent& p : ac.scene.dynamic_paths) {
            DynamicTrajectory& t = p.trajectory;
            t.osc_freq_hz *= tempo;
            t.envelope_freq_hz *= tempo;
            t.base_delay_s *= 1.0 + fraction * r.uniform(-1.0, 1.0);
            t.delay_osc_amplitude *= 1.0 + fraction * r.uniform(-1.0, 1.0);
            t.envelope_depth *= 1.0 + fraction * r.uniform(-1.0, 1.0);
        }
        ac.scene.validate();
    }
}

}  // namespace detail

// Builds `class_count` scenes that share one set of static paths (one
// environment) while each class gets its own dynamic-path signature. With a
// shift, the static paths are regenerated from the shift's seed and every
// trajectory is perturbed by the shift's bounded fraction.
inline std::vector<ActivityClass> make_activity_library(
    int class_count, std::uint64_t seed, const std::optional<DomainShiftSpec>& shift = {},
    const LibraryOptions& opt = {}) {
    opt.validate();
    if (class_count < 2) throw ConfigError("library: class count must be >= 2");
    if (class_count > opt.max_classes) {
        throw ConfigError("library: " + std::to_string(class_count) +
                          " classes exceed the " + std::to_string(opt.max_classes) +
                          " distinguishable parameter bands");
    }
    const double band_ratio =
        std::pow(opt.max_osc_freq_hz / opt.min_osc_freq_hz, 1.0 / class_count);
    if (std::pow(band_ratio, opt.band_occupancy) < 1.005) {
        throw ConfigError("library: per-class frequency bands are too narrow to distinguish");
    }
    if (shift) shift->validate();

    const std::uint64_t static_seed = shift ? shift->new_static_seed : seed;
    const std::vector<PathComponent> statics = detail::make_static_paths(static_seed, opt);

    std::vector<std::uint64_t> antenna_seeds;
    for (int a = 0; a < opt.antenna_count; ++a) {
        antenna_seeds.push_back(derive_seed(seed, 0xA47E, static_cast<std::uint64_t>(a)));
    }

    const double exc_ratio =
        std::pow(opt.max_excursion_rad / opt.min_excursion_rad, 1.0 / class_count);
    // Stride through the excursion bands so neighbors in tempo are far apart
    // in excursion; any stride coprime to class_count works.
    int stride = std::max(2, class_count / 3);
    while (std::gcd(stride, class_count) != 1) ++stride;

    std::vector<ActivityClass> out;
    out.reserve(static_cast<std::size_t>(class_count));
    for (int c = 0; c < class_count; ++c) {
        Rng r(derive_seed(seed, 0xC1A5, static_cast<std::uint64_t>(c)));
        ActivityClass ac;
        ac.class_id = c;
        ac.scene.antenna_count = opt.antenna_count;
        ac.scene.perturbation_scale = opt.perturbation_scale;
        ac.scene.antenna_seeds = antenna_seeds;
        ac.scene.static_paths = statics;

        const double f_lo = opt.min_osc_freq_hz * std::pow(band_ratio, c);
        const double f0 = f_lo * std::pow(band_ratio, opt.band_occupancy * r.uniform01());
        const int exc_band = (c * stride) % class_count;
        const double e_lo = opt.min_excursion_rad * std::pow(exc_ratio, exc_band);
        const double exc = e_lo * std::pow(exc_ratio, opt.band_occupancy * r.uniform01());

        for (int d = 0; d < opt.dynamic_paths_per_class; ++d) {
            PathComponent p;
            p.kind = PathKind::dynamic_path;
            const double mag = opt.dynamic_gain * (d == 0 ? r.uniform(0.85, 1.15)
                                                          : r.uniform(0.45, 0.75));
            p.gain = std::polar(mag, r.uniform(-std::numbers::pi, std::numbers::pi));

            DynamicTrajectory& t = p.trajectory;
            t.base_delay_s = r.uniform(20e-9, 60e-9);
            const double ratio = d == 0 ? 1.0 : opt.harmonic_ratio + 0.25 * (c % 4);
            t.osc_freq_hz = f0 * ratio;
            t.envelope_freq_hz = t.osc_freq_hz;
            const double swing = exc * (d == 0 ? 1.0 : 0.6);
            // Delay amplitude giving a peak phase swing of `swing` radians at
            // the center frequency.
            t.delay_osc_amplitude =
                swing / (2.0 * std::numbers::pi * opt.center_freq_hz * t.base_delay_s);
            t.osc_phase_rad = r.uniform(-std::numbers::pi, std::numbers::pi);
            t.envelope_depth = opt.envelope_depth * r.uniform(0.6, 1.0);
            ac.scene.dynamic_paths.push_back(p);
        }
        ac.scene.validate();
        out.push_back(std::move(ac));
    }
    if (shift) detail::perturb_trajectories(out, shift->trajectory_perturbation, seed);
    return out;
}

// Distorts one receiver's view of a library: its own clutter (static paths),
// its own antenna responses, an optional bounded distortion of the perceived
// trajectories, and a sensitivity scale on the dynamic-path gains.
struct ReceiverVariant {
    int receiver_id = 0;
    std::uint64_t static_seed = 0;  // 0 keeps the library's static paths
    double trajectory_perturbation = 0.0;
    double dynamic_gain_scale = 1.0;

    void validate() const {
        if (trajectory_perturbation < 0.0 || trajectory_perturbation > 0.5) {
            throw ConfigError("receiver variant: trajectory perturbation must be in [0, 0.5]");
        }
        if (!(dynamic_gain_scale > 0.0)) {
            throw ConfigError("receiver variant: dynamic gain scale must be > 0");
        }
    }
};

inline std::vector<ActivityClass> apply_receiver_variant(const std::vector<ActivityClass>& library,
                                                         const ReceiverVariant& v,
                                                         const LibraryOptions& opt = {}) {
    v.validate();
    std::vector<ActivityClass> out = library;
    std::vector<PathComponent> statics;
    if (v.static_seed != 0) statics = detail::make_static_paths(v.static_seed, opt);
    for (ActivityClass& ac : out) {
        if (!statics.empty()) ac.scene.static_paths = statics;
        if (ac.scene.perturbation_scale > 0.0) {
            for (std::uint64_t& s : ac.scene.antenna_seeds) {
                s = derive_seed(s, 0x2CEA, static_cast<std::uint64_t>(v.receiver_id));
            }
        }
        for (PathComponent& p : ac.scene.dynamic_paths) p.gain *= v.dynamic_gain_scale;
        ac.scene.validate();
    }
    if (v.trajectory_perturbation > 0.0) {
        detail::perturb_trajectories(out, v.trajectory_perturbation,
                                     derive_seed(0x2CEA, static_cast<std::uint64_t>(v.receiver_id)));
    }
    return out;
}

}  // namespace fws
