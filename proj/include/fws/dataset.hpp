#pragma once

#include <algorithm>
#include <cstdint>
#include <numbers>
#include <string>
#include <vector>

#include "fws/csi.hpp"
#include "fws/errors.hpp"
#include "fws/fsl.hpp"
#include "fws/grid.hpp"
#include "fws/library.hpp"
#include "fws/preprocess.hpp"
#include "fws/rng.hpp"

namespace fws {

// How individual performances of an activity differ from the class template:
// a random starting point inside the cycle, a small tempo change, and a small
// gain wobble per path.
struct InstanceJitter {
    double freq = 0.02;
    double gain = 0.10;
    bool random_phase = true;

    void validate() const {
        if (freq < 0.0 || freq >= 0.5) throw ConfigError("jitter: freq must be in [0, 0.5)");
        if (gain < 0.0 || gain >= 0.9) throw ConfigError("jitter: gain must be in [0, 0.9)");
    }
};

struct DatasetSpec {
    int instances_per_class = 12;
    double duration_s = 2.0;
    double rate_hz = 50.0;
    PhaseNoiseModel noise;
    std::string domain = "source";
    int receiver_id = 0;
    InstanceJitter jitter;
    std::uint64_t seed = 0;
    std::int64_t first_event_id = 0;

    void validate() const {
        if (instances_per_class < 1) throw ConfigError("dataset: instances per class must be >= 1");
        if (!(duration_s > 0.0)) throw ConfigError("dataset: duration must be > 0");
        if (!(rate_hz > 0.0)) throw ConfigError("dataset: packet rate must be > 0");
        jitter.validate();
    }
};

namespace detail {

struct InstanceDraw {
    double cycle_fraction = 0.0;  // starting point inside the fundamental cycle
    double tempo_factor = 1.0;
    std::vector<double> gain_factors;
};

inline InstanceDraw draw_instance(const InstanceJitter& j, int dynamic_path_count, Rng& r) {
    InstanceDraw d;
    d.cycle_fraction = j.random_phase ? r.uniform01() : 0.0;
    d.tempo_factor = 1.0 + j.freq * r.uniform(-1.0, 1.0);
    d.gain_factors.reserve(static_cast<std::size_t>(dynamic_path_count));
    for (int k = 0; k < dynamic_path_count; ++k) {
        d.gain_factors.push_back(1.0 + j.gain * r.uniform(-1.0, 1.0));
    }
    return d;
}

// A time shift by `cycle_fraction` of the fundamental period advances every
// path's phase in proportion to its own frequency, keeping harmonically
// related paths locked together.
inline ChannelScene realize_instance(const ChannelScene& class_scene, const InstanceDraw& d) {
    ChannelScene s = class_scene;
    if (s.dynamic_paths.empty()) return s;
    const double f0 = s.dynamic_paths[0].trajectory.osc_freq_hz;
    const double shift_s = f0 > 0.0 ? d.cycle_fraction / f0 : 0.0;
    for (std::size_t k = 0; k < s.dynamic_paths.size(); ++k) {
        PathComponent& p = s.dynamic_paths[k];
        DynamicTrajectory& t = p.trajectory;
        t.osc_phase_rad += 2.0 * std::numbers::pi * t.osc_freq_hz * shift_s;
        t.osc_freq_hz *= d.tempo_factor;
        t.envelope_freq_hz *= d.tempo_factor;
        if (k < d.gain_factors.size()) p.gain *= d.gain_factors[k];
    }
    return s;
}

}  // namespace detail

// One recording per (class, instance). The per-instance draws depend only on
// (seed, class_id, instance), so re-running with a variant-adjusted library
// reproduces the same underlying events seen through a different receiver.
inline std::vector<CsiRecording> synth_dataset(const std::vector<ActivityClass>& library,
                                               const SubcarrierGrid& grid,
                                               const DatasetSpec& spec) {
    spec.validate();
    if (library.empty()) throw ConfigError("dataset: empty activity library");
    std::vector<CsiRecording> out;
    out.reserve(library.size() * static_cast<std::size_t>(spec.instances_per_class));
    std::int64_t event = spec.first_event_id;
    for (const ActivityClass& ac : library) {
        for (int j = 0; j < spec.instances_per_class; ++j, ++event) {
            Rng r(derive_seed(spec.seed ^ 0x1257u, static_cast<std::uint64_t>(ac.class_id),
                              static_cast<std::uint64_t>(j)));
            const detail::InstanceDraw draw = detail::draw_instance(
                spec.jitter, static_cast<int>(ac.scene.dynamic_paths.size()), r);
            const ChannelScene scene = detail::realize_instance(ac.scene, draw);

            CsiRecording rec = synth_clean_csi(scene, grid, spec.duration_s, spec.rate_hz);
            rec.label = ac.class_id;
            rec.domain = spec.domain;
            rec.receiver_id = spec.receiver_id;
            rec.event_id = event;
            const std::uint64_t noise_seed =
                derive_seed(spec.seed, 0xF01u + static_cast<std::uint64_t>(spec.receiver_id),
                            static_cast<std::uint64_t>(event));
            apply_phase_noise(rec, grid, spec.noise, noise_seed);
            out.push_back(std::move(rec));
        }
    }
    return out;
}

// Synthesizes the same events as observed by several receivers: the instance
// draws are shared (they are keyed by class and instance, not receiver) while
// clutter, gains, trajectories-as-seen, and phase noise differ per receiver.
inline std::vector<std::vector<CsiRecording>> synth_multi_receiver(
    const std::vector<ActivityClass>& library, const SubcarrierGrid& grid,
    const DatasetSpec& base_spec, const std::vector<ReceiverVariant>& variants,
    const LibraryOptions& opt = {}) {
    if (variants.empty()) throw ConfigError("dataset: no receiver variants given");
    std::vector<std::vector<CsiRecording>> out;
    out.reserve(variants.size());
    for (const ReceiverVariant& v : variants) {
        const std::vector<ActivityClass> view = apply_receiver_variant(library, v, opt);
        DatasetSpec spec = base_spec;
        spec.receiver_id = v.receiver_id;
        out.push_back(synth_dataset(view, grid, spec));
    }
    return out;
}

// Selection + tensor assembly for a whole batch of recordings.
inline std::vector<CsiTensor> preprocess_all(const std::vector<CsiRecording>& recordings,
                                             const SubcarrierGrid& grid,
                                             const PreprocessConfig& cfg) {
    std::vector<CsiTensor> out;
    out.reserve(recordings.size());
    for (const CsiRecording& rec : recordings) {
        out.push_back(build_tensor(select_packets(rec, cfg), grid, cfg));
    }
    return out;
}

// Wraps tensors into a labeled pool, optionally keeping only the listed
// classes. Item ids come from the recordings' event ids.
inline LabeledSet to_labeled_set(const std::vector<CsiTensor>& tensors, SetRole role,
                                 const std::string& domain,
                                 const std::vector<int>& keep_classes = {}) {
    LabeledSet set;
    set.role = role;
    set.domain = domain;
    for (const CsiTensor& t : tensors) {
        if (!keep_classes.empty() &&
            std::find(keep_classes.begin(), keep_classes.end(), t.label) == keep_classes.end()) {
            continue;
        }
        LabeledSet::Item item;
        item.tensor = t;
        item.uid = t.event_id;
        set.items.push_back(std::move(item));
    }
    return set;
}

}  // namespace fws
