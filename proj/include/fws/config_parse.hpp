#pragma once

// KvConfig -> struct parsers shared by the command-line tools and the
// experiment runner. Each parser reads keys under one prefix and leaves
// unrelated keys untouched, so several parsers can share a config file and
// require_all_used() still catches typos.

#include <optional>
#include <string>
#include <vector>

#include "fws/csi.hpp"
#include "fws/dataset.hpp"
#include "fws/episodes.hpp"
#include "fws/errors.hpp"
#include "fws/fsl.hpp"
#include "fws/grid.hpp"
#include "fws/kvconfig.hpp"
#include "fws/library.hpp"
#include "fws/net.hpp"
#include "fws/preprocess.hpp"
#include "fws/train.hpp"

namespace fws {

inline SubcarrierGrid grid_from_config(const KvConfig& cfg, const std::string& prefix = "grid.") {
    const std::string preset = cfg.get_string(prefix + "preset", "intel5300");
    if (preset == "intel5300") {
        return SubcarrierGrid::intel5300(cfg.get_double(prefix + "center_freq_hz", 5.32e9));
    }
    if (preset == "custom") {
        const std::vector<int> idx = cfg.get_int_list(prefix + "indices");
        return SubcarrierGrid::from_indices(idx, cfg.get_double(prefix + "center_freq_hz"),
                                            cfg.get_double(prefix + "spacing_hz"));
    }
    throw ConfigError(cfg.origin() + ": " + prefix + "preset must be intel5300 or custom, got `" +
                      preset + "`");
}

inline PhaseNoiseModel noise_from_config(const KvConfig& cfg,
                                         const std::string& prefix = "noise.") {
    PhaseNoiseModel n;
    const std::string kind = cfg.get_string(prefix + "kind", "none");
    if (kind == "none") {
        n.kind = PhaseNoiseModel::Kind::none;
    } else if (kind == "iid") {
        n.kind = PhaseNoiseModel::Kind::iid;
    } else if (kind == "random_walk") {
        n.kind = PhaseNoiseModel::Kind::random_walk;
    } else {
        throw ConfigError(cfg.origin() + ": " + prefix +
                          "kind must be none, iid, or random_walk, got `" + kind + "`");
    }
    n.alpha_mean = cfg.get_double(prefix + "alpha_mean", 0.0);
    n.alpha_std = cfg.get_double(prefix + "alpha_std", 0.0);
    n.beta_mean = cfg.get_double(prefix + "beta_mean", 0.0);
    n.beta_std = cfg.get_double(prefix + "beta_std", 0.0);
    n.validate();
    return n;
}

// Explicit scene description: `static.count`, `static.N.*`, `dynamic.count`,
// `dynamic.N.*`, `antenna_count`, `perturbation_scale`, `antenna_seeds`.
inline ChannelScene scene_from_config(const KvConfig& cfg, const std::string& prefix = "") {
    ChannelScene s;
    const long long ns = cfg.get_int(prefix + "static.count");
    for (long long i = 0; i < ns; ++i) {
        const std::string p = prefix + "static." + std::to_string(i) + ".";
        PathComponent path;
        path.kind = PathKind::static_path;
        path.delay_s = cfg.get_double(p + "delay_ns") * 1e-9;
        path.gain = std::polar(cfg.get_double(p + "gain_mag"),
                               cfg.get_double(p + "gain_phase_rad", 0.0));
        s.static_paths.push_back(path);
    }
    const long long nd = cfg.get_int(prefix + "dynamic.count", 0);
    for (long long i = 0; i < nd; ++i) {
        const std::string p = prefix + "dynamic." + std::to_string(i) + ".";
        PathComponent path;
        path.kind = PathKind::dynamic_path;
        path.gain = std::polar(cfg.get_double(p + "gain_mag"),
                               cfg.get_double(p + "gain_phase_rad", 0.0));
        DynamicTrajectory& t = path.trajectory;
        t.base_delay_s = cfg.get_double(p + "base_delay_ns") * 1e-9;
        t.delay_osc_amplitude = cfg.get_double(p + "delay_osc_amplitude");
        t.osc_freq_hz = cfg.get_double(p + "osc_freq_hz");
        t.osc_phase_rad = cfg.get_double(p + "osc_phase_rad", 0.0);
        t.envelope_depth = cfg.get_double(p + "envelope_depth", 0.0);
        t.envelope_freq_hz = cfg.get_double(p + "envelope_freq_hz", t.osc_freq_hz);
        s.dynamic_paths.push_back(path);
    }
    s.antenna_count = static_cast<int>(cfg.get_int(prefix + "antenna_count", 3));
    s.perturbation_scale = cfg.get_double(prefix + "perturbation_scale", 0.0);
    if (cfg.has(prefix + "antenna_seeds")) {
        for (int v : cfg.get_int_list(prefix + "antenna_seeds")) {
            s.antenna_seeds.push_back(static_cast<std::uint64_t>(v));
        }
    } else if (s.perturbation_scale > 0.0) {
        for (int a = 0; a < s.antenna_count; ++a) {
            s.antenna_seeds.push_back(derive_seed(0xA47E, static_cast<std::uint64_t>(a)));
        }
    }
    s.validate();
    return s;
}

inline PreprocessConfig preprocess_from_config(const KvConfig& cfg,
                                               const std::string& prefix = "preprocess.") {
    PreprocessConfig p;
    p.packet_count = static_cast<int>(cfg.get_int(prefix + "packet_count", p.packet_count));
    p.unwrap_phase = cfg.get_bool(prefix + "unwrap", p.unwrap_phase);
    const std::string sel = cfg.get_string(prefix + "selection", "uniform");
    if (sel == "uniform") {
        p.packet_selection = PacketSelection::uniform_resample;
    } else if (sel == "head") {
        p.packet_selection = PacketSelection::head_truncate;
    } else {
        throw ConfigError(cfg.origin() + ": " + prefix + "selection must be uniform or head");
    }
    const std::string amp = cfg.get_string(prefix + "amplitude", "none");
    if (amp == "none") {
        p.amplitude_transform = AmplitudeTransform::none;
    } else if (amp == "log") {
        p.amplitude_transform = AmplitudeTransform::log;
    } else {
        throw ConfigError(cfg.origin() + ": " + prefix + "amplitude must be none or log");
    }
    p.validate();
    return p;
}

inline NetSpec net_from_config(const KvConfig& cfg, int input_h, int input_w, int input_c,
                               const std::string& prefix = "net.") {
    const std::string preset = cfg.get_string(prefix + "preset", "desk");
    NetSpec spec;
    if (preset == "desk") {
        spec = NetSpec::desk_scale(input_h, input_w, input_c);
    } else if (preset == "paper") {
        spec = NetSpec::paper_scale(input_h, input_w, input_c);
    } else {
        throw ConfigError(cfg.origin() + ": " + prefix + "preset must be desk or paper, got `" +
                          preset + "`");
    }
    spec.l2_epsilon = cfg.get_double(prefix + "l2_epsilon", spec.l2_epsilon);
    spec.validate();
    return spec;
}

inline TrainConfig train_from_config(const KvConfig& cfg, std::uint64_t default_seed,
                                     const std::string& prefix = "train.") {
    TrainConfig t;
    t.lr0 = cfg.get_double(prefix + "lr", t.lr0);
    t.lr_decay = cfg.get_double(prefix + "lr_decay", t.lr_decay);
    t.lr_patience = static_cast<int>(cfg.get_int(prefix + "lr_patience", t.lr_patience));
    t.stop_patience = static_cast<int>(cfg.get_int(prefix + "stop_patience", t.stop_patience));
    t.max_epochs = static_cast<int>(cfg.get_int(prefix + "max_epochs", t.max_epochs));
    t.batch_size = static_cast<int>(cfg.get_int(prefix + "batch_size", t.batch_size));
    t.validation_fraction =
        cfg.get_double(prefix + "validation_fraction", t.validation_fraction);
    t.seed = cfg.get_u64(prefix + "seed", default_seed);
    t.validate();
    return t;
}

inline EpisodeSpec episode_from_config(const KvConfig& cfg, std::uint64_t default_seed,
                                       const std::string& prefix = "episode.") {
    EpisodeSpec e;
    e.ways = static_cast<int>(cfg.get_int(prefix + "ways", e.ways));
    e.shots = static_cast<int>(cfg.get_int(prefix + "shots", e.shots));
    const std::string policy = cfg.get_string(prefix + "query_policy", "all_remaining");
    if (policy == "all_remaining") {
        e.query_policy = QueryPolicy::all_remaining;
    } else if (policy == "fixed_count") {
        e.query_policy = QueryPolicy::fixed_count;
        e.queries_per_class = static_cast<int>(cfg.get_int(prefix + "queries_per_class"));
    } else {
        throw ConfigError(cfg.origin() + ": " + prefix +
                          "query_policy must be all_remaining or fixed_count");
    }
    e.episode_count = static_cast<int>(cfg.get_int(prefix + "count", e.episode_count));
    e.seed = cfg.get_u64(prefix + "seed", default_seed);
    e.validate();
    return e;
}

inline FineTuneConfig finetune_from_config(const KvConfig& cfg, std::uint64_t default_seed,
                                           const std::string& prefix = "finetune.") {
    FineTuneConfig f;
    f.epochs = static_cast<int>(cfg.get_int(prefix + "epochs", f.epochs));
    f.lr = cfg.get_double(prefix + "lr", f.lr);
    const std::string scope = cfg.get_string(prefix + "scope", "all_layers");
    if (scope == "all_layers") {
        f.scope = FineTuneConfig::Scope::all_layers;
    } else if (scope == "head_only") {
        f.scope = FineTuneConfig::Scope::head_only;
    } else {
        throw ConfigError(cfg.origin() + ": " + prefix + "scope must be all_layers or head_only");
    }
    f.seed = cfg.get_u64(prefix + "seed", default_seed);
    f.validate();
    return f;
}

inline LibraryOptions library_from_config(const KvConfig& cfg,
                                          const std::string& prefix = "library.") {
    LibraryOptions o;
    o.antenna_count = static_cast<int>(cfg.get_int(prefix + "antenna_count", o.antenna_count));
    o.static_path_count =
        static_cast<int>(cfg.get_int(prefix + "static_paths", o.static_path_count));
    o.dynamic_paths_per_class =
        static_cast<int>(cfg.get_int(prefix + "dynamic_paths", o.dynamic_paths_per_class));
    o.min_osc_freq_hz = cfg.get_double(prefix + "min_osc_freq_hz", o.min_osc_freq_hz);
    o.max_osc_freq_hz = cfg.get_double(prefix + "max_osc_freq_hz", o.max_osc_freq_hz);
    o.band_occupancy = cfg.get_double(prefix + "band_occupancy", o.band_occupancy);
    o.min_excursion_rad = cfg.get_double(prefix + "min_excursion_rad", o.min_excursion_rad);
    o.max_excursion_rad = cfg.get_double(prefix + "max_excursion_rad", o.max_excursion_rad);
    o.dynamic_gain = cfg.get_double(prefix + "dynamic_gain", o.dynamic_gain);
    o.envelope_depth = cfg.get_double(prefix + "envelope_depth", o.envelope_depth);
    o.harmonic_ratio = cfg.get_double(prefix + "harmonic_ratio", o.harmonic_ratio);
    o.center_freq_hz = cfg.get_double(prefix + "center_freq_hz", o.center_freq_hz);
    o.perturbation_scale = cfg.get_double(prefix + "perturbation_scale", o.perturbation_scale);
    o.max_classes = static_cast<int>(cfg.get_int(prefix + "max_classes", o.max_classes));
    o.validate();
    return o;
}

inline InstanceJitter jitter_from_config(const KvConfig& cfg,
                                         const std::string& prefix = "jitter.") {
    InstanceJitter j;
    j.freq = cfg.get_double(prefix + "freq", j.freq);
    j.gain = cfg.get_double(prefix + "gain", j.gain);
    j.random_phase = cfg.get_bool(prefix + "random_phase", j.random_phase);
    j.validate();
    return j;
}

inline std::optional<DomainShiftSpec> shift_from_config(const KvConfig& cfg,
                                                        const std::string& prefix = "shift.") {
    if (!cfg.get_bool(prefix + "enable", false)) return std::nullopt;
    DomainShiftSpec s;
    s.new_static_seed = cfg.get_u64(prefix + "static_seed", 1);
    s.trajectory_perturbation =
        cfg.get_double(prefix + "trajectory_perturbation", s.trajectory_perturbation);
    s.validate();
    return s;
}

inline ReceiverVariant variant_from_config(const KvConfig& cfg, int receiver_id,
                                           const std::string& prefix) {
    ReceiverVariant v;
    v.receiver_id = receiver_id;
    v.static_seed = cfg.get_u64(prefix + "static_seed", 0);
    v.trajectory_perturbation =
        cfg.get_double(prefix + "trajectory_perturbation", v.trajectory_perturbation);
    v.dynamic_gain_scale = cfg.get_double(prefix + "dynamic_gain_scale", v.dynamic_gain_scale);
    v.validate();
    return v;
}

}  // namespace fws
