#pragma once

// Config-driven end-to-end run: synthesize (or load) data, train or load an
// extractor, evaluate few-shot episodes, optionally fuse several receivers,
// and write CSV/manifest outputs.

#include <algorithm>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "fws/config_parse.hpp"
#include "fws/container.hpp"
#include "fws/dataset.hpp"
#include "fws/episodes.hpp"
#include "fws/errors.hpp"
#include "fws/model_io.hpp"
#include "fws/version.hpp"

namespace fws {

struct ExperimentResult {
    SubcarrierGrid grid;
    NetSpec spec;
    Params extractor;  // head stripped; ready for episode evaluation
    TrainReport train_report;
    bool trained = false;  // false when the extractor came from model.in
    std::vector<int> base_classes;
    std::vector<int> novel_classes;
    Metrics direct;
    std::optional<Metrics> fine_tuned;
    std::optional<CollabEvalResult> collab;
};

namespace detail {

inline std::string fmt_g(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

inline std::vector<ActivityClass> pick_classes(const std::vector<ActivityClass>& lib,
                                               const std::vector<int>& ids) {
    std::vector<ActivityClass> out;
    for (const ActivityClass& ac : lib) {
        if (std::find(ids.begin(), ids.end(), ac.class_id) != ids.end()) out.push_back(ac);
    }
    return out;
}

inline void write_confusion_csv(const std::string& path, const Metrics& m) {
    std::string s;
    for (int c : m.class_order) s += "," + std::to_string(c);
    s += "\n";
    const std::size_t n = m.class_order.size();
    for (std::size_t i = 0; i < n; ++i) {
        s += std::to_string(m.class_order[i]);
        for (std::size_t j = 0; j < n; ++j) {
            s += "," + std::to_string(m.confusion[i * n + j]);
        }
        s += "\n";
    }
    write_text_file(path, s);
}

inline void append_metric_rows(std::string& s, const std::string& kind, const Metrics& m) {
    s += kind + "_accuracy,," + fmt_g(m.accuracy) + "\n";
    s += kind + "_episode_mean,," + fmt_g(m.episode_mean) + "\n";
    s += kind + "_episode_std,," + fmt_g(m.episode_std) + "\n";
    for (std::size_t e = 0; e < m.per_episode_accuracy.size(); ++e) {
        s += kind + "_episode," + std::to_string(e) + "," + fmt_g(m.per_episode_accuracy[e]) +
             "\n";
    }
    for (std::size_t e = 0; e < m.episode_initial_loss.size(); ++e) {
        s += kind + "_initial_loss," + std::to_string(e) + "," +
             fmt_g(m.episode_initial_loss[e]) + "\n";
        s += kind + "_final_loss," + std::to_string(e) + "," + fmt_g(m.episode_final_loss[e]) +
             "\n";
    }
}

}  // namespace detail

// Writes metrics.csv, confusion_*.csv, train_report.csv (when trained), and
// manifest.txt into `dir`, creating it if needed.
inline void write_experiment_outputs(const ExperimentResult& r, const KvConfig& cfg,
                                     const std::string& dir) {
    std::filesystem::create_directories(dir);
    const std::filesystem::path base(dir);

    std::string metrics = "kind,index,value\n";
    detail::append_metric_rows(metrics, "direct", r.direct);
    if (r.fine_tuned) detail::append_metric_rows(metrics, "finetuned", *r.fine_tuned);
    if (r.collab) {
        detail::append_metric_rows(metrics, "fused", r.collab->fused);
        for (std::size_t i = 0; i < r.collab->per_receiver.size(); ++i) {
            metrics += "receiver_accuracy," + std::to_string(i) + "," +
                       detail::fmt_g(r.collab->per_receiver[i].accuracy) + "\n";
        }
    }
    if (r.trained) {
        metrics += "train_final_val_accuracy,," + detail::fmt_g(r.train_report.final_val_accuracy) +
                   "\n";
        metrics += "train_best_epoch,," + std::to_string(r.train_report.best_epoch) + "\n";
        metrics += "train_stop_epoch,," + std::to_string(r.train_report.stop_epoch) + "\n";
    }
    write_text_file((base / "metrics.csv").string(), metrics);

    detail::write_confusion_csv((base / "confusion_direct.csv").string(), r.direct);
    if (r.fine_tuned) {
        detail::write_confusion_csv((base / "confusion_finetuned.csv").string(), *r.fine_tuned);
    }
    if (r.collab) {
        detail::write_confusion_csv((base / "confusion_fused.csv").string(), r.collab->fused);
    }

    if (r.trained) {
        std::string tr = "epoch,train_loss,val_loss,lr\n";
        for (std::size_t e = 0; e < r.train_report.train_loss.size(); ++e) {
            tr += std::to_string(e) + "," + detail::fmt_g(r.train_report.train_loss[e]) + "," +
                  detail::fmt_g(r.train_report.val_loss[e]) + "," +
                  detail::fmt_g(r.train_report.lr[e]) + "\n";
        }
        write_text_file((base / "train_report.csv").string(), tr);
    }

    // The manifest is the only output that carries a timestamp, so every
    // other file is byte-reproducible across runs.
    std::string man = "fws_version = " + std::string(kVersion) + "\n";
    std::time_t now = std::time(nullptr);
    char stamp[64];
    std::strftime(stamp, sizeof stamp, "%Y-%m-%dT%H:%M:%SZ", std::gmtime(&now));
    man += std::string("generated_at = ") + stamp + "\n\n# configuration\n";
    for (const std::string& k : cfg.keys_with_prefix("")) {
        man += k + " = " + cfg.get_string(k) + "\n";
    }
    write_text_file((base / "manifest.txt").string(), man);
}

// Runs the whole pipeline described by a config file. Key groups: `synth.*`
// or `data.*` (source), `preprocess.*`, `net.*`, `train.*`, `episode.*`,
// `finetune.*`, `receiver.N.*`, plus `seed`, `source`, `receivers`,
// `model.in`, `model.out`, and `output_dir`.
inline ExperimentResult run_experiment(const KvConfig& cfg) {
    cfg.require_schema(1);
    const std::uint64_t seed = cfg.get_u64("seed", 1);

    ExperimentResult res;
    res.grid = grid_from_config(cfg);
    const PreprocessConfig pre = preprocess_from_config(cfg);
    const std::string source = cfg.get_string("source", "synth");
    const int receivers = static_cast<int>(cfg.get_int("receivers", 1));
    if (receivers < 1) throw ConfigError("experiment: receivers must be >= 1");

    std::vector<CsiTensor> base_tensors;
    std::vector<LabeledSet> novel_pools;  // one per receiver

    if (source == "synth") {
        const LibraryOptions opt = library_from_config(cfg, "synth.library.");
        const int class_count = static_cast<int>(cfg.get_int("synth.class_count", 22));
        std::vector<int> novel = cfg.get_int_list("synth.novel_classes", {2, 5, 9, 13, 17, 20});
        std::sort(novel.begin(), novel.end());
        for (std::size_t i = 0; i < novel.size(); ++i) {
            if (novel[i] < 0 || novel[i] >= class_count) {
                throw ConfigError("experiment: novel class " + std::to_string(novel[i]) +
                                  " outside 0.." + std::to_string(class_count - 1));
            }
            if (i > 0 && novel[i] == novel[i - 1]) {
                throw ConfigError("experiment: duplicate novel class " +
                                  std::to_string(novel[i]));
            }
        }
        std::vector<int> base_ids;
        for (int c = 0; c < class_count; ++c) {
            if (!std::binary_search(novel.begin(), novel.end(), c)) base_ids.push_back(c);
        }
        if (base_ids.size() < 2) {
            throw ConfigError("experiment: fewer than 2 base classes remain");
        }
        res.base_classes = base_ids;
        res.novel_classes = novel;

        const std::optional<DomainShiftSpec> shift = shift_from_config(cfg, "synth.shift.");
        const std::vector<ActivityClass> source_lib =
            make_activity_library(class_count, seed, std::nullopt, opt);
        const std::vector<ActivityClass> target_lib =
            shift ? make_activity_library(class_count, seed, shift, opt) : source_lib;

        DatasetSpec ds;
        ds.instances_per_class =
            static_cast<int>(cfg.get_int("synth.instances_per_class", 12));
        ds.duration_s = cfg.get_double("synth.duration_s", 2.0);
        ds.rate_hz = cfg.get_double("synth.rate_hz", 50.0);
        ds.noise = noise_from_config(cfg, "synth.noise.");
        ds.jitter = jitter_from_config(cfg, "synth.jitter.");

        DatasetSpec base_ds = ds;
        base_ds.domain = "source";
        base_ds.seed = derive_seed(seed, 0xDA7A, 0);
        base_ds.first_event_id = 0;

        DatasetSpec novel_ds = ds;
        novel_ds.instances_per_class =
            static_cast<int>(cfg.get_int("synth.novel_instances_per_class",
                                         ds.instances_per_class));
        novel_ds.domain = shift ? "target" : "source";
        novel_ds.seed = derive_seed(seed, 0xDA7A, 1);
        novel_ds.first_event_id = 1'000'000;

        std::vector<ReceiverVariant> variants;
        for (int rx = 0; rx < receivers; ++rx) {
            variants.push_back(
                variant_from_config(cfg, rx, "receiver." + std::to_string(rx) + "."));
        }

        const std::vector<ActivityClass> base_view =
            receivers > 1 ? apply_receiver_variant(detail::pick_classes(source_lib, base_ids),
                                                   variants[0], opt)
                          : detail::pick_classes(source_lib, base_ids);
        base_tensors = preprocess_all(synth_dataset(base_view, res.grid, base_ds), res.grid, pre);

        const std::vector<ActivityClass> novel_lib = detail::pick_classes(target_lib, novel);
        if (receivers > 1) {
            const std::vector<std::vector<CsiRecording>> per_rx =
                synth_multi_receiver(novel_lib, res.grid, novel_ds, variants, opt);
            for (const std::vector<CsiRecording>& recs : per_rx) {
                novel_pools.push_back(to_labeled_set(preprocess_all(recs, res.grid, pre),
                                                     SetRole::query, novel_ds.domain));
            }
        } else {
            novel_pools.push_back(
                to_labeled_set(preprocess_all(synth_dataset(novel_lib, res.grid, novel_ds),
                                              res.grid, pre),
                               SetRole::query, novel_ds.domain));
        }
    } else if (source == "containers") {
        base_tensors = read_tensor_container(read_file(cfg.get_string("data.base"))).tensors;
        const std::string novel_domain = cfg.get_string("data.novel_domain", "target");
        novel_pools.push_back(to_labeled_set(
            read_tensor_container(read_file(cfg.get_string("data.novel"))).tensors,
            SetRole::query, novel_domain));
        for (int rx = 1; rx < receivers; ++rx) {
            novel_pools.push_back(to_labeled_set(
                read_tensor_container(
                    read_file(cfg.get_string("data.novel." + std::to_string(rx))))
                    .tensors,
                SetRole::query, novel_domain));
        }
        std::vector<int> base_ids;
        for (const CsiTensor& t : base_tensors) {
            if (!std::binary_search(base_ids.begin(), base_ids.end(), t.label)) {
                base_ids.insert(std::lower_bound(base_ids.begin(), base_ids.end(), t.label),
                                t.label);
            }
        }
        res.base_classes = base_ids;
        res.novel_classes = novel_pools[0].classes();
    } else {
        throw ConfigError("experiment: source must be synth or containers, got `" + source +
                          "`");
    }

    if (base_tensors.empty()) throw ConfigError("experiment: base set is empty");
    for (const LabeledSet& pool : novel_pools) {
        require_disjoint_from_base(res.base_classes, pool);
    }

    const int in_h = base_tensors[0].data.h;
    const int in_w = base_tensors[0].data.w;
    const int in_c = base_tensors[0].data.c;

    const std::string model_in = cfg.get_string("model.in", "");
    if (!model_in.empty()) {
        auto [spec, params] = load_model(model_in);
        if (spec.input_h != in_h || spec.input_w != in_w || spec.input_c != in_c) {
            throw ConfigError("experiment: model expects " + std::to_string(spec.input_h) + "x" +
                              std::to_string(spec.input_w) + "x" + std::to_string(spec.input_c) +
                              " input but the data is " + std::to_string(in_h) + "x" +
                              std::to_string(in_w) + "x" + std::to_string(in_c));
        }
        res.spec = spec;
        res.extractor = std::move(params);
        // net.* keys are legitimately unused when a model is supplied.
        (void)cfg.get_string("net.preset", "");
        (void)cfg.get_double("net.l2_epsilon", 0.0);
        (void)train_from_config(cfg, seed);
    } else {
        res.spec = net_from_config(cfg, in_h, in_w, in_c);
        const TrainConfig tc = train_from_config(cfg, derive_seed(seed, 0x17A1));
        auto [params, report] = train_supervised(base_tensors, res.spec, tc);
        res.extractor = std::move(params);
        res.train_report = std::move(report);
        res.trained = true;
    }
    const std::string model_out = cfg.get_string("model.out", "");
    if (!model_out.empty()) save_model(model_out, res.spec, res.extractor);
    strip_head(res.extractor);

    EvalConfig ec;
    ec.episode = episode_from_config(cfg, derive_seed(seed, 0xE7A1));
    ec.mode = EvalMode::direct;
    const bool finetune_on = cfg.get_bool("finetune.enable", false);
    const FineTuneConfig ftc = finetune_from_config(cfg, derive_seed(seed, 0xF7E1));

    res.direct = evaluate(res.spec, res.extractor, novel_pools[0], ec);
    if (finetune_on) {
        EvalConfig fec = ec;
        fec.mode = EvalMode::fine_tuned;
        fec.finetune = ftc;
        res.fine_tuned = evaluate(res.spec, res.extractor, novel_pools[0], fec);
    }
    if (receivers > 1) {
        EvalConfig cec = ec;
        if (finetune_on) {
            cec.mode = EvalMode::fine_tuned;
            cec.finetune = ftc;
        }
        res.collab = evaluate_collab(res.spec,
                                     std::vector<Params>(novel_pools.size(), res.extractor),
                                     novel_pools, cec);
    }

    const std::string out_dir = cfg.get_string("output_dir", "");
    cfg.require_all_used();
    if (!out_dir.empty()) write_experiment_outputs(res, cfg, out_dir);
    return res;
}

}  // namespace fws
