// Command-line front end: synthesize CSI, convert legacy captures, build
// tensors, train extractors, produce support matrices, classify queries,
// fuse receivers, run episode evaluations, and drive whole experiments.

#include <cstdio>
#include <iostream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "fws/fws.hpp"

namespace {

std::string fmt_g(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

std::vector<int> grid_indices_of(const fws::SubcarrierGrid& g) { return g.group_index; }

fws::SubcarrierGrid grid_from_indices_cfg(const std::vector<int>& indices,
                                          const fws::KvConfig& cfg) {
    return fws::SubcarrierGrid::from_indices(indices,
                                             cfg.get_double("grid.center_freq_hz", 5.32e9),
                                             cfg.get_double("grid.spacing_hz", 20e6 / 64.0));
}

// ---- synth ----------------------------------------------------------------

int cmd_synth(const std::string& config_path, const std::string& out_path) {
    const fws::KvConfig cfg = fws::KvConfig::load(config_path);
    cfg.require_schema(1);
    const std::uint64_t seed = cfg.get_u64("seed", 1);
    const fws::SubcarrierGrid grid = fws::grid_from_config(cfg);
    const fws::PhaseNoiseModel noise = fws::noise_from_config(cfg);
    const double duration = cfg.get_double("duration_s", 2.0);
    const double rate = cfg.get_double("rate_hz", 50.0);
    const std::string mode = cfg.get_string("mode", "library");

    std::vector<fws::CsiRecording> recordings;
    if (mode == "library") {
        const fws::LibraryOptions opt = fws::library_from_config(cfg);
        const int class_count = static_cast<int>(cfg.get_int("class_count"));
        const std::optional<fws::DomainShiftSpec> shift = fws::shift_from_config(cfg);
        std::vector<fws::ActivityClass> lib =
            fws::make_activity_library(class_count, seed, shift, opt);
        if (cfg.has("classes")) {
            const std::vector<int> keep = cfg.get_int_list("classes");
            std::vector<fws::ActivityClass> subset;
            for (const fws::ActivityClass& ac : lib) {
                if (std::find(keep.begin(), keep.end(), ac.class_id) != keep.end()) {
                    subset.push_back(ac);
                }
            }
            if (subset.empty()) throw fws::ConfigError("synth: `classes` selects nothing");
            lib = std::move(subset);
        }
        if (cfg.get_bool("variant.enable", false)) {
            lib = fws::apply_receiver_variant(
                lib,
                fws::variant_from_config(
                    cfg, static_cast<int>(cfg.get_int("receiver_id", 0)), "variant."),
                opt);
        }
        fws::DatasetSpec ds;
        ds.instances_per_class = static_cast<int>(cfg.get_int("instances_per_class", 12));
        ds.duration_s = duration;
        ds.rate_hz = rate;
        ds.noise = noise;
        ds.domain = cfg.get_string("domain", "source");
        ds.receiver_id = static_cast<int>(cfg.get_int("receiver_id", 0));
        ds.jitter = fws::jitter_from_config(cfg);
        ds.seed = fws::derive_seed(seed, 0xDA7A);
        ds.first_event_id = cfg.get_int("first_event_id", 0);
        recordings = fws::synth_dataset(lib, grid, ds);
    } else if (mode == "scene") {
        const fws::ChannelScene scene = fws::scene_from_config(cfg, "scene.");
        fws::CsiRecording rec = fws::synth_clean_csi(scene, grid, duration, rate);
        rec.label = static_cast<int>(cfg.get_int("label", -1));
        rec.domain = cfg.get_string("domain", "");
        rec.receiver_id = static_cast<int>(cfg.get_int("receiver_id", 0));
        rec.event_id = cfg.get_int("event_id", -1);
        fws::apply_phase_noise(rec, grid, noise, fws::derive_seed(seed, 0xDA7A));
        recordings.push_back(std::move(rec));
    } else {
        throw fws::ConfigError("synth: mode must be library or scene, got `" + mode + "`");
    }
    cfg.require_all_used();
    fws::write_file(out_path, fws::write_container(recordings, grid_indices_of(grid)));
    std::cout << "wrote " << recordings.size() << " recordings to " << out_path << "\n";
    return 0;
}

// ---- convert ----------------------------------------------------------------

struct ManifestRow {
    std::string path;
    int label = -1;
    std::string domain;
    int receiver = 0;
};

std::vector<ManifestRow> read_manifest(const std::string& path) {
    const std::string text = fws::read_text_file(path);
    std::istringstream in(text);
    std::string line;
    std::vector<ManifestRow> rows;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty() || line[0] == '#') continue;
        std::istringstream ls(line);
        std::string cell;
        std::vector<std::string> cells;
        while (std::getline(ls, cell, ',')) cells.push_back(cell);
        if (cells.empty() || cells[0].empty()) {
            throw fws::ConfigError(path + ":" + std::to_string(lineno) +
                                   ": expected `path[,label[,domain[,receiver]]]`");
        }
        ManifestRow r;
        r.path = cells[0];
        try {
            if (cells.size() > 1 && !cells[1].empty()) r.label = std::stoi(cells[1]);
            if (cells.size() > 2) r.domain = cells[2];
            if (cells.size() > 3 && !cells[3].empty()) r.receiver = std::stoi(cells[3]);
        } catch (const std::exception&) {
            throw fws::ConfigError(path + ":" + std::to_string(lineno) + ": bad number");
        }
        rows.push_back(std::move(r));
    }
    return rows;
}

int cmd_convert(const std::string& manifest_path, const std::string& out_path,
                double tick_rate) {
    const std::vector<ManifestRow> rows = read_manifest(manifest_path);
    if (rows.empty()) throw fws::ConfigError("convert: manifest lists no files");
    const fws::SubcarrierGrid grid = fws::SubcarrierGrid::intel5300();

    std::vector<fws::CsiRecording> recordings;
    std::size_t skipped_total = 0;
    for (std::size_t i = 0; i < rows.size(); ++i) {
        fws::LegacyParseResult parsed;
        try {
            parsed = fws::parse_legacy_stream(fws::read_file(rows[i].path), tick_rate);
        } catch (const fws::DataError& e) {
            throw fws::DataError(rows[i].path + ": " + e.what());
        }
        skipped_total += parsed.skipped_entries;
        if (parsed.frames.empty()) {
            std::cerr << "warning: " << rows[i].path << ": no decodable entries, skipping\n";
            continue;
        }
        fws::CsiRecording rec;
        rec.frames = std::move(parsed.frames);
        rec.label = rows[i].label;
        rec.domain = rows[i].domain;
        rec.receiver_id = rows[i].receiver;
        rec.event_id = static_cast<std::int64_t>(i);
        if (rec.frames.size() >= 2) {
            const double span = rec.frames.back().timestamp_s - rec.frames.front().timestamp_s;
            if (span > 0.0) {
                rec.packet_rate_hz = static_cast<double>(rec.frames.size() - 1) / span;
            }
        }
        rec.validate(&grid);
        recordings.push_back(std::move(rec));
    }
    if (recordings.empty()) throw fws::DataError("convert: no file produced any frames");
    fws::write_file(out_path, fws::write_container(recordings, grid_indices_of(grid)));
    std::cout << "wrote " << recordings.size() << " recordings to " << out_path << " ("
              << skipped_total << " non-data entries skipped)\n";
    return 0;
}

// ---- preprocess -------------------------------------------------------------

int cmd_preprocess(const std::string& in_path, const std::string& out_path,
                   const std::string& config_path) {
    fws::KvConfig cfg;
    if (!config_path.empty()) {
        cfg = fws::KvConfig::load(config_path);
        cfg.require_schema(1);
    }
    const fws::Container c = fws::read_container(fws::read_file(in_path));
    const fws::SubcarrierGrid grid = grid_from_indices_cfg(c.grid_indices, cfg);
    const fws::PreprocessConfig pre = fws::preprocess_from_config(cfg);
    cfg.require_all_used();
    const std::vector<fws::CsiTensor> tensors = fws::preprocess_all(c.recordings, grid, pre);
    fws::write_file(out_path, fws::write_tensor_container(tensors, c.grid_indices));
    std::cout << "wrote " << tensors.size() << " tensors to " << out_path << "\n";
    return 0;
}

// ---- train ------------------------------------------------------------------

int cmd_train(const std::string& in_path, const std::string& model_path,
              const std::string& config_path, const std::string& report_path) {
    const fws::KvConfig cfg = fws::KvConfig::load(config_path);
    cfg.require_schema(1);
    const std::uint64_t seed = cfg.get_u64("seed", 1);
    const fws::TensorContainer tc = fws::read_tensor_container(fws::read_file(in_path));
    if (tc.tensors.empty()) throw fws::DataError("train: tensor container is empty");
    const fws::Tensor& first = tc.tensors[0].data;
    const fws::NetSpec spec = fws::net_from_config(cfg, first.h, first.w, first.c);
    const fws::TrainConfig train_cfg = fws::train_from_config(cfg, seed);
    cfg.require_all_used();

    auto [params, report] = fws::train_supervised(tc.tensors, spec, train_cfg);
    fws::save_model(model_path, spec, params);
    std::cout << "trained " << report.stop_epoch << " epochs (best " << report.best_epoch
              << "), holdout accuracy " << fmt_g(report.final_val_accuracy) << ", saved to "
              << model_path << "\n";
    if (!report_path.empty()) {
        std::string csv = "epoch,train_loss,val_loss,lr\n";
        for (std::size_t e = 0; e < report.train_loss.size(); ++e) {
            csv += std::to_string(e) + "," + fmt_g(report.train_loss[e]) + "," +
                   fmt_g(report.val_loss[e]) + "," + fmt_g(report.lr[e]) + "\n";
        }
        fws::write_text_file(report_path, csv);
    }
    return 0;
}

// ---- embed / finetune ---------------------------------------------------------

int cmd_embed(const std::string& model_path, const std::string& support_path,
              const std::string& out_path) {
    auto [spec, params] = fws::load_model(model_path);
    fws::strip_head(params);
    const fws::TensorContainer tc = fws::read_tensor_container(fws::read_file(support_path));
    fws::LabeledSet support = fws::to_labeled_set(tc.tensors, fws::SetRole::support, "");
    const fws::FeatureMatrix m = fws::direct_matrix(params, spec, support);
    fws::write_file(out_path, fws::serialize_matrix(m));
    std::cout << "wrote " << m.cols() << "-class matrix (dim " << m.rows << ") to " << out_path
              << "\n";
    return 0;
}

int cmd_finetune(const std::string& model_path, const std::string& support_path,
                 const std::string& out_path, const std::string& model_out,
                 const std::string& config_path) {
    fws::KvConfig cfg;
    if (!config_path.empty()) {
        cfg = fws::KvConfig::load(config_path);
        cfg.require_schema(1);
    }
    const fws::FineTuneConfig ft = fws::finetune_from_config(cfg, cfg.get_u64("seed", 1));
    cfg.require_all_used();

    auto [spec, params] = fws::load_model(model_path);
    fws::strip_head(params);
    const fws::TensorContainer tc = fws::read_tensor_container(fws::read_file(support_path));
    fws::LabeledSet support = fws::to_labeled_set(tc.tensors, fws::SetRole::support, "");
    const fws::FineTuneResult res = fws::finetune_matrix(params, spec, support, ft);
    fws::write_file(out_path, fws::serialize_matrix(res.matrix));
    if (!model_out.empty()) fws::save_model(model_out, spec, res.extractor);
    std::cout << "support loss " << fmt_g(res.initial_loss) << " -> " << fmt_g(res.final_loss)
              << " over " << ft.epochs << " epochs; wrote " << out_path << "\n";
    return 0;
}

// ---- classify -----------------------------------------------------------------

std::string prediction_header(const fws::FeatureMatrix& m) {
    std::string h = "query_index,event_id,true_label,predicted_label";
    for (int c : m.class_order) h += ",p_" + std::to_string(c);
    return h + "\n";
}

int cmd_classify(const std::string& model_path, const std::string& matrix_path,
                 const std::string& in_path, const std::string& out_path) {
    auto [spec, params] = fws::load_model(model_path);
    fws::strip_head(params);
    const fws::FeatureMatrix m = fws::load_matrix(matrix_path);
    const fws::TensorContainer tc = fws::read_tensor_container(fws::read_file(in_path));
    if (tc.tensors.empty()) throw fws::DataError("classify: no query tensors");

    std::string csv = prediction_header(m);
    std::size_t correct = 0, labeled = 0;
    for (std::size_t i = 0; i < tc.tensors.size(); ++i) {
        const fws::CsiTensor& q = tc.tensors[i];
        const fws::QueryResult r = fws::classify_query(params, spec, m, q);
        csv += std::to_string(i) + "," + std::to_string(q.event_id) + "," +
               std::to_string(q.label) + "," + std::to_string(r.predicted_label);
        for (double p : r.probabilities) csv += "," + fmt_g(p);
        csv += "\n";
        if (q.label >= 0) {
            ++labeled;
            if (q.label == r.predicted_label) ++correct;
        }
    }
    fws::write_text_file(out_path, csv);
    std::cout << "classified " << tc.tensors.size() << " queries";
    if (labeled > 0) {
        std::cout << ", accuracy " << fmt_g(static_cast<double>(correct) /
                                            static_cast<double>(labeled))
                  << " over " << labeled << " labeled";
    }
    std::cout << "; wrote " << out_path << "\n";
    return 0;
}

// ---- fuse ----------------------------------------------------------------------

int cmd_fuse(const std::vector<std::string>& receiver_args, const std::string& out_path) {
    if (receiver_args.size() < 2) {
        throw fws::ConfigError("fuse: need at least 2 --receiver model:matrix:queries triples");
    }
    std::vector<fws::ReceiverModel> models;
    std::vector<std::map<std::int64_t, const fws::CsiTensor*>> by_event;
    std::vector<fws::TensorContainer> containers(receiver_args.size());
    std::set<std::int64_t> events;

    for (std::size_t r = 0; r < receiver_args.size(); ++r) {
        const std::string& arg = receiver_args[r];
        const auto c1 = arg.find(':');
        const auto c2 = c1 == std::string::npos ? std::string::npos : arg.find(':', c1 + 1);
        if (c2 == std::string::npos) {
            throw fws::ConfigError("fuse: --receiver wants model:matrix:queries, got `" + arg +
                                   "`");
        }
        fws::ReceiverModel m;
        m.receiver_id = static_cast<int>(r);
        auto [spec, params] = fws::load_model(arg.substr(0, c1));
        fws::strip_head(params);
        m.spec = std::move(spec);
        m.extractor = std::move(params);
        m.matrix = fws::load_matrix(arg.substr(c1 + 1, c2 - c1 - 1));
        containers[r] = fws::read_tensor_container(fws::read_file(arg.substr(c2 + 1)));
        by_event.emplace_back();
        for (const fws::CsiTensor& t : containers[r].tensors) {
            if (t.event_id < 0) {
                throw fws::DataError("fuse: receiver " + std::to_string(r) +
                                     " has a query without an event id");
            }
            by_event[r][t.event_id] = &t;
            events.insert(t.event_id);
        }
        models.push_back(std::move(m));
    }

    std::string csv = "event_id,true_label,predicted_label";
    for (std::size_t r = 0; r < models.size(); ++r) csv += ",receiver_" + std::to_string(r);
    for (int c : models[0].matrix.class_order) csv += ",p_" + std::to_string(c);
    csv += "\n";

    std::size_t correct = 0, labeled = 0;
    for (std::int64_t ev : events) {
        std::vector<std::optional<fws::CsiTensor>> queries(models.size());
        int true_label = -1;
        for (std::size_t r = 0; r < models.size(); ++r) {
            const auto it = by_event[r].find(ev);
            if (it != by_event[r].end()) {
                queries[r] = *it->second;
                if (true_label < 0) true_label = it->second->label;
            }
        }
        const fws::FusionResult fr = fws::collab_classify(models, queries);
        csv += std::to_string(ev) + "," + std::to_string(true_label) + "," +
               std::to_string(fr.predicted_label);
        std::size_t present = 0;
        for (std::size_t r = 0; r < models.size(); ++r) {
            if (queries[r].has_value()) {
                csv += "," + std::to_string(fr.per_receiver_predictions[present++]);
            } else {
                csv += ",";
            }
        }
        for (double p : fr.fused) csv += "," + fmt_g(p);
        csv += "\n";
        if (true_label >= 0) {
            ++labeled;
            if (true_label == fr.predicted_label) ++correct;
        }
    }
    fws::write_text_file(out_path, csv);
    std::cout << "fused " << events.size() << " events across " << models.size()
              << " receivers";
    if (labeled > 0) {
        std::cout << ", accuracy " << fmt_g(static_cast<double>(correct) /
                                            static_cast<double>(labeled));
    }
    std::cout << "; wrote " << out_path << "\n";
    return 0;
}

// ---- eval ----------------------------------------------------------------------

int cmd_eval(const std::string& model_path, const std::string& pool_path,
             const std::string& config_path, const std::string& metrics_path) {
    const fws::KvConfig cfg = fws::KvConfig::load(config_path);
    cfg.require_schema(1);
    const std::uint64_t seed = cfg.get_u64("seed", 1);

    auto [spec, params] = fws::load_model(model_path);
    fws::strip_head(params);
    const fws::TensorContainer tc = fws::read_tensor_container(fws::read_file(pool_path));
    const fws::LabeledSet pool =
        fws::to_labeled_set(tc.tensors, fws::SetRole::query, cfg.get_string("domain", ""));

    fws::EvalConfig ec;
    ec.episode = fws::episode_from_config(cfg, seed);
    if (cfg.get_bool("finetune.enable", false)) {
        ec.mode = fws::EvalMode::fine_tuned;
        ec.finetune = fws::finetune_from_config(cfg, seed);
    }
    cfg.require_all_used();

    const fws::Metrics m = fws::evaluate(spec, params, pool, ec);
    std::cout << ec.episode.episode_count << " episodes of " << ec.episode.ways << "-way "
              << ec.episode.shots << "-shot: accuracy " << fmt_g(m.accuracy) << " (per-episode "
              << fmt_g(m.episode_mean) << " +/- " << fmt_g(m.episode_std) << ")\n";
    if (!metrics_path.empty()) {
        std::string csv = "kind,index,value\n";
        csv += "accuracy,," + fmt_g(m.accuracy) + "\n";
        csv += "episode_mean,," + fmt_g(m.episode_mean) + "\n";
        csv += "episode_std,," + fmt_g(m.episode_std) + "\n";
        for (std::size_t e = 0; e < m.per_episode_accuracy.size(); ++e) {
            csv += "episode," + std::to_string(e) + "," + fmt_g(m.per_episode_accuracy[e]) + "\n";
        }
        fws::write_text_file(metrics_path, csv);
    }
    return 0;
}

// ---- run -----------------------------------------------------------------------

int cmd_run(const std::string& config_path) {
    const fws::ExperimentResult r = fws::run_experiment(fws::KvConfig::load(config_path));
    if (r.trained) {
        std::cout << "trained extractor: " << r.train_report.stop_epoch << " epochs, holdout "
                  << fmt_g(r.train_report.final_val_accuracy) << "\n";
    }
    std::cout << "direct: accuracy " << fmt_g(r.direct.accuracy) << " (per-episode "
              << fmt_g(r.direct.episode_mean) << " +/- " << fmt_g(r.direct.episode_std) << ")\n";
    if (r.fine_tuned) {
        std::cout << "fine-tuned: accuracy " << fmt_g(r.fine_tuned->accuracy) << " (per-episode "
                  << fmt_g(r.fine_tuned->episode_mean) << " +/- "
                  << fmt_g(r.fine_tuned->episode_std) << ")\n";
    }
    if (r.collab) {
        std::cout << "fused: accuracy " << fmt_g(r.collab->fused.accuracy) << " vs";
        for (std::size_t i = 0; i < r.collab->per_receiver.size(); ++i) {
            std::cout << (i ? "," : "") << " receiver " << i << " "
                      << fmt_g(r.collab->per_receiver[i].accuracy);
        }
        std::cout << "\n";
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Few-shot Wi-Fi channel-state sensing toolkit"};
    app.require_subcommand(1);
    app.set_version_flag("--version", std::string(fws::kVersion));

    std::string config, out, in, model, matrix, manifest, report, model_out, metrics, pool;
    double tick_rate = 1e6;
    std::vector<std::string> receiver_args;

    CLI::App* synth = app.add_subcommand("synth", "Synthesize CSI recordings");
    synth->add_option("--config", config, "synthesis config file")->required();
    synth->add_option("--out", out, "output recordings container")->required();

    CLI::App* convert = app.add_subcommand("convert", "Convert legacy capture streams");
    convert->add_option("--manifest", manifest,
                        "CSV manifest: path[,label[,domain[,receiver]]]")
        ->required();
    convert->add_option("--out", out, "output recordings container")->required();
    convert->add_option("--tick-rate", tick_rate, "timestamp ticks per second");

    CLI::App* preprocess = app.add_subcommand("preprocess", "Recordings to input tensors");
    preprocess->add_option("--in", in, "recordings container")->required();
    preprocess->add_option("--out", out, "output tensor container")->required();
    preprocess->add_option("--config", config, "preprocess config file");

    CLI::App* train = app.add_subcommand("train", "Train a feature extractor");
    train->add_option("--in", in, "labeled tensor container")->required();
    train->add_option("--out", model, "output model file")->required();
    train->add_option("--config", config, "training config file")->required();
    train->add_option("--report", report, "write per-epoch loss CSV here");

    CLI::App* embed = app.add_subcommand("embed", "Support matrix from class means");
    embed->add_option("--model", model, "extractor model file")->required();
    embed->add_option("--support", in, "support tensor container")->required();
    embed->add_option("--out", out, "output matrix file")->required();

    CLI::App* finetune = app.add_subcommand("finetune", "Adapt matrix (and extractor) to support");
    finetune->add_option("--model", model, "extractor model file")->required();
    finetune->add_option("--support", in, "support tensor container")->required();
    finetune->add_option("--out", out, "output matrix file")->required();
    finetune->add_option("--model-out", model_out, "write adapted extractor here");
    finetune->add_option("--config", config, "fine-tune config file");

    CLI::App* classify = app.add_subcommand("classify", "Classify query tensors");
    classify->add_option("--model", model, "extractor model file")->required();
    classify->add_option("--matrix", matrix, "support matrix file")->required();
    classify->add_option("--in", in, "query tensor container")->required();
    classify->add_option("--out", out, "output predictions CSV")->required();

    CLI::App* fuse = app.add_subcommand("fuse", "Fuse several receivers' predictions");
    fuse->add_option("--receiver", receiver_args, "model:matrix:queries triple (repeat)")
        ->required();
    fuse->add_option("--out", out, "output predictions CSV")->required();

    CLI::App* eval = app.add_subcommand("eval", "Episode evaluation of a model over a pool");
    eval->add_option("--model", model, "extractor model file")->required();
    eval->add_option("--pool", pool, "novel-class tensor container")->required();
    eval->add_option("--config", config, "episode config file")->required();
    eval->add_option("--metrics", metrics, "write metrics CSV here");

    CLI::App* run = app.add_subcommand("run", "Config-driven end-to-end experiment");
    run->add_option("--config", config, "experiment config file")->required();

    try {
        app.parse(argc, argv);
        if (synth->parsed()) return cmd_synth(config, out);
        if (convert->parsed()) return cmd_convert(manifest, out, tick_rate);
        if (preprocess->parsed()) return cmd_preprocess(in, out, config);
        if (train->parsed()) return cmd_train(in, model, config, report);
        if (embed->parsed()) return cmd_embed(model, in, out);
        if (finetune->parsed()) return cmd_finetune(model, in, out, model_out, config);
        if (classify->parsed()) return cmd_classify(model, matrix, in, out);
        if (fuse->parsed()) return cmd_fuse(receiver_args, out);
        if (eval->parsed()) return cmd_eval(model, pool, config, metrics);
        if (run->parsed()) return cmd_run(config);
        return 2;
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    } catch (const fws::Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return e.exit_code();
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}
