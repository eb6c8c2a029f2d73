#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "fws/collab.hpp"
#include "fws/errors.hpp"
#include "fws/fsl.hpp"
#include "fws/net.hpp"
#include "fws/rng.hpp"

namespace fws {

enum class QueryPolicy : std::uint8_t { all_remaining, fixed_count };

struct EpisodeSpec {
    int ways = 5;
    int shots = 1;
    QueryPolicy query_policy = QueryPolicy::all_remaining;
    int queries_per_class = 0;  // used by fixed_count only
    int episode_count = 10;
    std::uint64_t seed = 0;

    void validate() const {
        if (ways < 2) throw ConfigError("episode: ways must be >= 2");
        if (shots < 1) throw ConfigError("episode: shots must be >= 1");
        if (episode_count < 1) throw ConfigError("episode: episode count must be >= 1");
        if (query_policy == QueryPolicy::fixed_count && queries_per_class < 1) {
            throw ConfigError("episode: fixed-count query policy needs queries per class >= 1");
        }
    }
};

struct Episode {
    LabeledSet support;
    LabeledSet query;
};

// Pairs externally assembled support/query sets, enforcing that they cover
// the same classes, come from the same domain, and share no sample ids.
inline Episode make_episode(LabeledSet support, LabeledSet query) {
    if (support.items.empty()) throw ConfigError("episode: empty support set");
    if (query.items.empty()) throw ConfigError("episode: empty query set");
    if (support.classes() != query.classes()) {
        throw ConfigError("episode: support and query sets cover different classes");
    }
    if (support.domain != query.domain) {
        throw ConfigError("episode: support domain '" + support.domain +
                          "' differs from query domain '" + query.domain + "'");
    }
    std::vector<std::int64_t> sup_ids;
    for (const LabeledSet::Item& it : support.items) {
        if (it.uid >= 0) sup_ids.push_back(it.uid);
    }
    std::sort(sup_ids.begin(), sup_ids.end());
    for (const LabeledSet::Item& it : query.items) {
        if (it.uid >= 0 && std::binary_search(sup_ids.begin(), sup_ids.end(), it.uid)) {
            throw ConfigError("episode: sample id " + std::to_string(it.uid) +
                              " appears in both support and query sets");
        }
    }
    support.role = SetRole::support;
    query.role = SetRole::query;
    Episode ep;
    ep.support = std::move(support);
    ep.query = std::move(query);
    return ep;
}

// Draws one N-way K-shot episode from a pool. Classes with too few samples
// are ineligible; the draw is deterministic in (spec.seed, episode_index).
inline Episode sample_episode(const LabeledSet& pool, const EpisodeSpec& spec,
                              int episode_index) {
    spec.validate();
    std::map<int, std::vector<std::size_t>> by_class;
    for (std::size_t i = 0; i < pool.items.size(); ++i) {
        by_class[pool.items[i].tensor.label].push_back(i);
    }
    const int needed =
        spec.shots + (spec.query_policy == QueryPolicy::fixed_count ? spec.queries_per_class : 1);
    std::vector<int> eligible;
    for (const auto& [label, idx] : by_class) {
        if (static_cast<int>(idx.size()) >= needed) eligible.push_back(label);
    }
    if (static_cast<int>(eligible.size()) < spec.ways) {
        std::string msg = "episode sampling: need " + std::to_string(spec.ways) +
                          " classes with >= " + std::to_string(needed) + " samples, but only " +
                          std::to_string(eligible.size()) + " qualify";
        for (const auto& [label, idx] : by_class) {
            if (static_cast<int>(idx.size()) < needed) {
                msg += " (class " + std::to_string(label) + " has " +
                       std::to_string(idx.size()) + ")";
                break;
            }
        }
        throw ConfigError(msg);
    }

    Rng r(derive_seed(spec.seed, 0xE915, static_cast<std::uint64_t>(episode_index)));
    r.shuffle(eligible);
    eligible.resize(static_cast<std::size_t>(spec.ways));
    std::sort(eligible.begin(), eligible.end());

    Episode ep;
    ep.support.role = SetRole::support;
    ep.query.role = SetRole::query;
    ep.support.domain = pool.domain;
    ep.query.domain = pool.domain;
    for (int label : eligible) {
        std::vector<std::size_t> idx = by_class[label];
        r.shuffle(idx);
        const std::size_t q_count = spec.query_policy == QueryPolicy::fixed_count
                                        ? static_cast<std::size_t>(spec.queries_per_class)
                                        : idx.size() - static_cast<std::size_t>(spec.shots);
        for (std::size_t k = 0; k < static_cast<std::size_t>(spec.shots); ++k) {
            LabeledSet::Item item;
            item.tensor = pool.items[idx[k]].tensor;
            item.uid = pool.items[idx[k]].uid;
            ep.support.items.push_back(std::move(item));
        }
        for (std::size_t k = 0; k < q_count; ++k) {
            const std::size_t at = static_cast<std::size_t>(spec.shots) + k;
            LabeledSet::Item item;
            item.tensor = pool.items[idx[at]].tensor;
            item.uid = pool.items[idx[at]].uid;
            ep.query.items.push_back(std::move(item));
        }
    }
    return ep;
}

enum class EvalMode : std::uint8_t { direct, fine_tuned };

struct Metrics {
    double accuracy = 0.0;  // pooled over every query of every episode
    std::vector<int> class_order;
    std::vector<long long> confusion;  // rows = true class, cols = predicted
    std::vector<double> per_episode_accuracy;
    double episode_mean = 0.0;
    double episode_std = 0.0;  // sample standard deviation over episodes
    std::vector<double> episode_initial_loss;  // fine-tuned mode only
    std::vector<double> episode_final_loss;

    long long& cell(int true_idx, int pred_idx) {
        return confusion[static_cast<std::size_t>(true_idx) * class_order.size() +
                         static_cast<std::size_t>(pred_idx)];
    }
};

struct EvalConfig {
    EpisodeSpec episode;
    EvalMode mode = EvalMode::direct;
    FineTuneConfig finetune;
};

namespace detail {

inline int class_position(const std::vector<int>& order, int label, const char* what) {
    const auto it = std::lower_bound(order.begin(), order.end(), label);
    if (it == order.end() || *it != label) {
        throw StateError(std::string(what) + ": label " + std::to_string(label) +
                         " is not in the evaluation class list");
    }
    return static_cast<int>(it - order.begin());
}

inline void finish_episode_stats(Metrics& m, long long correct, long long total) {
    m.accuracy = total > 0 ? static_cast<double>(correct) / static_cast<double>(total) : 0.0;
    double sum = 0.0;
    for (double a : m.per_episode_accuracy) sum += a;
    const std::size_t n = m.per_episode_accuracy.size();
    m.episode_mean = n > 0 ? sum / static_cast<double>(n) : 0.0;
    if (n > 1) {
        double ss = 0.0;
        for (double a : m.per_episode_accuracy) ss += (a - m.episode_mean) * (a - m.episode_mean);
        m.episode_std = std::sqrt(ss / static_cast<double>(n - 1));
    }
}

}  // namespace detail

// Runs `episode_count` episodes against one extractor and accumulates one
// confusion matrix over the pool's full class list.
inline Metrics evaluate(const NetSpec& spec, const Params& extractor, const LabeledSet& pool,
                        const EvalConfig& cfg) {
    cfg.episode.validate();
    if (pool.items.empty()) throw ConfigError("evaluate: empty pool");
    Metrics m;
    m.class_order = pool.classes();
    m.confusion.assign(m.class_order.size() * m.class_order.size(), 0);
    long long correct = 0, total = 0;
    for (int e = 0; e < cfg.episode.episode_count; ++e) {
        const Episode ep = sample_episode(pool, cfg.episode, e);
        FeatureMatrix mat;
        Params net = extractor;
        if (cfg.mode == EvalMode::direct) {
            mat = direct_matrix(extractor, spec, ep.support);
        } else {
            FineTuneResult ft = finetune_matrix(extractor, spec, ep.support, cfg.finetune);
            mat = std::move(ft.matrix);
            net = std::move(ft.extractor);
            m.episode_initial_loss.push_back(ft.initial_loss);
            m.episode_final_loss.push_back(ft.final_loss);
        }
        long long ep_correct = 0;
        for (const LabeledSet::Item& item : ep.query.items) {
            const QueryResult qr = classify_query(net, spec, mat, item.tensor);
            const int ti = detail::class_position(m.class_order, item.tensor.label, "evaluate");
            const int pi = detail::class_position(m.class_order, qr.predicted_label, "evaluate");
            ++m.cell(ti, pi);
            if (qr.predicted_label == item.tensor.label) ++ep_correct;
        }
        correct += ep_correct;
        total += static_cast<long long>(ep.query.items.size());
        m.per_episode_accuracy.push_back(
            ep.query.items.empty()
                ? 0.0
                : static_cast<double>(ep_correct) / static_cast<double>(ep.query.items.size()));
    }
    detail::finish_episode_stats(m, correct, total);
    return m;
}

struct CollabEvalResult {
    Metrics fused;
    std::vector<Metrics> per_receiver;
};

// Multi-receiver evaluation. Episodes are sampled on pools[0]; the same
// events are looked up by sample id in every other pool, so all receivers
// see the same support/query split. Receiver r uses extractors[r] (pass the
// same params repeatedly to share one extractor).
inline CollabEvalResult evaluate_collab(const NetSpec& spec,
                                        const std::vector<Params>& extractors,
                                        const std::vector<LabeledSet>& pools,
                                        const EvalConfig& cfg) {
    cfg.episode.validate();
    if (pools.empty()) throw ConfigError("collab eval: no receiver pools");
    if (extractors.size() != pools.size()) {
        throw ConfigError("collab eval: " + std::to_string(extractors.size()) +
                          " extractors for " + std::to_string(pools.size()) + " pools");
    }
    const std::size_t nr = pools.size();
    std::vector<std::map<std::int64_t, std::size_t>> by_uid(nr);
    for (std::size_t r = 1; r < nr; ++r) {
        for (std::size_t i = 0; i < pools[r].items.size(); ++i) {
            const std::int64_t uid = pools[r].items[i].uid;
            if (uid < 0) {
                throw ConfigError("collab eval: receiver " + std::to_string(r) +
                                  " has a sample without an id; cannot align events");
            }
            by_uid[r][uid] = i;
        }
    }

    CollabEvalResult out;
    out.fused.class_order = pools[0].classes();
    const std::size_t nc = out.fused.class_order.size();
    out.fused.confusion.assign(nc * nc, 0);
    out.per_receiver.assign(nr, Metrics{});
    for (Metrics& m : out.per_receiver) {
        m.class_order = out.fused.class_order;
        m.confusion.assign(nc * nc, 0);
    }

    long long fused_correct = 0, total = 0;
    std::vector<long long> rx_correct(nr, 0);
    std::vector<long long> rx_total(nr, 0);

    for (int e = 0; e < cfg.episode.episode_count; ++e) {
        const Episode ep = sample_episode(pools[0], cfg.episode, e);

        // Per-receiver support sets for the same events.
        std::vector<ReceiverModel> models(nr);
        for (std::size_t r = 0; r < nr; ++r) {
            LabeledSet sup;
            sup.role = SetRole::support;
            sup.domain = pools[r].domain;
            if (r == 0) {
                sup = ep.support;
            } else {
                for (const LabeledSet::Item& item : ep.support.items) {
                    const auto it = by_uid[r].find(item.uid);
                    if (it == by_uid[r].end()) {
                        throw ConfigError("collab eval: receiver " + std::to_string(r) +
                                          " is missing event " + std::to_string(item.uid));
                    }
                    sup.items.push_back(pools[r].items[it->second]);
                }
            }
            models[r].receiver_id = static_cast<int>(r);
            models[r].spec = spec;
            if (cfg.mode == EvalMode::direct) {
                models[r].extractor = extractors[r];
                models[r].matrix = direct_matrix(extractors[r], spec, sup);
            } else {
                FineTuneResult ft = finetune_matrix(extractors[r], spec, sup, cfg.finetune);
                models[r].extractor = std::move(ft.extractor);
                models[r].matrix = std::move(ft.matrix);
            }
        }

        long long ep_correct = 0;
        for (const LabeledSet::Item& item : ep.query.items) {
            std::vector<std::optional<CsiTensor>> queries(nr);
            queries[0] = item.tensor;
            for (std::size_t r = 1; r < nr; ++r) {
                const auto it = by_uid[r].find(item.uid);
                if (it != by_uid[r].end()) queries[r] = pools[r].items[it->second].tensor;
            }
            const FusionResult fr = collab_classify(models, queries);
            const int ti =
                detail::class_position(out.fused.class_order, item.tensor.label, "collab eval");
            const int pi =
                detail::class_position(out.fused.class_order, fr.predicted_label, "collab eval");
            ++out.fused.cell(ti, pi);
            if (fr.predicted_label == item.tensor.label) ++ep_correct;

            std::size_t present = 0;
            for (std::size_t r = 0; r < nr; ++r) {
                if (!queries[r].has_value()) continue;
                const int pred = fr.per_receiver_predictions[present++];
                const int rpi =
                    detail::class_position(out.fused.class_order, pred, "collab eval");
                ++out.per_receiver[r].cell(ti, rpi);
                if (pred == item.tensor.label) ++rx_correct[r];
                ++rx_total[r];
            }
        }
        fused_correct += ep_correct;
        total += static_cast<long long>(ep.query.items.size());
        out.fused.per_episode_accuracy.push_back(
            ep.query.items.empty()
                ? 0.0
                : static_cast<double>(ep_correct) / static_cast<double>(ep.query.items.size()));
    }
    detail::finish_episode_stats(out.fused, fused_correct, total);
    for (std::size_t r = 0; r < nr; ++r) {
        out.per_receiver[r].accuracy =
            rx_total[r] > 0
                ? static_cast<double>(rx_correct[r]) / static_cast<double>(rx_total[r])
                : 0.0;
    }
    return out;
}

}  // namespace fws
