#pragma once

#include <algorithm>
#include <cstdint>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "fws/adam.hpp"
#include "fws/errors.hpp"
#include "fws/net.hpp"
#include "fws/rng.hpp"
#include "fws/tensor.hpp"

namespace fws {

struct TrainConfig {
    double lr0 = 1e-3;
    double lr_decay = 0.1;
    int lr_patience = 20;    // epochs without a new best before decaying lr
    int stop_patience = 50;  // epochs without a new best before stopping
    int max_epochs = 200;    // hard cap independent of the plateau logic
    int batch_size = 32;
    double validation_fraction = 0.2;
    std::uint64_t seed = 0;
    AdamConfig adam;

    void validate() const {
        if (!(lr0 > 0.0)) throw ConfigError("train: lr0 must be > 0");
        if (!(lr_decay > 0.0 && lr_decay < 1.0)) throw ConfigError("train: lr_decay must be in (0, 1)");
        if (lr_patience < 1 || stop_patience < 1) throw ConfigError("train: patience values must be >= 1");
        if (max_epochs < 1) throw ConfigError("train: max_epochs must be >= 1");
        if (batch_size < 1) throw ConfigError("train: batch size must be >= 1");
        if (!(validation_fraction > 0.0 && validation_fraction < 1.0)) {
            throw ConfigError("train: validation fraction must be in (0, 1)");
        }
        adam.validate();
    }
};

struct TrainReport {
    std::vector<double> train_loss;  // one entry per epoch run
    std::vector<double> val_loss;
    std::vector<double> lr;  // learning rate in effect during that epoch
    int stop_epoch = 0;      // number of epochs actually run
    int best_epoch = -1;     // epoch whose parameters are returned
    double final_val_accuracy = 0.0;
    std::vector<int> class_order;  // labels behind the training head columns
};

// Plateau schedule: a strict new validation-loss minimum resets both
// counters; `lr_patience` stale epochs multiply lr by `decay` and reset only
// the decay counter (the stop counter keeps counting); `stop_patience` stale
// epochs end training.
class PlateauScheduler {
public:
    PlateauScheduler(double lr0, double decay, int lr_patience, int stop_patience)
        : lr_(lr0), decay_(decay), lr_patience_(lr_patience), stop_patience_(stop_patience) {}

    // Feeds one epoch's validation loss. Returns false when training should stop.
    bool observe(double val_loss) {
        if (val_loss < best_) {
            best_ = val_loss;
            improved_ = true;
            since_decay_ = 0;
            since_best_ = 0;
            return true;
        }
        improved_ = false;
        ++since_decay_;
        ++since_best_;
        if (since_best_ >= stop_patience_) return false;
        if (since_decay_ >= lr_patience_) {
            lr_ *= decay_;
            since_decay_ = 0;
        }
        return true;
    }

    double lr() const { return lr_; }
    double best() const { return best_; }
    bool improved_last() const { return improved_; }

private:
    double lr_;
    double decay_;
    int lr_patience_;
    int stop_patience_;
    double best_ = std::numeric_limits<double>::infinity();
    int since_decay_ = 0;
    int since_best_ = 0;
    bool improved_ = false;
};

namespace detail {

// Sorted unique labels plus a label -> column lookup.
inline std::pair<std::vector<int>, std::map<int, int>>
class_index(const std::vector<CsiTensor>& data) {
    std::map<int, int> lookup;
    for (const auto& t : data) lookup.emplace(t.label, 0);
    std::vector<int> order;
    order.reserve(lookup.size());
    for (auto& [label, col] : lookup) {
        col = static_cast<int>(order.size());
        order.push_back(label);
    }
    return {order, lookup};
}

}  // namespace detail

// Supervised training of the feature extractor with a softmax head on top of
// the normalized embedding. The dataset is split per class into train/val
// parts; every stochastic choice (split, init, batch order) derives from
// config.seed. Returns the parameters of the best validation epoch and the
// per-epoch report.
inline std::pair<Params, TrainReport> train_supervised(const std::vector<CsiTensor>& data,
                                                       const NetSpec& spec,
                                                       const TrainConfig& cfg) {
    cfg.validate();
    spec.validate();

    const auto [class_order, label_col] = detail::class_index(data);
    if (class_order.size() < 2) {
        throw ConfigError("train: dataset must contain at least 2 classes");
    }

    // Per-class holdout split; every class keeps at least one sample on each side.
    std::vector<std::vector<std::size_t>> by_class(class_order.size());
    for (std::size_t i = 0; i < data.size(); ++i) {
        by_class[static_cast<std::size_t>(label_col.at(data[i].label))].push_back(i);
    }
    std::vector<std::size_t> train_idx, val_idx;
    for (std::size_t c = 0; c < by_class.size(); ++c) {
        auto& idx = by_class[c];
        if (idx.size() < 2) {
            throw ConfigError("train: class " + std::to_string(class_order[c]) +
                              " has fewer than 2 samples; no validation split possible");
        }
        Rng r(derive_seed(cfg.seed, 0x5BA1, c));
        r.shuffle(idx);
        auto n_val = static_cast<std::size_t>(
            std::llround(cfg.validation_fraction * static_cast<double>(idx.size())));
        n_val = std::clamp<std::size_t>(n_val, 1, idx.size() - 1);
        val_idx.insert(val_idx.end(), idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(n_val));
        train_idx.insert(train_idx.end(), idx.begin() + static_cast<std::ptrdiff_t>(n_val), idx.end());
    }

    const int n = spec.embedding_dim();
    Params params = init_params(spec, derive_seed(cfg.seed, 0x1417));
    attach_head(params, n, class_order, derive_seed(cfg.seed, 0x4EAD));
    AdamState opt = AdamState::for_params(params);

    auto make_examples = [&](const std::vector<std::size_t>& which) {
        std::vector<TrainExample> out;
        out.reserve(which.size());
        for (std::size_t i : which) {
            out.push_back({&data[i].data, label_col.at(data[i].label)});
        }
        return out;
    };
    const std::vector<TrainExample> val_examples = make_examples(val_idx);

    PlateauScheduler sched(cfg.lr0, cfg.lr_decay, cfg.lr_patience, cfg.stop_patience);
    TrainReport report;
    report.class_order = class_order;
    Params best_params = params;

    for (int epoch = 0; epoch < cfg.max_epochs; ++epoch) {
        const double lr = sched.lr();
        Rng shuffle_rng(derive_seed(cfg.seed, 0xE60C, static_cast<std::uint64_t>(epoch)));
        std::vector<std::size_t> order = train_idx;
        shuffle_rng.shuffle(order);

        double train_loss_sum = 0.0;
        std::size_t seen = 0;
        for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
            const std::size_t stop = std::min(order.size(), start + cfg.batch_size);
            const std::vector<TrainExample> batch = make_examples(
                std::vector<std::size_t>(order.begin() + static_cast<std::ptrdiff_t>(start),
                                         order.begin() + static_cast<std::ptrdiff_t>(stop)));
            Params grads = Params::zeros_like(params);
            const double loss = loss_and_gradients(params, spec, batch, grads);
            adam_step(params, opt, grads, lr, cfg.adam);
            train_loss_sum += loss * static_cast<double>(batch.size());
            seen += batch.size();
        }

        const double val_loss = batch_loss(params, spec, val_examples);
        report.train_loss.push_back(train_loss_sum / static_cast<double>(seen));
        report.val_loss.push_back(val_loss);
        report.lr.push_back(lr);

        const bool go_on = sched.observe(val_loss);
        if (sched.improved_last()) {
            best_params = params;
            report.best_epoch = epoch;
        }
        report.stop_epoch = epoch + 1;
        if (!go_on) break;
    }

    // Validation accuracy of the returned (best-epoch) parameters.
    std::size_t correct = 0;
    for (const TrainExample& ex : val_examples) {
        const std::vector<double> v =
            classify_logits(best_params, forward_features(best_params, spec, *ex.x));
        std::size_t arg = 0;
        for (std::size_t g = 1; g < v.size(); ++g) {
            if (v[g] > v[arg]) arg = g;
        }
        if (static_cast<int>(arg) == ex.y) ++correct;
    }
    report.final_val_accuracy =
        static_cast<double>(correct) / static_cast<double>(val_examples.size());

    return {std::move(best_params), std::move(report)};
}

}  // namespace fws
