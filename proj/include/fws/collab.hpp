#pragma once

#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "fws/errors.hpp"
#include "fws/fsl.hpp"
#include "fws/net.hpp"
#include "fws/tensor.hpp"

namespace fws {

// One receiver's inference assets: its (possibly adapted) extractor plus the
// feature matrix built from its own view of the support set. All receivers in
// a fusion group must share one class order.
struct ReceiverModel {
    int receiver_id = 0;
    NetSpec spec;
    Params extractor;
    FeatureMatrix matrix;
};

struct FusionResult {
    std::vector<double> fused;  // element-wise mean of the per-receiver distributions
    std::vector<std::vector<double>> per_receiver;
    std::vector<int> per_receiver_predictions;
    std::vector<int> absent_receivers;  // receiver ids skipped for missing queries
    int predicted_label = -1;
};

// Element-wise mean of probability distributions. Every input must be a
// distribution over the same classes (length equal, sum 1 within 1e-6).
inline std::vector<double> fuse_probabilities(const std::vector<std::vector<double>>& dists) {
    if (dists.empty()) throw ConfigError("fuse: no distributions");
    const std::size_t n = dists[0].size();
    if (n == 0) throw ConfigError("fuse: empty distribution");
    std::vector<double> fused(n, 0.0);
    for (std::size_t r = 0; r < dists.size(); ++r) {
        if (dists[r].size() != n) {
            throw ConfigError("fuse: distribution " + std::to_string(r) + " has length " +
                              std::to_string(dists[r].size()) + ", expected " + std::to_string(n));
        }
        double sum = 0.0;
        for (double p : dists[r]) {
            if (!std::isfinite(p) || p < 0.0) {
                throw ConfigError("fuse: distribution " + std::to_string(r) +
                                  " is not a probability vector");
            }
            sum += p;
        }
        if (std::abs(sum - 1.0) > 1e-6) {
            throw ConfigError("fuse: distribution " + std::to_string(r) + " sums to " +
                              std::to_string(sum));
        }
        for (std::size_t i = 0; i < n; ++i) fused[i] += dists[r][i];
    }
    const double inv = 1.0 / static_cast<double>(dists.size());
    for (double& p : fused) p *= inv;
    return fused;
}

// Classifies one event observed by several receivers and fuses the
// per-receiver class distributions by averaging. `queries` is aligned with
// `receivers`; a missing entry (receiver dropout) is skipped and noted in the
// result. Event consistency is checked through the tensors' event ids when
// they are set.
inline FusionResult collab_classify(const std::vector<ReceiverModel>& receivers,
                                    const std::vector<std::optional<CsiTensor>>& queries) {
    if (receivers.empty()) throw ConfigError("collab: no receivers");
    if (queries.size() != receivers.size()) {
        throw ConfigError("collab: need one query slot per receiver (" +
                          std::to_string(receivers.size()) + " receivers, " +
                          std::to_string(queries.size()) + " queries)");
    }
    const std::vector<int>& order = receivers[0].matrix.class_order;
    for (const ReceiverModel& r : receivers) {
        if (r.matrix.class_order != order) {
            throw ConfigError("collab: receiver " + std::to_string(r.receiver_id) +
                              " has a different class order");
        }
    }

    std::int64_t event = -1;
    FusionResult res;
    for (std::size_t r = 0; r < receivers.size(); ++r) {
        if (!queries[r].has_value()) {
            res.absent_receivers.push_back(receivers[r].receiver_id);
            continue;
        }
        const CsiTensor& q = *queries[r];
        if (q.event_id >= 0) {
            if (event >= 0 && q.event_id != event) {
                throw ConfigError("collab: query event ids differ (" + std::to_string(event) +
                                  " vs " + std::to_string(q.event_id) + ")");
            }
            event = q.event_id;
        }
        const QueryResult qr =
            classify_query(receivers[r].extractor, receivers[r].spec, receivers[r].matrix, q);
        res.per_receiver.push_back(qr.probabilities);
        res.per_receiver_predictions.push_back(qr.predicted_label);
    }
    if (res.per_receiver.empty()) {
        throw ConfigError("collab: every receiver's query is missing");
    }

    res.fused = fuse_probabilities(res.per_receiver);
    std::size_t arg = 0;
    for (std::size_t c = 1; c < res.fused.size(); ++c) {
        if (res.fused[c] > res.fused[arg]) arg = c;  // ties keep the lowest label
    }
    res.predicted_label = order[arg];
    return res;
}

}  // namespace fws
