#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "fws/adam.hpp"
#include "fws/bytes.hpp"
#include "fws/errors.hpp"
#include "fws/net.hpp"
#include "fws/tensor.hpp"

namespace fws {

enum class SetRole : std::uint8_t { base, support, query };

// A bag of labeled samples playing one few-shot role. `uid` identifies the
// physical sample so support/query disjointness can be checked even when
// tensors compare equal.
struct LabeledSet {
    struct Item {
        CsiTensor tensor;
        std::int64_t uid = -1;
    };

    std::vector<Item> items;
    SetRole role = SetRole::base;
    std::string domain;

    // Sorted unique labels present in the set.
    std::vector<int> classes() const {
        std::set<int> s;
        for (const auto& it : items) s.insert(it.tensor.label);
        return std::vector<int>(s.begin(), s.end());
    }
};

// Guards the support-vs-base contract: novel classes must not appear in the
// base training set.
inline void require_disjoint_from_base(const std::vector<int>& base_classes,
                                       const LabeledSet& support) {
    std::set<int> base(base_classes.begin(), base_classes.end());
    for (int c : support.classes()) {
        if (base.count(c)) {
            throw ConfigError("class " + std::to_string(c) +
                              " appears in both the base set and the support set");
        }
    }
}

enum class MatrixProvenance : std::uint8_t { direct, fine_tuned };

// Class-representative matrix scored against query embeddings: column c is
// the representative of class_order[c]. Stored column-major (m[c*rows + i]).
struct FeatureMatrix {
    int rows = 0;
    std::vector<int> class_order;
    std::vector<double> m;
    MatrixProvenance provenance = MatrixProvenance::direct;

    int cols() const { return static_cast<int>(class_order.size()); }

    const double* column(int c) const { return m.data() + static_cast<std::size_t>(c) * rows; }
    double* column(int c) { return m.data() + static_cast<std::size_t>(c) * rows; }

    void validate() const {
        if (rows < 1) throw ConfigError("feature matrix: no rows");
        if (class_order.empty()) throw ConfigError("feature matrix: no classes");
        if (m.size() != static_cast<std::size_t>(rows) * class_order.size()) {
            throw ConfigError("feature matrix: value count does not match rows x classes");
        }
        std::set<int> seen;
        for (int c : class_order) {
            if (!seen.insert(c).second) {
                throw ConfigError("feature matrix: duplicate class " + std::to_string(c));
            }
        }
        for (double x : m) {
            if (!std::isfinite(x)) throw NumericError("feature matrix: non-finite value");
        }
    }
};

// ---------------------------------------------------------------------------
// Matrix construction
// ---------------------------------------------------------------------------

// Column for class c = mean of its shots' embeddings, re-normalized to unit
// length; columns ordered by ascending label.
inline FeatureMatrix build_support_embedding(const Params& extractor, const NetSpec& spec,
                                             const LabeledSet& support) {
    if (support.items.empty()) throw ConfigError("support set is empty");
    const int n = spec.embedding_dim();

    std::map<int, std::pair<std::vector<double>, int>> acc;  // label -> (sum, count)
    for (const auto& item : support.items) {
        const std::vector<double> f = forward_features(extractor, spec, item.tensor);
        auto& [sum, count] = acc[item.tensor.label];
        if (sum.empty()) sum.assign(static_cast<std::size_t>(n), 0.0);
        for (int i = 0; i < n; ++i) sum[static_cast<std::size_t>(i)] += f[static_cast<std::size_t>(i)];
        ++count;
    }

    FeatureMatrix fm;
    fm.rows = n;
    fm.provenance = MatrixProvenance::direct;
    fm.m.reserve(acc.size() * static_cast<std::size_t>(n));
    for (const auto& [label, sum_count] : acc) {
        const auto& [sum, count] = sum_count;
        double sq = 0.0;
        for (double x : sum) sq += x * x;
        const double norm = std::sqrt(sq);
        if (norm == 0.0) {
            throw NumericError("support embedding: class " + std::to_string(label) +
                               " has a zero mean embedding");
        }
        for (double x : sum) fm.m.push_back(x / norm);
        fm.class_order.push_back(label);
    }
    fm.validate();
    return fm;
}

inline FeatureMatrix direct_matrix(const Params& extractor, const NetSpec& spec,
                                   const LabeledSet& support) {
    return build_support_embedding(extractor, spec, support);
}

struct FineTuneConfig {
    int epochs = 100;
    double lr = 1e-4;
    enum class Scope : std::uint8_t { all_layers, head_only };
    Scope scope = Scope::all_layers;
    std::uint64_t seed = 0;  // reserved; adaptation is full-batch and needs no draws
    AdamConfig adam;

    void validate() const {
        if (epochs < 1) throw ConfigError("finetune: epochs must be >= 1");
        if (lr < 0.0) throw ConfigError("finetune: lr must be >= 0");
        adam.validate();
    }
};

struct FineTuneResult {
    Params extractor;      // adapted copy (head stripped)
    FeatureMatrix matrix;  // the adapted classifier weights
    double initial_loss = 0.0;
    double final_loss = 0.0;
    std::vector<double> loss_per_epoch;  // loss before each epoch's update
};

// Adapts the classifier (and optionally the extractor) to the support set:
// the classifier weight matrix starts as the direct support embedding and
// full-batch Adam minimizes the softmax cross-entropy over the shots.
inline FineTuneResult finetune_matrix(const Params& extractor, const NetSpec& spec,
                                      const LabeledSet& support, const FineTuneConfig& cfg) {
    cfg.validate();
    const FeatureMatrix init = build_support_embedding(extractor, spec, support);
    if (init.cols() < 2) {
        throw ConfigError("finetune: support set must contain at least 2 classes");
    }
    const int n = init.rows;
    const int G = init.cols();

    // Work copy with the support embedding installed as the head. The head is
    // stored row-major [i][g]; the matrix column-major [g][i].
    Params work = extractor;
    strip_head(work);
    work.head_class_order = init.class_order;
    work.head.resize(static_cast<std::size_t>(n) * G);
    for (int g = 0; g < G; ++g) {
        for (int i = 0; i < n; ++i) {
            work.head[static_cast<std::size_t>(i) * G + g] = init.column(g)[i];
        }
    }

    std::map<int, int> col_of;
    for (int g = 0; g < G; ++g) col_of[init.class_order[static_cast<std::size_t>(g)]] = g;
    std::vector<TrainExample> batch;
    batch.reserve(support.items.size());
    for (const auto& item : support.items) {
        batch.push_back({&item.tensor.data, col_of.at(item.tensor.label)});
    }

    const bool head_only = cfg.scope == FineTuneConfig::Scope::head_only;
    AdamState opt = AdamState::for_params(work);
    FineTuneResult res;
    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        Params grads = Params::zeros_like(work);
        const double loss = loss_and_gradients(work, spec, batch, grads, head_only);
        res.loss_per_epoch.push_back(loss);
        adam_step(work, opt, grads, cfg.lr, cfg.adam);
    }
    res.initial_loss = res.loss_per_epoch.front();
    res.final_loss = batch_loss(work, spec, batch);

    res.matrix.rows = n;
    res.matrix.class_order = work.head_class_order;
    res.matrix.provenance = MatrixProvenance::fine_tuned;
    res.matrix.m.resize(static_cast<std::size_t>(n) * G);
    for (int g = 0; g < G; ++g) {
        for (int i = 0; i < n; ++i) {
            res.matrix.column(g)[i] = work.head[static_cast<std::size_t>(i) * G + g];
        }
    }
    res.matrix.validate();

    strip_head(work);
    res.extractor = std::move(work);
    return res;
}

// ---------------------------------------------------------------------------
// Query classification
// ---------------------------------------------------------------------------

struct QueryResult {
    std::vector<double> scores;         // per-class cosine, each in [-1, 1]
    std::vector<double> probabilities;  // softmax of the scores
    int predicted_label = -1;
};

// Cosine of the feature vector against every matrix column. Column scale
// cancels, so direct (unit-column) and fine-tuned (free-scale) matrices
// score through the same formula.
inline std::vector<double> cosine_scores(const FeatureMatrix& m, const std::vector<double>& f) {
    m.validate();
    if (static_cast<int>(f.size()) != m.rows) {
        throw ConfigError("cosine: feature length " + std::to_string(f.size()) +
                          " does not match matrix rows " + std::to_string(m.rows));
    }
    double f_sq = 0.0;
    for (double x : f) f_sq += x * x;
    const double f_norm = std::sqrt(f_sq);
    if (f_norm == 0.0) throw NumericError("cosine: zero feature vector");

    std::vector<double> v(static_cast<std::size_t>(m.cols()));
    for (int c = 0; c < m.cols(); ++c) {
        const double* col = m.column(c);
        double dot = 0.0, c_sq = 0.0;
        for (int i = 0; i < m.rows; ++i) {
            dot += col[i] * f[static_cast<std::size_t>(i)];
            c_sq += col[i] * col[i];
        }
        const double c_norm = std::sqrt(c_sq);
        if (c_norm == 0.0) {
            throw NumericError("cosine: matrix column for class " +
                               std::to_string(m.class_order[static_cast<std::size_t>(c)]) +
                               " is all zeros");
        }
        v[static_cast<std::size_t>(c)] = dot / (c_norm * f_norm);
    }
    return v;
}

inline QueryResult classify_features(const FeatureMatrix& m, const std::vector<double>& f) {
    QueryResult r;
    r.scores = cosine_scores(m, f);
    r.probabilities = softmax(r.scores);
    std::size_t arg = 0;
    for (std::size_t c = 1; c < r.probabilities.size(); ++c) {
        if (r.probabilities[c] > r.probabilities[arg]) arg = c;  // ties keep the lowest label
    }
    r.predicted_label = m.class_order[arg];
    return r;
}

inline QueryResult classify_query(const Params& extractor, const NetSpec& spec,
                                  const FeatureMatrix& m, const CsiTensor& x) {
    if (spec.embedding_dim() != m.rows) {
        throw ConfigError("classify: extractor output dim does not match matrix rows");
    }
    return classify_features(m, forward_features(extractor, spec, x));
}

// ---------------------------------------------------------------------------
// Matrix persistence ("FWSX", version 1, little-endian)
// ---------------------------------------------------------------------------

inline constexpr std::uint16_t kMatrixFormatVersion = 1;

inline Bytes serialize_matrix(const FeatureMatrix& m) {
    m.validate();
    ByteWriter w;
    w.raw("FWSX", 4);
    w.u16(kMatrixFormatVersion);
    w.u8(m.provenance == MatrixProvenance::direct ? 0 : 1);
    w.u32(static_cast<std::uint32_t>(m.rows));
    w.u32(static_cast<std::uint32_t>(m.cols()));
    for (int label : m.class_order) w.i32(label);
    for (double x : m.m) w.f32(static_cast<float>(x));
    return w.take();
}

inline FeatureMatrix deserialize_matrix(const Bytes& bytes) {
    ByteReader r(bytes, "matrix file");
    const std::uint8_t* magic = r.take(4);
    if (std::string(reinterpret_cast<const char*>(magic), 4) != "FWSX") {
        throw DataError("matrix file: bad magic (not a feature-matrix file)");
    }
    const std::uint16_t version = r.u16();
    if (version != kMatrixFormatVersion) {
        throw DataError("matrix file: unsupported version " + std::to_string(version));
    }
    const std::uint8_t prov = r.u8();
    if (prov > 1) r.fail("bad provenance tag");
    FeatureMatrix m;
    m.provenance = prov == 0 ? MatrixProvenance::direct : MatrixProvenance::fine_tuned;
    m.rows = static_cast<int>(r.u32());
    const std::uint32_t cols = r.u32();
    if (m.rows < 1 || m.rows > (1 << 20)) r.fail("implausible row count");
    if (cols < 1 || cols > (1u << 20)) r.fail("implausible column count");
    m.class_order.resize(cols);
    for (std::uint32_t c = 0; c < cols; ++c) m.class_order[c] = r.i32();
    m.m.resize(static_cast<std::size_t>(m.rows) * cols);
    for (double& x : m.m) x = static_cast<double>(r.f32());
    if (!r.done()) r.fail("trailing bytes after matrix payload");
    try {
        m.validate();
    } catch (const Error& e) {
        throw DataError(std::string("matrix file: ") + e.what());
    }
    return m;
}

inline void save_matrix(const std::string& path, const FeatureMatrix& m) {
    write_file(path, serialize_matrix(m));
}

inline FeatureMatrix load_matrix(const std::string& path) {
    return deserialize_matrix(read_file(path));
}

}  // namespace fws
