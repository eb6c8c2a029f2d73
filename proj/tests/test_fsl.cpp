// Few-shot layer: support-embedding construction against a brute-force
// oracle, fine-tuning identities and descent, cosine scoring geometry,
// probability fusion, and the feature-matrix wire format.

#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <limits>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "fws/fws.hpp"

using namespace fws;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;

namespace {

NetSpec tiny_spec() {
    NetSpec s;
    s.input_h = 8;
    s.input_w = 6;
    s.input_c = 1;
    s.layers = {LayerSpec::conv(3, 3, 1, 1, 2), LayerSpec::relu(), LayerSpec::maxpool(2, 2, 2),
                LayerSpec::flatten(), LayerSpec::dense(4), LayerSpec::l2norm()};
    return s;
}

// Class-patterned inputs with per-shot jitter, so shots cluster by label.
CsiTensor patterned_tensor(const NetSpec& spec, int label, Rng& r, std::int64_t event) {
    CsiTensor t;
    t.label = label;
    t.domain = "lab";
    t.event_id = event;
    t.data = Tensor(spec.input_h, spec.input_w, spec.input_c);
    for (int y = 0; y < spec.input_h; ++y) {
        for (int x = 0; x < spec.input_w; ++x) {
            for (int c = 0; c < spec.input_c; ++c) {
                t.data.at(y, x, c) = std::sin(0.3 * label * (y + 1)) +
                                     0.8 * std::cos(0.2 * label * (x + 1)) +
                                     r.normal(0.0, 0.1);
            }
        }
    }
    return t;
}

LabeledSet make_support(const NetSpec& spec, const std::vector<int>& labels, int shots,
                        std::uint64_t seed) {
    LabeledSet s;
    s.role = SetRole::support;
    s.domain = "lab";
    Rng r(seed);
    std::int64_t uid = 100;
    for (int label : labels) {
        for (int k = 0; k < shots; ++k) {
            s.items.push_back({patterned_tensor(spec, label, r, uid), uid});
            ++uid;
        }
    }
    return s;
}

// Brute-force reference: embed every shot, average per class, re-normalize,
// order by ascending label. Deliberately built from flat pair lists rather
// than the map the library uses.
std::vector<std::pair<int, std::vector<double>>> oracle_columns(const Params& p,
                                                                const NetSpec& spec,
                                                                const LabeledSet& support) {
    std::vector<std::pair<int, std::vector<double>>> sums;
    std::vector<int> counts;
    for (const auto& item : support.items) {
        const std::vector<double> f = forward_features(p, spec, item.tensor);
        std::size_t slot = sums.size();
        for (std::size_t i = 0; i < sums.size(); ++i) {
            if (sums[i].first == item.tensor.label) slot = i;
        }
        if (slot == sums.size()) {
            sums.push_back({item.tensor.label, std::vector<double>(f.size(), 0.0)});
            counts.push_back(0);
        }
        for (std::size_t i = 0; i < f.size(); ++i) sums[slot].second[i] += f[i];
        ++counts[slot];
    }
    std::sort(sums.begin(), sums.end(),
              [](const auto& a, const auto& b) { return a.first < b.first; });
    for (auto& [label, col] : sums) {
        double sq = 0.0;
        for (double x : col) sq += x * x;
        const double norm = std::sqrt(sq);
        for (double& x : col) x /= norm;
    }
    return sums;
}

std::vector<const double*> all_scalars(const Params& p) {
    std::vector<const double*> out;
    for (const auto& l : p.layers) {
        for (const double& x : l.w) out.push_back(&x);
        for (const double& x : l.b) out.push_back(&x);
    }
    for (const double& x : p.head) out.push_back(&x);
    return out;
}

bool params_bitwise_equal(const Params& a, const Params& b) {
    const auto pa = all_scalars(a);
    const auto pb = all_scalars(b);
    if (pa.size() != pb.size()) return false;
    for (std::size_t i = 0; i < pa.size(); ++i) {
        if (std::memcmp(pa[i], pb[i], sizeof(double)) != 0) return false;
    }
    return true;
}

}  // namespace

// ---------------------------------------------------------------------------
// Support embedding
// ---------------------------------------------------------------------------

TEST_CASE("support embedding matches a brute-force per-class mean") {
    const NetSpec spec = tiny_spec();
    const Params p = init_params(spec, 42);
    const LabeledSet support = make_support(spec, {7, 2, 11}, 3, 99);

    const FeatureMatrix fm = direct_matrix(p, spec, support);
    REQUIRE(fm.rows == 4);
    REQUIRE(fm.class_order == std::vector<int>{2, 7, 11});
    REQUIRE(fm.provenance == MatrixProvenance::direct);

    const auto oracle = oracle_columns(p, spec, support);
    REQUIRE(oracle.size() == 3);
    for (int c = 0; c < fm.cols(); ++c) {
        REQUIRE(oracle[static_cast<std::size_t>(c)].first == fm.class_order[static_cast<std::size_t>(c)]);
        double sq = 0.0;
        for (int i = 0; i < fm.rows; ++i) {
            REQUIRE_THAT(fm.column(c)[i],
                         WithinAbs(oracle[static_cast<std::size_t>(c)].second[static_cast<std::size_t>(i)], 1e-12));
            sq += fm.column(c)[i] * fm.column(c)[i];
        }
        REQUIRE_THAT(std::sqrt(sq), WithinAbs(1.0, 1e-12));  // columns re-normalized
    }
}

TEST_CASE("support embedding is invariant to item order") {
    const NetSpec spec = tiny_spec();
    const Params p = init_params(spec, 43);
    LabeledSet support = make_support(spec, {1, 5, 9}, 2, 100);
    const FeatureMatrix a = direct_matrix(p, spec, support);

    Rng r(7);
    r.shuffle(support.items);
    const FeatureMatrix b = direct_matrix(p, spec, support);
    REQUIRE(a.class_order == b.class_order);
    for (std::size_t i = 0; i < a.m.size(); ++i) {
        REQUIRE_THAT(a.m[i], WithinAbs(b.m[i], 1e-12));
    }
}

TEST_CASE("support embedding rejects an empty support set") {
    const NetSpec spec = tiny_spec();
    const Params p = init_params(spec, 44);
    REQUIRE_THROWS_AS(direct_matrix(p, spec, LabeledSet{}), ConfigError);
}

TEST_CASE("base/support class overlap is rejected") {
    const NetSpec spec = tiny_spec();
    const LabeledSet support = make_support(spec, {2, 8}, 1, 3);
    REQUIRE_NOTHROW(require_disjoint_from_base({1, 3, 5}, support));
    try {
        require_disjoint_from_base({1, 2, 3}, support);
        FAIL("expected overlap to be rejected");
    } catch (const ConfigError& e) {
        REQUIRE(std::string(e.what()).find("class 2") != std::string::npos);
    }
}

// ---------------------------------------------------------------------------
// Fine-tuning
// ---------------------------------------------------------------------------

TEST_CASE("zero-rate fine-tuning is an exact identity on the direct matrix") {
    const NetSpec spec = tiny_spec();
    const Params p = init_params(spec, 45);
    const LabeledSet support = make_support(spec, {3, 6}, 2, 101);
    const FeatureMatrix direct = direct_matrix(p, spec, support);

    FineTuneConfig cfg;
    cfg.epochs = 3;
    cfg.lr = 0.0;
    const FineTuneResult res = finetune_matrix(p, spec, support, cfg);

    // The head is seeded with the support embedding and never moves.
    REQUIRE(res.matrix.m == direct.m);
    REQUIRE(res.matrix.class_order == direct.class_order);
    REQUIRE(res.matrix.provenance == MatrixProvenance::fine_tuned);
    REQUIRE(params_bitwise_equal(res.extractor, p));
    REQUIRE_FALSE(res.extractor.has_head());
    REQUIRE(res.loss_per_epoch.size() == 3);
    REQUIRE_THAT(res.final_loss, WithinRel(res.initial_loss, 1e-14));
}

TEST_CASE("head-only fine-tuning moves the matrix but not the extractor") {
    const NetSpec spec = tiny_spec();
    const Params p = init_params(spec, 46);
    const LabeledSet support = make_support(spec, {4, 8, 12}, 3, 102);
    const FeatureMatrix direct = direct_matrix(p, spec, support);

    FineTuneConfig cfg;
    cfg.epochs = 25;
    cfg.lr = 5e-3;
    cfg.scope = FineTuneConfig::Scope::head_only;
    const FineTuneResult res = finetune_matrix(p, spec, support, cfg);

    REQUIRE(params_bitwise_equal(res.extractor, p));
    REQUIRE(res.matrix.m != direct.m);
    REQUIRE(res.final_loss < res.initial_loss);
    REQUIRE(res.initial_loss == res.loss_per_epoch.front());
}

TEST_CASE("all-layers fine-tuning adapts the extractor and descends") {
    const NetSpec spec = tiny_spec();
    const Params p = init_params(spec, 47);
    const LabeledSet support = make_support(spec, {5, 10}, 4, 103);

    FineTuneConfig cfg;
    cfg.epochs = 30;
    cfg.lr = 2e-3;
    const FineTuneResult res = finetune_matrix(p, spec, support, cfg);

    REQUIRE(res.final_loss < res.initial_loss);
    REQUIRE_FALSE(params_bitwise_equal(res.extractor, p));
    REQUIRE_FALSE(res.extractor.has_head());
    REQUIRE(res.loss_per_epoch.size() == 30);

    // The adapted pair still classifies its own support set.
    int correct = 0;
    for (const auto& item : support.items) {
        const QueryResult qr = classify_query(res.extractor, spec, res.matrix, item.tensor);
        correct += qr.predicted_label == item.tensor.label;
    }
    REQUIRE(correct == static_cast<int>(support.items.size()));
}

TEST_CASE("fine-tuning validates its inputs") {
    const NetSpec spec = tiny_spec();
    const Params p = init_params(spec, 48);
    const LabeledSet single = make_support(spec, {5}, 3, 104);
    REQUIRE_THROWS_AS(finetune_matrix(p, spec, single, FineTuneConfig{}), ConfigError);

    const LabeledSet ok = make_support(spec, {5, 6}, 1, 105);
    FineTuneConfig bad;
    bad.epochs = 0;
    REQUIRE_THROWS_AS(finetune_matrix(p, spec, ok, bad), ConfigError);
    bad = FineTuneConfig{};
    bad.lr = -1e-3;
    REQUIRE_THROWS_AS(finetune_matrix(p, spec, ok, bad), ConfigError);
}

// ---------------------------------------------------------------------------
// Cosine scoring
// ---------------------------------------------------------------------------

namespace {

FeatureMatrix hand_matrix(int rows, std::vector<int> order, std::vector<double> colmajor) {
    FeatureMatrix m;
    m.rows = rows;
    m.class_order = std::move(order);
    m.m = std::move(colmajor);
    return m;
}

}  // namespace

TEST_CASE("cosine scores match hand geometry") {
    const double s2 = 1.0 / std::sqrt(2.0);
    const FeatureMatrix m = hand_matrix(2, {4, 9}, {1.0, 0.0, s2, s2});

    const auto along_x = cosine_scores(m, {1.0, 0.0});
    REQUIRE_THAT(along_x[0], WithinAbs(1.0, 1e-12));
    REQUIRE_THAT(along_x[1], WithinAbs(s2, 1e-12));

    const auto along_y = cosine_scores(m, {0.0, 2.0});  // feature scale cancels
    REQUIRE_THAT(along_y[0], WithinAbs(0.0, 1e-12));
    REQUIRE_THAT(along_y[1], WithinAbs(s2, 1e-12));

    const QueryResult qx = classify_features(m, {1.0, 0.0});
    REQUIRE(qx.predicted_label == 4);
    REQUIRE(qx.probabilities == softmax(qx.scores));
    const QueryResult qy = classify_features(m, {0.0, 1.0});
    REQUIRE(qy.predicted_label == 9);
}

TEST_CASE("cosine scoring is invariant to column scale") {
    Rng r(808);
    for (int trial = 0; trial < 40; ++trial) {
        const int rows = 3 + static_cast<int>(r.below(5));
        const int cols = 2 + static_cast<int>(r.below(4));
        FeatureMatrix a;
        a.rows = rows;
        for (int c = 0; c < cols; ++c) a.class_order.push_back(c * 3 + 1);
        a.m.resize(static_cast<std::size_t>(rows) * cols);
        for (double& x : a.m) x = r.normal(0.0, 1.0);

        FeatureMatrix b = a;
        for (int c = 0; c < cols; ++c) {
            const double scale = 0.1 + 5.0 * r.uniform01();
            for (int i = 0; i < rows; ++i) b.column(c)[i] *= scale;
        }

        std::vector<double> f(static_cast<std::size_t>(rows));
        for (double& x : f) x = r.normal(0.0, 1.0);

        const auto sa = cosine_scores(a, f);
        const auto sb = cosine_scores(b, f);
        for (int c = 0; c < cols; ++c) {
            REQUIRE(sa[static_cast<std::size_t>(c)] >= -1.0 - 1e-12);
            REQUIRE(sa[static_cast<std::size_t>(c)] <= 1.0 + 1e-12);
            REQUIRE_THAT(sa[static_cast<std::size_t>(c)],
                         WithinAbs(sb[static_cast<std::size_t>(c)], 1e-12));
        }
    }
}

TEST_CASE("cosine scoring validates shapes and degenerate vectors") {
    const FeatureMatrix m = hand_matrix(2, {1, 2}, {1.0, 0.0, 0.0, 1.0});
    REQUIRE_THROWS_AS(cosine_scores(m, {1.0, 2.0, 3.0}), ConfigError);
    REQUIRE_THROWS_AS(cosine_scores(m, {0.0, 0.0}), NumericError);

    const FeatureMatrix zero_col = hand_matrix(2, {1, 2}, {0.0, 0.0, 0.0, 1.0});
    try {
        cosine_scores(zero_col, {1.0, 0.0});
        FAIL("expected the zero column to be rejected");
    } catch (const NumericError& e) {
        REQUIRE(std::string(e.what()).find("class 1") != std::string::npos);
    }
}

TEST_CASE("classification ties keep the lowest label") {
    // Two identical columns produce identical scores; the first (lower) label
    // must win.
    const FeatureMatrix m = hand_matrix(2, {4, 9}, {0.6, 0.8, 0.6, 0.8});
    const QueryResult q = classify_features(m, {0.6, 0.8});
    REQUIRE_THAT(q.scores[0], WithinAbs(1.0, 1e-12));
    REQUIRE_THAT(q.scores[1], WithinAbs(1.0, 1e-12));
    REQUIRE_THAT(q.probabilities[0], WithinAbs(0.5, 1e-12));
    REQUIRE(q.predicted_label == 4);
}

TEST_CASE("classify_query checks the extractor/matrix dimension agreement") {
    const NetSpec spec = tiny_spec();  // embedding_dim 4
    const Params p = init_params(spec, 49);
    const FeatureMatrix m = hand_matrix(3, {1, 2}, {1, 0, 0, 0, 1, 0});
    Rng r(1);
    const CsiTensor q = patterned_tensor(spec, 1, r, 0);
    REQUIRE_THROWS_AS(classify_query(p, spec, m, q), ConfigError);
}

// ---------------------------------------------------------------------------
// Fusion
// ---------------------------------------------------------------------------

TEST_CASE("probability fusion is the element-wise mean") {
    const auto fused = fuse_probabilities({{0.2, 0.8}, {0.6, 0.4}});
    REQUIRE_THAT(fused[0], WithinAbs(0.4, 1e-15));
    REQUIRE_THAT(fused[1], WithinAbs(0.6, 1e-15));

    // Permutation invariance and unanimity.
    const auto swapped = fuse_probabilities({{0.6, 0.4}, {0.2, 0.8}});
    REQUIRE_THAT(fused[0], WithinAbs(swapped[0], 1e-15));
    const auto solo = fuse_probabilities({{0.3, 0.7}});
    REQUIRE_THAT(solo[1], WithinAbs(0.7, 1e-15));
    const auto unanimous = fuse_probabilities({{0.1, 0.9}, {0.1, 0.9}, {0.1, 0.9}});
    REQUIRE_THAT(unanimous[0], WithinAbs(0.1, 1e-15));

    // A fused distribution still sums to one.
    Rng r(55);
    for (int trial = 0; trial < 30; ++trial) {
        std::vector<std::vector<double>> dists;
        for (int k = 0; k < 3; ++k) {
            std::vector<double> d(4);
            double sum = 0.0;
            for (double& x : d) {
                x = 0.01 + r.uniform01();
                sum += x;
            }
            for (double& x : d) x /= sum;
            dists.push_back(std::move(d));
        }
        const auto out = fuse_probabilities(dists);
        double total = 0.0;
        for (double x : out) total += x;
        REQUIRE_THAT(total, WithinAbs(1.0, 1e-12));
    }
}

TEST_CASE("probability fusion validates its inputs") {
    REQUIRE_THROWS_AS(fuse_probabilities({}), ConfigError);
    REQUIRE_THROWS_AS(fuse_probabilities({{}}), ConfigError);
    REQUIRE_THROWS_AS(fuse_probabilities({{0.5, 0.5}, {1.0}}), ConfigError);
    REQUIRE_THROWS_AS(fuse_probabilities({{0.5, 0.5}, {-0.1, 1.1}}), ConfigError);
    REQUIRE_THROWS_AS(fuse_probabilities({{0.5, 0.4}}), ConfigError);  // sums to 0.9
    try {
        fuse_probabilities({{0.5, 0.5}, {0.3, 0.3}});
        FAIL("expected the deficient distribution to be rejected");
    } catch (const ConfigError& e) {
        REQUIRE(std::string(e.what()).find("distribution 1") != std::string::npos);
    }
}

namespace {

ReceiverModel make_receiver(int id, const NetSpec& spec, std::uint64_t seed,
                            const std::vector<int>& labels) {
    ReceiverModel rm;
    rm.receiver_id = id;
    rm.spec = spec;
    rm.extractor = init_params(spec, seed);
    rm.matrix = direct_matrix(rm.extractor, spec, make_support(spec, labels, 2, seed + 1));
    return rm;
}

}  // namespace

TEST_CASE("collaborative classification fuses per-receiver distributions") {
    const NetSpec spec = tiny_spec();
    const std::vector<int> labels = {3, 6, 9};
    const std::vector<ReceiverModel> receivers = {make_receiver(0, spec, 201, labels),
                                                  make_receiver(1, spec, 202, labels)};

    Rng r(77);
    CsiTensor qa = patterned_tensor(spec, 6, r, 777);
    CsiTensor qb = patterned_tensor(spec, 6, r, 777);

    const FusionResult res = collab_classify(receivers, {qa, qb});
    REQUIRE(res.per_receiver.size() == 2);
    REQUIRE(res.per_receiver_predictions.size() == 2);
    REQUIRE(res.absent_receivers.empty());

    const QueryResult ra = classify_query(receivers[0].extractor, spec, receivers[0].matrix, qa);
    const QueryResult rb = classify_query(receivers[1].extractor, spec, receivers[1].matrix, qb);
    REQUIRE(res.per_receiver_predictions[0] == ra.predicted_label);
    REQUIRE(res.per_receiver_predictions[1] == rb.predicted_label);
    for (std::size_t c = 0; c < res.fused.size(); ++c) {
        REQUIRE_THAT(res.fused[c],
                     WithinAbs(0.5 * (ra.probabilities[c] + rb.probabilities[c]), 1e-15));
    }

    // The fused argmax maps back through the shared class order.
    std::size_t arg = 0;
    for (std::size_t c = 1; c < res.fused.size(); ++c) {
        if (res.fused[c] > res.fused[arg]) arg = c;
    }
    REQUIRE(res.predicted_label == receivers[0].matrix.class_order[arg]);
}

TEST_CASE("collaborative classification tolerates dropouts and checks alignment") {
    const NetSpec spec = tiny_spec();
    const std::vector<int> labels = {3, 6, 9};
    const std::vector<ReceiverModel> receivers = {make_receiver(0, spec, 203, labels),
                                                  make_receiver(5, spec, 204, labels)};

    Rng r(78);
    const CsiTensor q = patterned_tensor(spec, 9, r, 500);

    // Receiver 5 drops out: its id is recorded and the fused distribution is
    // just the surviving receiver's.
    const FusionResult res = collab_classify(receivers, {q, std::nullopt});
    REQUIRE(res.absent_receivers == std::vector<int>{5});
    REQUIRE(res.per_receiver.size() == 1);
    const QueryResult solo = classify_query(receivers[0].extractor, spec, receivers[0].matrix, q);
    REQUIRE(res.fused == solo.probabilities);
    REQUIRE(res.predicted_label == solo.predicted_label);

    REQUIRE_THROWS_AS(collab_classify(receivers, {std::nullopt, std::nullopt}), ConfigError);
    REQUIRE_THROWS_AS(collab_classify(receivers, {q}), ConfigError);
    REQUIRE_THROWS_AS(collab_classify({}, {}), ConfigError);

    // Mismatched class orders across receivers are rejected.
    std::vector<ReceiverModel> skewed = receivers;
    skewed[1].matrix.class_order = {3, 6, 10};
    REQUIRE_THROWS_AS(collab_classify(skewed, {q, q}), ConfigError);

    // Conflicting event ids are rejected; unset ids (-1) skip the check.
    CsiTensor other = q;
    other.event_id = 501;
    REQUIRE_THROWS_AS(collab_classify(receivers, {q, other}), ConfigError);
    CsiTensor unset = q;
    unset.event_id = -1;
    REQUIRE_NOTHROW(collab_classify(receivers, {q, unset}));
}

// ---------------------------------------------------------------------------
// Matrix wire format
// ---------------------------------------------------------------------------

namespace {

FeatureMatrix random_float_matrix(int rows, int cols, std::uint64_t seed,
                                  MatrixProvenance prov) {
    FeatureMatrix m;
    m.rows = rows;
    m.provenance = prov;
    Rng r(seed);
    for (int c = 0; c < cols; ++c) m.class_order.push_back(c * 2 + 3);
    m.m.resize(static_cast<std::size_t>(rows) * cols);
    // Values are float-representable so the f32 payload round-trips exactly.
    for (double& x : m.m) x = static_cast<double>(static_cast<float>(r.normal(0.0, 1.0)));
    return m;
}

}  // namespace

TEST_CASE("feature matrices round-trip through the wire format") {
    for (const MatrixProvenance prov : {MatrixProvenance::direct, MatrixProvenance::fine_tuned}) {
        const FeatureMatrix m = random_float_matrix(6, 4, 90 + static_cast<int>(prov), prov);
        const FeatureMatrix back = deserialize_matrix(serialize_matrix(m));
        REQUIRE(back.rows == m.rows);
        REQUIRE(back.class_order == m.class_order);
        REQUIRE(back.provenance == m.provenance);
        REQUIRE(back.m == m.m);  // exact: float-representable payload
    }
}

TEST_CASE("matrix files round-trip through disk") {
    const std::string path = "/tmp/fws_test_matrix.fwsx";
    const FeatureMatrix m = random_float_matrix(5, 3, 91, MatrixProvenance::direct);
    save_matrix(path, m);
    const FeatureMatrix back = load_matrix(path);
    REQUIRE(back.m == m.m);
    REQUIRE(back.class_order == m.class_order);
    std::remove(path.c_str());
}

TEST_CASE("matrix deserialization rejects corrupted payloads") {
    const FeatureMatrix m = random_float_matrix(4, 3, 92, MatrixProvenance::direct);
    const Bytes good = serialize_matrix(m);

    Bytes bad = good;
    bad[0] = 'X';
    REQUIRE_THROWS_AS(deserialize_matrix(bad), DataError);

    bad = good;
    bad[4] = 0xFF;  // version
    REQUIRE_THROWS_AS(deserialize_matrix(bad), DataError);

    bad = good;
    bad[6] = 7;  // provenance tag
    REQUIRE_THROWS_AS(deserialize_matrix(bad), DataError);

    bad = good;
    bad.pop_back();
    REQUIRE_THROWS_AS(deserialize_matrix(bad), DataError);

    bad = good;
    bad.push_back(0);
    try {
        deserialize_matrix(bad);
        FAIL("expected trailing bytes to be rejected");
    } catch (const DataError& e) {
        REQUIRE(std::string(e.what()).find("trailing") != std::string::npos);
    }

    // A payload byte pattern that decodes to NaN fails validation as a data
    // error, not a numeric one: the file is what's broken.
    bad = good;
    const std::size_t value_base = 4 + 2 + 1 + 4 + 4 + 4 * 3;
    bad[value_base + 0] = 0x00;
    bad[value_base + 1] = 0x00;
    bad[value_base + 2] = 0xC0;
    bad[value_base + 3] = 0x7F;  // f32 quiet NaN, little-endian
    REQUIRE_THROWS_AS(deserialize_matrix(bad), DataError);

    // Duplicate class labels are caught by the embedded validation.
    FeatureMatrix dup = m;
    dup.class_order[1] = dup.class_order[0];
    REQUIRE_THROWS_AS(serialize_matrix(dup), ConfigError);

    REQUIRE_THROWS_AS(load_matrix("/tmp/fws_no_such_matrix.fwsx"), DataError);
}

TEST_CASE("feature matrix validation catches structural damage") {
    FeatureMatrix m = random_float_matrix(3, 2, 93, MatrixProvenance::direct);
    REQUIRE_NOTHROW(m.validate());

    FeatureMatrix bad = m;
    bad.rows = 0;
    REQUIRE_THROWS_AS(bad.validate(), ConfigError);

    bad = m;
    bad.class_order.clear();
    REQUIRE_THROWS_AS(bad.validate(), ConfigError);

    bad = m;
    bad.m.pop_back();
    REQUIRE_THROWS_AS(bad.validate(), ConfigError);

    bad = m;
    bad.m[0] = std::numeric_limits<double>::quiet_NaN();
    REQUIRE_THROWS_AS(bad.validate(), NumericError);
}
