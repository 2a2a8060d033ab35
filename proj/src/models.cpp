#include "pkgscan/models.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include <json.hpp>

#include "pkgscan/util.hpp"

namespace pkgscan {

std::string_view learner_name(LearnerKind kind) {
    switch (kind) {
    case LearnerKind::dt: return "dt";
    case LearnerKind::rf: return "rf";
    case LearnerKind::gbt: return "gbt";
    }
    return "dt";
}

LearnerKind learner_from_name(std::string_view name) {
    if (name == "dt") return LearnerKind::dt;
    if (name == "rf") return LearnerKind::rf;
    if (name == "gbt" || name == "xgb") return LearnerKind::gbt;
    throw std::invalid_argument("unknown learner: " + std::string(name));
}

std::string_view criterion_name(SplitCriterion c) {
    switch (c) {
    case SplitCriterion::gini: return "gini";
    case SplitCriterion::entropy: return "entropy";
    case SplitCriterion::log_loss: return "log_loss";
    }
    return "gini";
}

SplitCriterion criterion_from_name(std::string_view name) {
    if (name == "gini") return SplitCriterion::gini;
    if (name == "entropy") return SplitCriterion::entropy;
    if (name == "log_loss") return SplitCriterion::log_loss;
    throw std::invalid_argument("unknown split criterion: " + std::string(name));
}

void Hyperparams::validate(LearnerKind kind) const {
    const auto fail = [](const std::string& msg) { throw std::invalid_argument(msg); };
    if (max_depth < 1 || max_depth > 32) fail("max_depth must be in [1, 32]");
    if (kind != LearnerKind::gbt) {
        if (!(max_features > 0.0 && max_features <= 1.0)) {
            fail("max_features must be in (0, 1]");
        }
        if (min_samples_leaf < 1) fail("min_samples_leaf must be >= 1");
        if (min_samples_split < 2) fail("min_samples_split must be >= 2");
    }
    if (kind != LearnerKind::dt) {
        if (n_estimators < 1 || n_estimators > 10000) {
            fail("n_estimators must be in [1, 10000]");
        }
    }
    if (kind == LearnerKind::rf) {
        if (!(max_samples > 0.0 && max_samples <= 1.0)) {
            fail("max_samples must be in (0, 1]");
        }
    }
    if (kind == LearnerKind::gbt) {
        if (!(colsample_bytree > 0.0 && colsample_bytree <= 1.0)) {
            fail("colsample_bytree must be in (0, 1]");
        }
        if (!(learning_rate > 0.0 && learning_rate <= 1.0)) {
            fail("learning_rate must be in (0, 1]");
        }
        if (gamma < 0.0) fail("gamma must be >= 0");
        if (min_child_weight < 0.0) fail("min_child_weight must be >= 0");
        if (l2_lambda < 0.0) fail("l2_lambda must be >= 0");
    }
}

DataMatrix DataMatrix::from_vectors(const std::vector<FeatureVector>& vectors) {
    DataMatrix m;
    if (vectors.empty()) return m;
    m.rows = vectors.size();
    m.cols = vectors.front().values.size();
    m.storage.reserve(m.rows * m.cols);
    for (const FeatureVector& v : vectors) {
        if (v.values.size() != m.cols) {
            throw std::invalid_argument("feature vectors have inconsistent lengths");
        }
        m.storage.insert(m.storage.end(), v.values.begin(), v.values.end());
    }
    return m;
}

double Tree::predict(std::span<const double> x) const {
    std::size_t node = 0;
    while (nodes[node].feature_index >= 0) {
        const TreeNode& n = nodes[node];
        const double v = x[static_cast<std::size_t>(n.feature_index)];
        node = static_cast<std::size_t>(v <= n.threshold ? n.left : n.right);
    }
    return nodes[node].leaf_value;
}

double sigmoid(double z) {
    if (z >= 0.0) {
        return 1.0 / (1.0 + std::exp(-z));
    }
    const double e = std::exp(z);
    return e / (1.0 + e);
}

namespace {

double node_impurity(std::size_t pos, std::size_t n, SplitCriterion criterion) {
    if (n == 0) return 0.0;
    const double p = static_cast<double>(pos) / static_cast<double>(n);
    const double q = 1.0 - p;
    switch (criterion) {
    case SplitCriterion::gini:
        return 2.0 * p * q;
    case SplitCriterion::entropy: {
        double h = 0.0;
        if (p > 0.0) h -= p * std::log2(p);
        if (q > 0.0) h -= q * std::log2(q);
        return h;
    }
    case SplitCriterion::log_loss: {
        // cross-entropy of the node's own class probabilities, natural log
        double h = 0.0;
        if (p > 0.0) h -= p * std::log(p);
        if (q > 0.0) h -= q * std::log(q);
        return h;
    }
    }
    return 0.0;
}

std::size_t feature_subset_size(double fraction, std::size_t n_features) {
    auto k = static_cast<std::size_t>(std::llround(fraction * static_cast<double>(n_features)));
    return std::clamp<std::size_t>(k, 1, n_features);
}

std::vector<std::size_t> sample_features(std::size_t n_features, std::size_t k, Rng& rng) {
    std::vector<std::size_t> all(n_features);
    for (std::size_t i = 0; i < n_features; ++i) all[i] = i;
    if (k >= n_features) return all;
    for (std::size_t i = 0; i < k; ++i) {
        std::size_t j = i + static_cast<std::size_t>(rng.next_below(n_features - i));
        std::swap(all[i], all[j]);
    }
    all.resize(k);
    return all;
}

struct CartGrower {
    const DataMatrix& X;
    const std::vector<int>& y;
    const Hyperparams& hp;
    Rng& rng;
    std::size_t k_features;
    double n_root;
    Tree tree;

    int grow(const std::vector<std::size_t>& indices, int depth) {
        const std::size_t n = indices.size();
        std::size_t pos = 0;
        for (std::size_t i : indices) pos += static_cast<std::size_t>(y[i]);

        const int node_id = static_cast<int>(tree.nodes.size());
        tree.nodes.emplace_back();
        tree.nodes[static_cast<std::size_t>(node_id)].leaf_value =
            static_cast<double>(pos) / static_cast<double>(n);

        const bool can_split = depth < hp.max_depth &&
                               n >= static_cast<std::size_t>(hp.min_samples_split) &&
                               pos != 0 && pos != n;
        if (!can_split) return node_id;

        const double imp = node_impurity(pos, n, hp.criterion);

        bool found = false;
        double best_imp = 0.0;
        std::size_t best_feature = 0;
        double best_threshold = 0.0;

        std::vector<std::pair<double, int>> sorted(n);
        for (std::size_t f : sample_features(X.cols, k_features, rng)) {
            for (std::size_t i = 0; i < n; ++i) {
                sorted[i] = {X.at(indices[i], f), y[indices[i]]};
            }
            std::sort(sorted.begin(), sorted.end());
            std::size_t left_pos = 0;
            for (std::size_t i = 0; i + 1 < n; ++i) {
                left_pos += static_cast<std::size_t>(sorted[i].second);
                if (sorted[i].first == sorted[i + 1].first) continue;
                const std::size_t nl = i + 1;
                const std::size_t nr = n - nl;
                if (nl < static_cast<std::size_t>(hp.min_samples_leaf) ||
                    nr < static_cast<std::size_t>(hp.min_samples_leaf)) {
                    continue;
                }
                const double threshold = 0.5 * (sorted[i].first + sorted[i + 1].first);
                const double weighted =
                    (static_cast<double>(nl) * node_impurity(left_pos, nl, hp.criterion) +
                     static_cast<double>(nr) *
                         node_impurity(pos - left_pos, nr, hp.criterion)) /
                    static_cast<double>(n);
                // tie rule: lowest impurity, then lowest feature, then threshold
                const bool better =
                    !found || weighted < best_imp ||
                    (weighted == best_imp &&
                     (f < best_feature || (f == best_feature && threshold < best_threshold)));
                if (better) {
                    found = true;
                    best_imp = weighted;
                    best_feature = f;
                    best_threshold = threshold;
                }
            }
        }
        if (!found) return node_id;

        std::vector<std::size_t> left_idx, right_idx;
        left_idx.reserve(n);
        right_idx.reserve(n);
        for (std::size_t i : indices) {
            (X.at(i, best_feature) <= best_threshold ? left_idx : right_idx).push_back(i);
        }

        {
            TreeNode& node = tree.nodes[static_cast<std::size_t>(node_id)];
            node.feature_index = static_cast<int>(best_feature);
            node.threshold = best_threshold;
            node.gain = (static_cast<double>(n) / n_root) * (imp - best_imp);
        }
        const int left = grow(left_idx, depth + 1);
        const int right = grow(right_idx, depth + 1);
        tree.nodes[static_cast<std::size_t>(node_id)].left = left;
        tree.nodes[static_cast<std::size_t>(node_id)].right = right;
        return node_id;
    }
};

Tree grow_cart_tree(const DataMatrix& X, const std::vector<int>& y,
                    const std::vector<std::size_t>& indices, const Hyperparams& hp,
                    Rng& rng) {
    CartGrower grower{X, y, hp, rng, feature_subset_size(hp.max_features, X.cols),
                      static_cast<double>(indices.size()), Tree{}};
    grower.grow(indices, 0);
    return std::move(grower.tree);
}

void check_training_input(const DataMatrix& X, const std::vector<int>& y) {
    if (X.rows != y.size()) {
        throw std::invalid_argument("label count does not match sample count");
    }
    if (X.rows < 2) {
        throw std::invalid_argument("training requires at least two samples");
    }
    for (int label : y) {
        if (label != 0 && label != 1) {
            throw std::invalid_argument("labels must be 0 or 1");
        }
    }
}

bool single_class(const std::vector<int>& y) {
    for (int label : y) {
        if (label != y.front()) return false;
    }
    return true;
}

TreeEnsembleModel make_base_model(LearnerKind kind, const Hyperparams& hp,
                                  const FeatureSchema& schema, std::size_t feature_count) {
    TreeEnsembleModel model;
    model.kind = kind;
    model.hp = hp;
    model.schema_version = schema.version;
    model.schema_hash = schema.content_hash();
    model.feature_count = feature_count;
    return model;
}

struct GbtGrower {
    const DataMatrix& X;
    const std::vector<double>& grad;
    const std::vector<double>& hess;
    const Hyperparams& hp;
    const std::vector<std::size_t>& features;  // per-tree column sample
    Tree tree;

    int grow(const std::vector<std::size_t>& indices, int depth) {
        double G = 0.0, H = 0.0;
        for (std::size_t i : indices) {
            G += grad[i];
            H += hess[i];
        }
        const int node_id = static_cast<int>(tree.nodes.size());
        tree.nodes.emplace_back();
        tree.nodes[static_cast<std::size_t>(node_id)].leaf_value =
            hp.learning_rate * (-G / (H + hp.l2_lambda));

        if (depth >= hp.max_depth || indices.size() < 2) return node_id;

        const double parent_score = G * G / (H + hp.l2_lambda);

        bool found = false;
        double best_gain = 0.0;
        std::size_t best_feature = 0;
        double best_threshold = 0.0;

        const std::size_t n = indices.size();
        std::vector<std::pair<double, std::size_t>> sorted(n);
        for (std::size_t f : features) {
            for (std::size_t i = 0; i < n; ++i) {
                sorted[i] = {X.at(indices[i], f), indices[i]};
            }
            std::sort(sorted.begin(), sorted.end());
            double GL = 0.0, HL = 0.0;
            for (std::size_t i = 0; i + 1 < n; ++i) {
                GL += grad[sorted[i].second];
                HL += hess[sorted[i].second];
                if (sorted[i].first == sorted[i + 1].first) continue;
                const double GR = G - GL;
                const double HR = H - HL;
                if (HL < hp.min_child_weight || HR < hp.min_child_weight) continue;
                const double gain =
                    0.5 * (GL * GL / (HL + hp.l2_lambda) + GR * GR / (HR + hp.l2_lambda) -
                           parent_score) -
                    hp.gamma;
                if (gain <= 0.0) continue;
                const double threshold = 0.5 * (sorted[i].first + sorted[i + 1].first);
                const bool better =
                    !found || gain > best_gain ||
                    (gain == best_gain &&
                     (f < best_feature || (f == best_feature && threshold < best_threshold)));
                if (better) {
                    found = true;
                    best_gain = gain;
                    best_feature = f;
                    best_threshold = threshold;
                }
            }
        }
        if (!found) return node_id;

        std::vector<std::size_t> left_idx, right_idx;
        left_idx.reserve(n);
        right_idx.reserve(n);
        for (std::size_t i : indices) {
            (X.at(i, best_feature) <= best_threshold ? left_idx : right_idx).push_back(i);
        }
        {
            TreeNode& node = tree.nodes[static_cast<std::size_t>(node_id)];
            node.feature_index = static_cast<int>(best_feature);
            node.threshold = best_threshold;
            node.gain = best_gain;
        }
        const int left = grow(left_idx, depth + 1);
        const int right = grow(right_idx, depth + 1);
        tree.nodes[static_cast<std::size_t>(node_id)].left = left;
        tree.nodes[static_cast<std::size_t>(node_id)].right = right;
        return node_id;
    }
};

}  // namespace

TreeEnsembleModel train_dt(const DataMatrix& X, const std::vector<int>& y,
                           const Hyperparams& hp, std::uint64_t seed,
                           const FeatureSchema& schema) {
    hp.validate(LearnerKind::dt);
    check_training_input(X, y);
    TreeEnsembleModel model = make_base_model(LearnerKind::dt, hp, schema, X.cols);
    if (single_class(y)) {
        model.degenerate = true;
        Tree leaf;
        leaf.nodes.push_back(TreeNode{-1, 0.0, -1, -1, static_cast<double>(y.front()), 0.0});
        model.trees.push_back(std::move(leaf));
        return model;
    }
    Rng rng(seed);
    std::vector<std::size_t> indices(X.rows);
    for (std::size_t i = 0; i < X.rows; ++i) indices[i] = i;
    model.trees.push_back(grow_cart_tree(X, y, indices, hp, rng));
    return model;
}

TreeEnsembleModel train_rf(const DataMatrix& X, const std::vector<int>& y,
                           const Hyperparams& hp, std::uint64_t seed,
                           const FeatureSchema& schema) {
    hp.validate(LearnerKind::rf);
    check_training_input(X, y);
    TreeEnsembleModel model = make_base_model(LearnerKind::rf, hp, schema, X.cols);
    if (single_class(y)) {
        model.degenerate = true;
        Tree leaf;
        leaf.nodes.push_back(TreeNode{-1, 0.0, -1, -1, static_cast<double>(y.front()), 0.0});
        model.trees.push_back(std::move(leaf));
        return model;
    }
    const std::size_t n = X.rows;
    const auto sample_size = std::clamp<std::size_t>(
        static_cast<std::size_t>(std::llround(hp.max_samples * static_cast<double>(n))), 1, n);
    for (int t = 0; t < hp.n_estimators; ++t) {
        Rng rng(seed + static_cast<std::uint64_t>(t));
        std::vector<std::size_t> indices;
        indices.reserve(sample_size);
        if (hp.bootstrap) {
            for (std::size_t i = 0; i < sample_size; ++i) {
                indices.push_back(static_cast<std::size_t>(rng.next_below(n)));
            }
        } else if (sample_size == n) {
            for (std::size_t i = 0; i < n; ++i) indices.push_back(i);
        } else {
            indices = sample_features(n, sample_size, rng);  // without replacement
        }
        model.trees.push_back(grow_cart_tree(X, y, indices, hp, rng));
    }
    return model;
}

TreeEnsembleModel train_gbt(const DataMatrix& X, const std::vector<int>& y,
                            const Hyperparams& hp, std::uint64_t seed,
                            const FeatureSchema& schema) {
    hp.validate(LearnerKind::gbt);
    check_training_input(X, y);
    TreeEnsembleModel model = make_base_model(LearnerKind::gbt, hp, schema, X.cols);
    model.base_raw_score = 0.0;  // logit(0.5)
    if (single_class(y)) {
        model.degenerate = true;
        const double p = std::clamp(static_cast<double>(y.front()), 1e-12, 1.0 - 1e-12);
        model.base_raw_score = std::log(p / (1.0 - p));
        return model;
    }

    const std::size_t n = X.rows;
    std::vector<double> raw(n, model.base_raw_score);
    std::vector<double> grad(n), hess(n);
    std::vector<std::size_t> indices(n);
    for (std::size_t i = 0; i < n; ++i) indices[i] = i;
    const std::size_t k = feature_subset_size(hp.colsample_bytree, X.cols);

    for (int round = 0; round < hp.n_estimators; ++round) {
        Rng rng(mix_seed(seed, static_cast<std::uint64_t>(round)));
        for (std::size_t i = 0; i < n; ++i) {
            const double p = sigmoid(raw[i]);
            grad[i] = p - static_cast<double>(y[i]);
            hess[i] = p * (1.0 - p);
        }
        GbtGrower grower{X, grad, hess, hp, sample_features(X.cols, k, rng), Tree{}};
        grower.grow(indices, 0);
        Tree tree = std::move(grower.tree);
        for (std::size_t i = 0; i < n; ++i) {
            raw[i] += tree.predict(X.row(i));
        }
        model.trees.push_back(std::move(tree));
    }
    return model;
}

double predict_probability(const TreeEnsembleModel& model, std::span<const double> x) {
    switch (model.kind) {
    case LearnerKind::dt:
        return model.trees.front().predict(x);
    case LearnerKind::rf: {
        double sum = 0.0;
        for (const Tree& tree : model.trees) sum += tree.predict(x);
        return sum / static_cast<double>(model.trees.size());
    }
    case LearnerKind::gbt: {
        double raw = model.base_raw_score;
        for (const Tree& tree : model.trees) raw += tree.predict(x);
        return sigmoid(raw);
    }
    }
    return 0.0;
}

Prediction predict(const TreeEnsembleModel& model, const FeatureVector& x) {
    if (x.schema_version != model.schema_version) {
        throw ModelError(ModelErrc::schema_mismatch,
                         "feature vector schema " + x.schema_version +
                             " does not match model schema " + model.schema_version);
    }
    if (x.values.size() != model.feature_count) {
        throw ModelError(ModelErrc::schema_mismatch, "feature vector length mismatch");
    }
    Prediction pred;
    pred.probability = predict_probability(model, x.values);
    pred.malicious = pred.probability > model.decision_threshold;
    return pred;
}

std::map<std::string, double> feature_importance(const TreeEnsembleModel& model,
                                                 const FeatureSchema& schema) {
    std::map<std::string, double> importance;
    if (model.degenerate) return importance;
    std::vector<double> totals(model.feature_count, 0.0);
    double sum = 0.0;
    for (const Tree& tree : model.trees) {
        for (const TreeNode& node : tree.nodes) {
            if (node.feature_index < 0) continue;
            totals[static_cast<std::size_t>(node.feature_index)] += node.gain;
            sum += node.gain;
        }
    }
    if (sum <= 0.0) return importance;
    for (std::size_t f = 0; f < totals.size(); ++f) {
        if (totals[f] > 0.0) {
            importance[schema.names[f]] = totals[f] / sum;
        }
    }
    return importance;
}

nlohmann::json hyperparams_to_json(const Hyperparams& hp) {
    nlohmann::json j;
    j["max_depth"] = hp.max_depth;
    j["max_features"] = hp.max_features;
    j["criterion"] = std::string(criterion_name(hp.criterion));
    j["min_samples_leaf"] = hp.min_samples_leaf;
    j["min_samples_split"] = hp.min_samples_split;
    j["n_estimators"] = hp.n_estimators;
    j["max_samples"] = hp.max_samples;
    j["bootstrap"] = hp.bootstrap;
    j["colsample_bytree"] = hp.colsample_bytree;
    j["learning_rate"] = hp.learning_rate;
    j["gamma"] = hp.gamma;
    j["min_child_weight"] = hp.min_child_weight;
    j["l2_lambda"] = hp.l2_lambda;
    return j;
}

Hyperparams hyperparams_from_json(const nlohmann::json& j) {
    static const std::vector<std::string> known = {
        "max_depth",      "max_features", "criterion",        "min_samples_leaf",
        "min_samples_split", "n_estimators", "max_samples",   "bootstrap",
        "colsample_bytree",  "learning_rate", "gamma",        "min_child_weight",
        "l2_lambda"};
    for (const auto& [key, _] : j.items()) {
        if (std::find(known.begin(), known.end(), key) == known.end()) {
            throw std::invalid_argument("unknown hyperparameter: " + key);
        }
    }
    Hyperparams hp;
    hp.max_depth = j.value("max_depth", hp.max_depth);
    hp.max_features = j.value("max_features", hp.max_features);
    if (j.contains("criterion")) {
        hp.criterion = criterion_from_name(j.at("criterion").get<std::string>());
    }
    hp.min_samples_leaf = j.value("min_samples_leaf", hp.min_samples_leaf);
    hp.min_samples_split = j.value("min_samples_split", hp.min_samples_split);
    hp.n_estimators = j.value("n_estimators", hp.n_estimators);
    hp.max_samples = j.value("max_samples", hp.max_samples);
    hp.bootstrap = j.value("bootstrap", hp.bootstrap);
    hp.colsample_bytree = j.value("colsample_bytree", hp.colsample_bytree);
    hp.learning_rate = j.value("learning_rate", hp.learning_rate);
    hp.gamma = j.value("gamma", hp.gamma);
    hp.min_child_weight = j.value("min_child_weight", hp.min_child_weight);
    hp.l2_lambda = j.value("l2_lambda", hp.l2_lambda);
    return hp;
}

namespace {

constexpr int kModelFormatVersion = 1;

}  // namespace

void save_model(const TreeEnsembleModel& model, const std::filesystem::path& path) {
    nlohmann::json doc;
    doc["format_version"] = kModelFormatVersion;
    doc["kind"] = std::string(learner_name(model.kind));
    doc["schema_version"] = model.schema_version;
    doc["schema_hash"] = model.schema_hash;
    doc["feature_count"] = model.feature_count;
    doc["decision_threshold"] = model.decision_threshold;
    doc["base_raw_score"] = model.base_raw_score;
    doc["degenerate"] = model.degenerate;
    doc["hyperparams"] = hyperparams_to_json(model.hp);
    nlohmann::json trees = nlohmann::json::array();
    for (const Tree& tree : model.trees) {
        nlohmann::json t;
        std::vector<int> feature, left, right;
        std::vector<double> threshold, leaf_value, gain;
        for (const TreeNode& node : tree.nodes) {
            feature.push_back(node.feature_index);
            threshold.push_back(node.threshold);
            left.push_back(node.left);
            right.push_back(node.right);
            leaf_value.push_back(node.leaf_value);
            gain.push_back(node.gain);
        }
        t["feature_index"] = feature;
        t["threshold"] = threshold;
        t["left"] = left;
        t["right"] = right;
        t["leaf_value"] = leaf_value;
        t["gain"] = gain;
        trees.push_back(std::move(t));
    }
    doc["trees"] = std::move(trees);

    std::ofstream out(path);
    if (!out) {
        throw std::runtime_error("cannot write model file: " + path.string());
    }
    out << doc.dump(1) << "\n";
}

TreeEnsembleModel load_model(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) {
        throw ModelError(ModelErrc::malformed_model_file,
                         "cannot open model file: " + path.string());
    }
    nlohmann::json doc = nlohmann::json::parse(in, nullptr, false);
    if (doc.is_discarded()) {
        throw ModelError(ModelErrc::malformed_model_file,
                         "model file is not valid JSON: " + path.string());
    }
    try {
        const int version = doc.at("format_version").get<int>();
        if (version != kModelFormatVersion) {
            throw ModelError(ModelErrc::version_mismatch,
                             "unsupported model format version " + std::to_string(version));
        }
        TreeEnsembleModel model;
        model.kind = learner_from_name(doc.at("kind").get<std::string>());
        model.schema_version = doc.at("schema_version").get<std::string>();
        model.schema_hash = doc.at("schema_hash").get<std::string>();
        model.feature_count = doc.at("feature_count").get<std::size_t>();
        model.decision_threshold = doc.at("decision_threshold").get<double>();
        model.base_raw_score = doc.at("base_raw_score").get<double>();
        model.degenerate = doc.at("degenerate").get<bool>();
        model.hp = hyperparams_from_json(doc.at("hyperparams"));
        for (const nlohmann::json& t : doc.at("trees")) {
            const auto feature = t.at("feature_index").get<std::vector<int>>();
            const auto threshold = t.at("threshold").get<std::vector<double>>();
            const auto left = t.at("left").get<std::vector<int>>();
            const auto right = t.at("right").get<std::vector<int>>();
            const auto leaf_value = t.at("leaf_value").get<std::vector<double>>();
            const auto gain = t.at("gain").get<std::vector<double>>();
            const std::size_t count = feature.size();
            if (threshold.size() != count || left.size() != count || right.size() != count ||
                leaf_value.size() != count || gain.size() != count) {
                throw ModelError(ModelErrc::malformed_model_file,
                                 "tree arrays have inconsistent lengths");
            }
            Tree tree;
            tree.nodes.reserve(count);
            for (std::size_t i = 0; i < count; ++i) {
                if (feature[i] >= static_cast<int>(model.feature_count) ||
                    left[i] >= static_cast<int>(count) || right[i] >= static_cast<int>(count)) {
                    throw ModelError(ModelErrc::malformed_model_file,
                                     "tree node references out of range");
                }
                tree.nodes.push_back(TreeNode{feature[i], threshold[i], left[i], right[i],
                                              leaf_value[i], gain[i]});
            }
            model.trees.push_back(std::move(tree));
        }
        if (model.trees.empty() && model.kind != LearnerKind::gbt) {
            throw ModelError(ModelErrc::malformed_model_file, "model has no trees");
        }
        return model;
    } catch (const nlohmann::json::exception& e) {
        throw ModelError(ModelErrc::malformed_model_file,
                         std::string("model file field error: ") + e.what());
    }
}

TreeEnsembleModel load_model(const std::filesystem::path& path,
                             const FeatureSchema& expected_schema) {
    TreeEnsembleModel model = load_model(path);
    if (model.schema_version != expected_schema.version) {
        throw ModelError(ModelErrc::schema_mismatch,
                         "model schema version " + model.schema_version +
                             " does not match schema " + expected_schema.version);
    }
    if (model.schema_hash != expected_schema.content_hash()) {
        throw ModelError(ModelErrc::schema_hash_mismatch,
                         "model schema hash does not match the schema file");
    }
    return model;
}

}  // namespace pkgscan
