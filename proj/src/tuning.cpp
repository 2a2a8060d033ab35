#include "pkgscan/tuning.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <ostream>

#include "pkgscan/util.hpp"

namespace pkgscan {

std::vector<std::vector<std::size_t>> stratified_folds(const std::vector<int>& labels, int k,
                                                       std::uint64_t seed) {
    if (k < 2) {
        throw std::invalid_argument("k must be >= 2");
    }
    std::vector<std::size_t> pos, neg;
    for (std::size_t i = 0; i < labels.size(); ++i) {
        (labels[i] == 1 ? pos : neg).push_back(i);
    }
    if (pos.size() < static_cast<std::size_t>(k)) {
        throw TuningError(TuningErrc::too_few_positives,
                          "positive class has " + std::to_string(pos.size()) +
                              " members, need at least " + std::to_string(k));
    }
    if (neg.size() < static_cast<std::size_t>(k)) {
        throw TuningError(TuningErrc::too_few_positives,
                          "negative class has " + std::to_string(neg.size()) +
                              " members, need at least " + std::to_string(k));
    }
    Rng rng(seed);
    rng.shuffle(pos);
    rng.shuffle(neg);

    std::vector<std::vector<std::size_t>> folds(static_cast<std::size_t>(k));
    for (std::size_t j = 0; j < pos.size(); ++j) {
        folds[j % static_cast<std::size_t>(k)].push_back(pos[j]);
    }
    // negatives continue the round-robin where positives stopped, keeping
    // total fold sizes within one of each other
    const std::size_t offset = pos.size() % static_cast<std::size_t>(k);
    for (std::size_t j = 0; j < neg.size(); ++j) {
        folds[(offset + j) % static_cast<std::size_t>(k)].push_back(neg[j]);
    }
    for (auto& fold : folds) std::sort(fold.begin(), fold.end());
    return folds;
}

Metrics compute_metrics(const std::vector<int>& y_true, const std::vector<int>& y_pred) {
    if (y_true.size() != y_pred.size()) {
        throw TuningError(TuningErrc::length_mismatch,
                          "label and prediction lengths differ");
    }
    std::size_t tp = 0, fp = 0, fn = 0, tn = 0;
    for (std::size_t i = 0; i < y_true.size(); ++i) {
        if (y_true[i] == 1 && y_pred[i] == 1) ++tp;
        else if (y_true[i] == 0 && y_pred[i] == 1) ++fp;
        else if (y_true[i] == 1 && y_pred[i] == 0) ++fn;
        else ++tn;
    }
    Metrics m;
    m.precision = (tp + fp) > 0 ? static_cast<double>(tp) / static_cast<double>(tp + fp) : 0.0;
    m.recall = (tp + fn) > 0 ? static_cast<double>(tp) / static_cast<double>(tp + fn) : 0.0;
    m.f1 = (m.precision + m.recall) > 0.0
               ? 2.0 * m.precision * m.recall / (m.precision + m.recall)
               : 0.0;
    m.accuracy = y_true.empty() ? 0.0
                                : static_cast<double>(tp + tn) /
                                      static_cast<double>(y_true.size());
    return m;
}

namespace {

MeanStd mean_std(const std::vector<double>& values) {
    MeanStd out;
    if (values.empty()) return out;
    double sum = 0.0;
    for (double v : values) sum += v;
    out.mean = sum / static_cast<double>(values.size());
    double sq = 0.0;
    for (double v : values) sq += (v - out.mean) * (v - out.mean);
    out.stddev = std::sqrt(sq / static_cast<double>(values.size()));
    return out;
}

}  // namespace

MetricsReport aggregate_metrics(const std::vector<Metrics>& fold_metrics) {
    MetricsReport report;
    report.evaluations = fold_metrics.size();
    std::vector<double> p, r, f, a;
    for (const Metrics& m : fold_metrics) {
        p.push_back(m.precision);
        r.push_back(m.recall);
        f.push_back(m.f1);
        a.push_back(m.accuracy);
    }
    report.precision = mean_std(p);
    report.recall = mean_std(r);
    report.f1 = mean_std(f);
    report.accuracy = mean_std(a);
    return report;
}

namespace {

TreeEnsembleModel train_kind(LearnerKind kind, const DataMatrix& X, const std::vector<int>& y,
                             const Hyperparams& hp, std::uint64_t seed,
                             const FeatureSchema& schema) {
    switch (kind) {
    case LearnerKind::dt: return train_dt(X, y, hp, seed, schema);
    case LearnerKind::rf: return train_rf(X, y, hp, seed, schema);
    case LearnerKind::gbt: return train_gbt(X, y, hp, seed, schema);
    }
    throw std::logic_error("unreachable learner kind");
}

}  // namespace

CVResult cross_validate(const Dataset& ds, LearnerKind kind, const Hyperparams& hp,
                        const CVConfig& cv) {
    const std::size_t n = ds.samples.size();
    std::vector<int> labels(n);
    DataMatrix X;
    X.rows = n;
    X.cols = n > 0 ? ds.samples.front().feature_vector.values.size() : 0;
    X.storage.reserve(X.rows * X.cols);
    for (std::size_t i = 0; i < n; ++i) {
        labels[i] = ds.samples[i].label == Label::malicious ? 1 : 0;
        const auto& values = ds.samples[i].feature_vector.values;
        if (values.size() != X.cols) {
            throw DatasetError(DatasetErrc::schema_mismatch,
                               "inconsistent feature vector lengths in dataset");
        }
        X.storage.insert(X.storage.end(), values.begin(), values.end());
    }

    // The schema only stamps version/hash onto the transient fold models;
    // an anonymous layout of matching width keeps cross_validate usable on
    // plain CSV data of any column count.
    FeatureSchema schema;
    schema.version = ds.schema_version.empty() ? "anonymous" : ds.schema_version;
    schema.names.resize(X.cols);
    for (std::size_t i = 0; i < X.cols; ++i) schema.names[i] = "f" + std::to_string(i);

    std::vector<Ecosystem> present;
    for (const LabeledSample& s : ds.samples) {
        if (std::find(present.begin(), present.end(), s.ecosystem) == present.end()) {
            present.push_back(s.ecosystem);
        }
    }

    std::vector<Metrics> overall;
    std::map<Ecosystem, std::vector<Metrics>> per_eco;
    for (int r = 1; r <= cv.repeats; ++r) {
        const auto folds = stratified_folds(labels, cv.k, cv.seed + static_cast<std::uint64_t>(r));
        for (std::size_t fold_i = 0; fold_i < folds.size(); ++fold_i) {
            const std::vector<std::size_t>& test_idx = folds[fold_i];
            std::vector<char> in_test(n, 0);
            for (std::size_t i : test_idx) in_test[i] = 1;

            DataMatrix train;
            train.cols = X.cols;
            std::vector<int> y_train;
            for (std::size_t i = 0; i < n; ++i) {
                if (in_test[i]) continue;
                auto row = X.row(i);
                train.storage.insert(train.storage.end(), row.begin(), row.end());
                y_train.push_back(labels[i]);
                ++train.rows;
            }

            const std::uint64_t train_seed =
                mix_seed(mix_seed(cv.seed, static_cast<std::uint64_t>(r)),
                         static_cast<std::uint64_t>(fold_i));
            const TreeEnsembleModel model = train_kind(kind, train, y_train, hp, train_seed,
                                                       schema);

            std::vector<int> y_true, y_pred;
            std::map<Ecosystem, std::pair<std::vector<int>, std::vector<int>>> eco_split;
            for (std::size_t i : test_idx) {
                const double prob = predict_probability(model, X.row(i));
                const int pred = prob > model.decision_threshold ? 1 : 0;
                y_true.push_back(labels[i]);
                y_pred.push_back(pred);
                auto& [et, ep] = eco_split[ds.samples[i].ecosystem];
                et.push_back(labels[i]);
                ep.push_back(pred);
            }
            overall.push_back(compute_metrics(y_true, y_pred));
            for (Ecosystem eco : present) {
                auto it = eco_split.find(eco);
                if (it == eco_split.end()) continue;  // fold holds no such samples
                per_eco[eco].push_back(compute_metrics(it->second.first, it->second.second));
            }
        }
    }

    CVResult result;
    result.overall = aggregate_metrics(overall);
    for (auto& [eco, metrics] : per_eco) {
        result.per_ecosystem[eco] = aggregate_metrics(metrics);
    }
    return result;
}

// ---------------------------------------------------------------------------
// search space

namespace {

void apply_param(Hyperparams& hp, const std::string& name, double numeric,
                 const std::string& choice) {
    if (name == "max_depth") hp.max_depth = static_cast<int>(numeric);
    else if (name == "max_features") hp.max_features = numeric;
    else if (name == "criterion") hp.criterion = criterion_from_name(choice);
    else if (name == "min_samples_leaf") hp.min_samples_leaf = static_cast<int>(numeric);
    else if (name == "min_samples_split") hp.min_samples_split = static_cast<int>(numeric);
    else if (name == "n_estimators") hp.n_estimators = static_cast<int>(numeric);
    else if (name == "max_samples") hp.max_samples = numeric;
    else if (name == "colsample_bytree") hp.colsample_bytree = numeric;
    else if (name == "learning_rate") hp.learning_rate = numeric;
    else if (name == "gamma") hp.gamma = numeric;
    else if (name == "min_child_weight") hp.min_child_weight = numeric;
    else throw std::invalid_argument("unknown search-space parameter: " + name);
}

double read_param(const Hyperparams& hp, const std::string& name,
                  const std::vector<std::string>& choices) {
    if (name == "max_depth") return hp.max_depth;
    if (name == "max_features") return hp.max_features;
    if (name == "criterion") {
        const std::string current(criterion_name(hp.criterion));
        for (std::size_t i = 0; i < choices.size(); ++i) {
            if (choices[i] == current) return static_cast<double>(i);
        }
        return -1.0;
    }
    if (name == "min_samples_leaf") return hp.min_samples_leaf;
    if (name == "min_samples_split") return hp.min_samples_split;
    if (name == "n_estimators") return hp.n_estimators;
    if (name == "max_samples") return hp.max_samples;
    if (name == "colsample_bytree") return hp.colsample_bytree;
    if (name == "learning_rate") return hp.learning_rate;
    if (name == "gamma") return hp.gamma;
    if (name == "min_child_weight") return hp.min_child_weight;
    throw std::invalid_argument("unknown search-space parameter: " + name);
}

}  // namespace

SearchSpace SearchSpace::defaults(LearnerKind kind) {
    SearchSpace space;
    const auto integer = [](double lo, double hi) {
        return ParamSpec{ParamSpec::Kind::integer, lo, hi, {}};
    };
    const auto real = [](double lo, double hi) {
        return ParamSpec{ParamSpec::Kind::real, lo, hi, {}};
    };
    switch (kind) {
    case LearnerKind::dt:
    case LearnerKind::rf:
        space.params.emplace_back("max_depth", integer(1, 32));
        space.params.emplace_back("max_features", real(0.1, 1.0));
        space.params.emplace_back(
            "criterion", ParamSpec{ParamSpec::Kind::categorical, 0, 0,
                                   {"gini", "entropy", "log_loss"}});
        space.params.emplace_back("min_samples_leaf", integer(1, 20));
        space.params.emplace_back("min_samples_split", integer(2, 40));
        if (kind == LearnerKind::rf) {
            space.params.emplace_back("n_estimators", integer(10, 100));
            space.params.emplace_back("max_samples", real(0.3, 1.0));
        }
        break;
    case LearnerKind::gbt:
        space.params.emplace_back("max_depth", integer(1, 10));
        space.params.emplace_back("n_estimators", integer(10, 100));
        space.params.emplace_back("colsample_bytree", real(0.2, 1.0));
        space.params.emplace_back("learning_rate", real(0.01, 1.0));
        space.params.emplace_back("gamma", real(0.0, 5.0));
        space.params.emplace_back("min_child_weight", real(0.0, 10.0));
        break;
    }
    return space;
}

SearchSpace SearchSpace::load(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) {
        throw std::runtime_error("cannot open search space file: " + path.string());
    }
    nlohmann::json doc = nlohmann::json::parse(in);
    SearchSpace space;
    for (const auto& [name, spec] : doc.items()) {
        ParamSpec p;
        const std::string kind = spec.at("kind").get<std::string>();
        if (kind == "real") {
            p.kind = ParamSpec::Kind::real;
            p.lo = spec.at("lo").get<double>();
            p.hi = spec.at("hi").get<double>();
        } else if (kind == "integer") {
            p.kind = ParamSpec::Kind::integer;
            p.lo = spec.at("lo").get<double>();
            p.hi = spec.at("hi").get<double>();
        } else if (kind == "categorical") {
            p.kind = ParamSpec::Kind::categorical;
            p.choices = spec.at("choices").get<std::vector<std::string>>();
        } else {
            throw std::runtime_error("bad search-space kind: " + kind);
        }
        if (p.kind != ParamSpec::Kind::categorical && !(p.lo <= p.hi)) {
            throw std::runtime_error("bad bounds for parameter " + name);
        }
        space.params.emplace_back(name, std::move(p));
    }
    if (space.params.empty()) {
        throw std::runtime_error("search space is empty");
    }
    return space;
}

void SearchSpace::save(const std::filesystem::path& path) const {
    nlohmann::json doc;
    for (const auto& [name, spec] : params) {
        nlohmann::json p;
        switch (spec.kind) {
        case ParamSpec::Kind::real: p["kind"] = "real"; break;
        case ParamSpec::Kind::integer: p["kind"] = "integer"; break;
        case ParamSpec::Kind::categorical: p["kind"] = "categorical"; break;
        }
        if (spec.kind == ParamSpec::Kind::categorical) {
            p["choices"] = spec.choices;
        } else {
            p["lo"] = spec.lo;
            p["hi"] = spec.hi;
        }
        doc[name] = std::move(p);
    }
    std::ofstream out(path);
    out << doc.dump(2) << "\n";
}

Hyperparams SearchSpace::draw(Rng& rng, const Hyperparams& base) const {
    Hyperparams hp = base;
    for (const auto& [name, spec] : params) {
        switch (spec.kind) {
        case ParamSpec::Kind::real:
            apply_param(hp, name, rng.next_in(spec.lo, spec.hi), "");
            break;
        case ParamSpec::Kind::integer: {
            const auto span = static_cast<std::uint64_t>(spec.hi - spec.lo) + 1;
            apply_param(hp, name, spec.lo + static_cast<double>(rng.next_below(span)), "");
            break;
        }
        case ParamSpec::Kind::categorical:
            apply_param(hp, name, 0.0,
                        spec.choices[static_cast<std::size_t>(
                            rng.next_below(spec.choices.size()))]);
            break;
        }
    }
    return hp;
}

std::vector<double> SearchSpace::encode(const Hyperparams& hp) const {
    std::vector<double> out;
    out.reserve(params.size());
    for (const auto& [name, spec] : params) {
        out.push_back(read_param(hp, name, spec.choices));
    }
    return out;
}

bool SearchSpace::contains(const Hyperparams& hp) const {
    for (const auto& [name, spec] : params) {
        const double v = read_param(hp, name, spec.choices);
        switch (spec.kind) {
        case ParamSpec::Kind::real:
        case ParamSpec::Kind::integer:
            if (v < spec.lo || v > spec.hi) return false;
            break;
        case ParamSpec::Kind::categorical:
            if (v < 0.0) return false;
            break;
        }
    }
    return true;
}

SearchStrategy strategy_from_name(std::string_view name) {
    if (name == "smbo") return SearchStrategy::smbo;
    if (name == "random") return SearchStrategy::random_search;
    throw std::invalid_argument("unknown search strategy: " + std::string(name));
}

// ---------------------------------------------------------------------------
// random-forest regression surrogate for expected improvement

namespace {

struct RegGrower {
    const DataMatrix& X;
    const std::vector<double>& y;
    int max_depth;
    Tree tree;

    int grow(const std::vector<std::size_t>& indices, int depth) {
        const std::size_t n = indices.size();
        double sum = 0.0;
        for (std::size_t i : indices) sum += y[i];

        const int node_id = static_cast<int>(tree.nodes.size());
        tree.nodes.emplace_back();
        tree.nodes[static_cast<std::size_t>(node_id)].leaf_value =
            sum / static_cast<double>(n);

        if (depth >= max_depth || n < 4) return node_id;

        bool found = false;
        double best_sse = 0.0;
        std::size_t best_feature = 0;
        double best_threshold = 0.0;

        std::vector<std::pair<double, double>> sorted(n);  // (x, y)
        for (std::size_t f = 0; f < X.cols; ++f) {
            for (std::size_t i = 0; i < n; ++i) {
                sorted[i] = {X.at(indices[i], f), y[indices[i]]};
            }
            std::sort(sorted.begin(), sorted.end());
            double left_sum = 0.0, left_sq = 0.0;
            double total_sq = 0.0;
            for (const auto& [_, yi] : sorted) total_sq += yi * yi;
            for (std::size_t i = 0; i + 1 < n; ++i) {
                left_sum += sorted[i].second;
                left_sq += sorted[i].second * sorted[i].second;
                if (sorted[i].first == sorted[i + 1].first) continue;
                const double nl = static_cast<double>(i + 1);
                const double nr = static_cast<double>(n - i - 1);
                const double right_sum = sum - left_sum;
                const double right_sq = total_sq - left_sq;
                const double sse = (left_sq - left_sum * left_sum / nl) +
                                   (right_sq - right_sum * right_sum / nr);
                const double threshold = 0.5 * (sorted[i].first + sorted[i + 1].first);
                if (!found || sse < best_sse ||
                    (sse == best_sse &&
                     (f < best_feature || (f == best_feature && threshold < best_threshold)))) {
                    found = true;
                    best_sse = sse;
                    best_feature = f;
                    best_threshold = threshold;
                }
            }
        }
        if (!found) return node_id;

        std::vector<std::size_t> left_idx, right_idx;
        for (std::size_t i : indices) {
            (X.at(i, best_feature) <= best_threshold ? left_idx : right_idx).push_back(i);
        }
        tree.nodes[static_cast<std::size_t>(node_id)].feature_index =
            static_cast<int>(best_feature);
        tree.nodes[static_cast<std::size_t>(node_id)].threshold = best_threshold;
        const int left = grow(left_idx, depth + 1);
        const int right = grow(right_idx, depth + 1);
        tree.nodes[static_cast<std::size_t>(node_id)].left = left;
        tree.nodes[static_cast<std::size_t>(node_id)].right = right;
        return node_id;
    }
};

struct RegressionForest {
    std::vector<Tree> trees;

    void predict_each(std::span<const double> x, std::vector<double>& out) const {
        out.clear();
        for (const Tree& tree : trees) out.push_back(tree.predict(x));
    }
};

RegressionForest train_regression_forest(const DataMatrix& X, const std::vector<double>& y,
                                         int n_trees, int max_depth, std::uint64_t seed) {
    RegressionForest forest;
    const std::size_t n = X.rows;
    for (int t = 0; t < n_trees; ++t) {
        Rng rng(mix_seed(seed, static_cast<std::uint64_t>(t)));
        std::vector<std::size_t> indices(n);
        for (std::size_t i = 0; i < n; ++i) {
            indices[i] = static_cast<std::size_t>(rng.next_below(n));
        }
        RegGrower grower{X, y, max_depth, Tree{}};
        grower.grow(indices, 0);
        forest.trees.push_back(std::move(grower.tree));
    }
    return forest;
}

double norm_cdf(double z) { return 0.5 * std::erfc(-z / std::sqrt(2.0)); }
double norm_pdf(double z) {
    return std::exp(-0.5 * z * z) / std::sqrt(2.0 * 3.14159265358979323846);
}

/// EI from the surrogate's per-tree prediction spread.
double expected_improvement(double mean, double spread, double best) {
    if (spread <= 0.0) return std::max(0.0, mean - best);
    const double z = (mean - best) / spread;
    return (mean - best) * norm_cdf(z) + spread * norm_pdf(z);
}

}  // namespace

TuneResult optimize_over(const SearchSpace& space, int budget, SearchStrategy strategy,
                         std::uint64_t seed,
                         const std::function<MetricsReport(const Hyperparams&)>& evaluate) {
    if (budget < 1) {
        throw std::invalid_argument("budget must be >= 1");
    }
    std::vector<Trial> log;
    std::vector<MetricsReport> reports;

    const auto run_trial = [&](const Hyperparams& hp) {
        MetricsReport report = evaluate(hp);
        Trial trial;
        trial.index = static_cast<int>(log.size());
        trial.hp = hp;
        trial.mean_precision = report.precision.mean;
        trial.mean_recall = report.recall.mean;
        log.push_back(trial);
        reports.push_back(std::move(report));
    };

    const auto draw_for_trial = [&](int index) {
        Rng rng(mix_seed(seed, static_cast<std::uint64_t>(index)));
        return space.draw(rng);
    };

    const int n_init = strategy == SearchStrategy::random_search
                           ? budget
                           : std::min(budget, std::max(5, budget / 4));
    for (int t = 0; t < n_init; ++t) {
        run_trial(draw_for_trial(t));
    }

    if (strategy == SearchStrategy::smbo) {
        constexpr int kCandidates = 128;
        for (int t = n_init; t < budget; ++t) {
            DataMatrix history;
            history.rows = log.size();
            history.cols = space.params.size();
            std::vector<double> objective;
            for (const Trial& trial : log) {
                const std::vector<double> enc = space.encode(trial.hp);
                history.storage.insert(history.storage.end(), enc.begin(), enc.end());
                objective.push_back(trial.mean_precision);
            }
            const RegressionForest surrogate = train_regression_forest(
                history, objective, /*n_trees=*/30, /*max_depth=*/8,
                mix_seed(seed, 0x5117ULL + static_cast<std::uint64_t>(t)));

            double best_objective = objective.front();
            for (double v : objective) best_objective = std::max(best_objective, v);

            Rng cand_rng(mix_seed(seed, 0x9e3779b9ULL + static_cast<std::uint64_t>(t)));
            Hyperparams best_candidate;
            double best_ei = -1.0;
            std::vector<double> tree_preds;
            for (int c = 0; c < kCandidates; ++c) {
                Hyperparams hp = space.draw(cand_rng);
                const std::vector<double> enc = space.encode(hp);
                surrogate.predict_each(enc, tree_preds);
                const MeanStd stats = [&] {
                    MeanStd ms;
                    double sum = 0;
                    for (double v : tree_preds) sum += v;
                    ms.mean = sum / static_cast<double>(tree_preds.size());
                    double sq = 0;
                    for (double v : tree_preds) sq += (v - ms.mean) * (v - ms.mean);
                    ms.stddev = std::sqrt(sq / static_cast<double>(tree_preds.size()));
                    return ms;
                }();
                const double ei = expected_improvement(stats.mean, stats.stddev,
                                                       best_objective);
                if (ei > best_ei) {
                    best_ei = ei;
                    best_candidate = hp;
                }
            }
            run_trial(best_candidate);
        }
    }

    // best trial: highest precision, ties by recall, then earliest
    std::size_t best = 0;
    for (std::size_t i = 1; i < log.size(); ++i) {
        const bool better =
            log[i].mean_precision > log[best].mean_precision ||
            (log[i].mean_precision == log[best].mean_precision &&
             log[i].mean_recall > log[best].mean_recall);
        if (better) best = i;
    }

    TuneResult result;
    result.best_hp = log[best].hp;
    result.best_report = reports[best];
    result.log = std::move(log);
    return result;
}

TuneResult optimize_hyperparams(const Dataset& ds, LearnerKind kind, const SearchSpace& space,
                                int budget, SearchStrategy strategy, const CVConfig& cv,
                                std::uint64_t seed) {
    return optimize_over(space, budget, strategy, seed, [&](const Hyperparams& hp) {
        return cross_validate(ds, kind, hp, cv).overall;
    });
}

void write_trial_log(std::ostream& out, const std::vector<Trial>& log) {
    for (const Trial& trial : log) {
        nlohmann::json j;
        j["trial_index"] = trial.index;
        j["hp"] = hyperparams_to_json(trial.hp);
        j["mean_precision"] = trial.mean_precision;
        j["mean_recall"] = trial.mean_recall;
        out << j.dump() << "\n";
    }
}

}  // namespace pkgscan
