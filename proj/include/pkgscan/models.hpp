#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "pkgscan/features.hpp"

namespace pkgscan {

enum class LearnerKind { dt, rf, gbt };
enum class SplitCriterion { gini, entropy, log_loss };

std::string_view learner_name(LearnerKind kind);
LearnerKind learner_from_name(std::string_view name);
std::string_view criterion_name(SplitCriterion c);
SplitCriterion criterion_from_name(std::string_view name);

struct Hyperparams {
    // tree controls (dt, rf)
    int max_depth = 6;
    double max_features = 1.0;  // fraction of features sampled per node
    SplitCriterion criterion = SplitCriterion::gini;
    int min_samples_leaf = 1;
    int min_samples_split = 2;
    // forest (rf) / boosting rounds (gbt)
    int n_estimators = 100;
    double max_samples = 1.0;  // bootstrap sample fraction
    bool bootstrap = true;     // test hook; rf only
    // boosting (gbt)
    double colsample_bytree = 1.0;  // per-tree feature fraction
    double learning_rate = 0.3;
    double gamma = 0.0;             // minimum split loss
    double min_child_weight = 1.0;  // minimum hessian sum per child
    double l2_lambda = 1.0;

    void validate(LearnerKind kind) const;  // throws std::invalid_argument
};

/// Row-major numeric matrix; the training-side view of feature vectors.
struct DataMatrix {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<double> storage;

    double at(std::size_t r, std::size_t c) const { return storage[r * cols + c]; }
    std::span<const double> row(std::size_t r) const {
        return {storage.data() + r * cols, cols};
    }
    static DataMatrix from_vectors(const std::vector<FeatureVector>& vectors);
};

struct TreeNode {
    int feature_index = -1;  // -1: leaf
    double threshold = 0.0;
    int left = -1;
    int right = -1;
    double leaf_value = 0.0;
    double gain = 0.0;  // impurity decrease (dt/rf) or split gain (gbt)
};

struct Tree {
    std::vector<TreeNode> nodes;
    double predict(std::span<const double> x) const;
};

struct TreeEnsembleModel {
    LearnerKind kind = LearnerKind::dt;
    std::vector<Tree> trees;
    Hyperparams hp;
    std::string schema_version;
    std::string schema_hash;
    std::size_t feature_count = 0;
    double base_raw_score = 0.0;  // gbt; logit of the prior
    double decision_threshold = 0.5;
    bool degenerate = false;  // trained on a single class
};

enum class ModelErrc {
    schema_mismatch,
    version_mismatch,
    schema_hash_mismatch,
    malformed_model_file,
};

class ModelError : public std::runtime_error {
public:
    ModelError(ModelErrc code, const std::string& what)
        : std::runtime_error(what), code_(code) {}
    ModelErrc code() const { return code_; }

private:
    ModelErrc code_;
};

/// Greedy CART on midpoint thresholds with per-node feature subsampling.
/// Single-class input yields a flagged constant model.
TreeEnsembleModel train_dt(const DataMatrix& X, const std::vector<int>& y,
                           const Hyperparams& hp, std::uint64_t seed,
                           const FeatureSchema& schema);

/// Bootstrap ensemble of CART trees; prediction = mean leaf probability.
TreeEnsembleModel train_rf(const DataMatrix& X, const std::vector<int>& y,
                           const Hyperparams& hp, std::uint64_t seed,
                           const FeatureSchema& schema);

/// Second-order gradient boosting with logistic loss. Split gain
/// 0.5 * (GL^2/(HL+l) + GR^2/(HR+l) - G^2/(H+l)) - gamma, leaf weight
/// -G/(H+l), scores shrunk by the learning rate.
TreeEnsembleModel train_gbt(const DataMatrix& X, const std::vector<int>& y,
                            const Hyperparams& hp, std::uint64_t seed,
                            const FeatureSchema& schema);

struct Prediction {
    double probability = 0.0;
    bool malicious = false;
};

Prediction predict(const TreeEnsembleModel& model, const FeatureVector& x);

/// Raw-span path without the schema check; used by the harness on data it
/// already validated.
double predict_probability(const TreeEnsembleModel& model, std::span<const double> x);

/// Total gain per feature name, normalized to sum 1. Empty for degenerate
/// models.
std::map<std::string, double> feature_importance(const TreeEnsembleModel& model,
                                                 const FeatureSchema& schema);

double sigmoid(double z);

nlohmann::json hyperparams_to_json(const Hyperparams& hp);

/// Accepts partial objects (missing fields keep defaults); unknown keys are
/// an error.
Hyperparams hyperparams_from_json(const nlohmann::json& j);

void save_model(const TreeEnsembleModel& model, const std::filesystem::path& path);
TreeEnsembleModel load_model(const std::filesystem::path& path);
TreeEnsembleModel load_model(const std::filesystem::path& path,
                             const FeatureSchema& expected_schema);

}  // namespace pkgscan
