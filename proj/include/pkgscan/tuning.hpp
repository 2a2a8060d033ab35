#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include "pkgscan/dataset.hpp"
#include "pkgscan/models.hpp"
#include "pkgscan/util.hpp"

namespace pkgscan {

enum class TuningErrc { too_few_positives, length_mismatch };

class TuningError : public std::runtime_error {
public:
    TuningError(TuningErrc code, const std::string& what)
        : std::runtime_error(what), code_(code) {}
    TuningErrc code() const { return code_; }

private:
    TuningErrc code_;
};

struct CVConfig {
    int k = 5;
    int repeats = 10;
    std::uint64_t seed = 0;
};

/// Stratified partition into k folds: per-class round-robin after a seeded
/// shuffle, so per-fold class counts differ by at most one. Both classes
/// need at least k members.
std::vector<std::vector<std::size_t>> stratified_folds(const std::vector<int>& labels, int k,
                                                       std::uint64_t seed);

struct Metrics {
    double precision = 0.0;
    double recall = 0.0;
    double f1 = 0.0;
    double accuracy = 0.0;
};

/// Positive class = malicious (1). Zero-division cases yield 0.
Metrics compute_metrics(const std::vector<int>& y_true, const std::vector<int>& y_pred);

struct MeanStd {
    double mean = 0.0;
    double stddev = 0.0;  // population, over all fold scores
};

struct MetricsReport {
    MeanStd precision, recall, f1, accuracy;
    std::size_t evaluations = 0;  // folds x repeats that contributed
};

MetricsReport aggregate_metrics(const std::vector<Metrics>& fold_metrics);

struct CVResult {
    MetricsReport overall;
    /// Held-out metrics restricted to one ecosystem's samples; present for
    /// every ecosystem in the dataset (the Table-4 "cross tested per
    /// language" view).
    std::map<Ecosystem, MetricsReport> per_ecosystem;
};

/// Repeats r = 1..repeats, folds reseeded with seed+r; trains on k-1 folds,
/// evaluates the held-out fold; aggregates over all k*repeats evaluations.
CVResult cross_validate(const Dataset& ds, LearnerKind kind, const Hyperparams& hp,
                        const CVConfig& cv);

struct ParamSpec {
    enum class Kind { real, integer, categorical };
    Kind kind = Kind::real;
    double lo = 0.0;
    double hi = 0.0;  // inclusive
    std::vector<std::string> choices;
};

struct SearchSpace {
    std::vector<std::pair<std::string, ParamSpec>> params;  // order fixes encoding

    static SearchSpace defaults(LearnerKind kind);
    static SearchSpace load(const std::filesystem::path& path);
    void save(const std::filesystem::path& path) const;

    Hyperparams draw(Rng& rng, const Hyperparams& base = {}) const;
    std::vector<double> encode(const Hyperparams& hp) const;
    bool contains(const Hyperparams& hp) const;
};

enum class SearchStrategy { smbo, random_search };

SearchStrategy strategy_from_name(std::string_view name);

struct Trial {
    int index = 0;
    Hyperparams hp;
    double mean_precision = 0.0;
    double mean_recall = 0.0;
};

struct TuneResult {
    Hyperparams best_hp;
    MetricsReport best_report;
    std::vector<Trial> log;
};

/// Optimizer core over an arbitrary objective; the objective's precision
/// mean is maximized, ties broken by higher recall mean, then earlier trial.
/// smbo: max(5, budget/4) seeded random trials, then expected-improvement
/// proposals under a random-forest regression surrogate.
TuneResult optimize_over(const SearchSpace& space, int budget, SearchStrategy strategy,
                         std::uint64_t seed,
                         const std::function<MetricsReport(const Hyperparams&)>& evaluate);

/// The spec'd entry point: objective = mean CV precision on `ds`.
TuneResult optimize_hyperparams(const Dataset& ds, LearnerKind kind, const SearchSpace& space,
                                int budget, SearchStrategy strategy, const CVConfig& cv,
                                std::uint64_t seed);

void write_trial_log(std::ostream& out, const std::vector<Trial>& log);

}  // namespace pkgscan
