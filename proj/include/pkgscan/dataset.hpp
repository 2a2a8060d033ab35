#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "pkgscan/feature_csv.hpp"
#include "pkgscan/features.hpp"
#include "pkgscan/ingest.hpp"

namespace pkgscan {

enum class Label { benign, malicious };

struct LabeledSample {
    FeatureVector feature_vector;
    Label label = Label::benign;
    Ecosystem ecosystem = Ecosystem::npm;
    std::string name;
    std::string version;
    std::optional<std::string> campaign_id;
};

struct Dataset {
    std::vector<LabeledSample> samples;
    std::string schema_version;
    std::string provenance;

    std::size_t count(Label label) const;
};

enum class DatasetErrc { insufficient_benign, schema_mismatch, duplicate_sample };

class DatasetError : public std::runtime_error {
public:
    DatasetError(DatasetErrc code, const std::string& what)
        : std::runtime_error(what), code_(code) {}
    DatasetErrc code() const { return code_; }

private:
    DatasetErrc code_;
};

/// Three sequential filters over malicious samples:
///   1. per (ecosystem, name) keep only the latest version;
///   2. per campaign keep one representative (lowest name, then ecosystem,
///      then version); samples without a campaign id are singletons;
///   3. collapse bit-identical feature vectors to one representative.
/// Idempotent.
std::vector<LabeledSample> dedup_malicious(std::vector<LabeledSample> samples);

/// Numeric-aware dotted version ordering with lexicographic fallback.
/// Returns true when a < b.
bool version_less(const std::string& a, const std::string& b);

/// Keeps all malicious samples and truncates benign (sorted by name) so the
/// benign share equals `ratio` within one sample.
Dataset assemble(std::vector<LabeledSample> benign, std::vector<LabeledSample> malicious,
                 double ratio = 0.9);

/// Union of two datasets; schema versions must match and no
/// (ecosystem, name, version) may repeat.
Dataset merge_cross(const Dataset& a, const Dataset& b);

struct FeatureDistributionRow {
    std::string feature;
    Label label;
    double min = 0, mean = 0, median = 0, q3 = 0, max = 0, stddev = 0;
};

/// Per feature x label summary statistics, in schema order
/// (benign row then malicious row per feature, labels present only when the
/// dataset has samples of that label).
std::vector<FeatureDistributionRow> feature_distribution_report(const Dataset& ds,
                                                                const FeatureSchema& schema);

void write_distribution_csv(std::ostream& out,
                            const std::vector<FeatureDistributionRow>& rows);

/// Campaign map file: `name<TAB>campaign_id` lines. Missing entries are
/// treated as singleton campaigns.
std::map<std::string, std::string> load_campaign_map(const std::filesystem::path& path);

/// Walks a `<ecosystem>/<name>/<version>/<archive>` tree, extracting one
/// sample per package. Per-package ingest failures are collected, not fatal.
struct CorpusScanResult {
    std::vector<LabeledSample> samples;
    std::vector<std::string> errors;
};

CorpusScanResult scan_corpus_tree(const std::filesystem::path& root, Label label,
                                  const FeatureSchema& schema,
                                  const SensitiveDictionary& dict,
                                  const std::map<std::string, std::string>& campaigns = {},
                                  const IngestLimits& limits = {});

Dataset dataset_from_rows(const std::vector<FeatureRow>& rows, const FeatureSchema& schema);
void save_dataset_csv(const Dataset& ds, const FeatureSchema& schema,
                      const std::filesystem::path& path);
Dataset load_dataset_csv(const std::filesystem::path& path, const FeatureSchema& schema);

}  // namespace pkgscan
