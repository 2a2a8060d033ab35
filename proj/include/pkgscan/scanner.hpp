#pragma once

#include <atomic>
#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "pkgscan/feed.hpp"
#include "pkgscan/features.hpp"
#include "pkgscan/models.hpp"

namespace pkgscan {

struct ModelEntry {
    std::string model_id;
    TreeEnsembleModel model;
};

enum class ScanDisposition { ok, ingest_error, download_error, oversize };

std::string_view disposition_name(ScanDisposition d);

struct ModelVerdict {
    std::string model_id;
    double probability = 0.0;
    bool malicious = false;
};

struct ScanVerdict {
    Ecosystem ecosystem = Ecosystem::npm;
    std::string name;
    std::string version;
    ScanDisposition disposition = ScanDisposition::ok;
    std::string error;                    // set for non-ok dispositions
    std::vector<ModelVerdict> models;
    bool flagged = false;                 // any model over its threshold
    std::vector<std::pair<std::string, double>> top_features;  // from the flagging model
    std::string schema_hash;
    std::string scanned_at;               // ISO-8601 UTC
    std::string archive_format;
    bool truncation = false;
    bool lex_error = false;
    std::string content_sha256;
};

nlohmann::json verdict_to_json(const ScanVerdict& v);
ScanVerdict verdict_from_json(const nlohmann::json& j);

/// ingest -> lex -> extract -> predict with every model. Ingest failures
/// yield an error-disposition verdict instead of throwing.
ScanVerdict scan_package(const std::filesystem::path& archive, Ecosystem eco,
                         const std::vector<ModelEntry>& models, const FeatureSchema& schema,
                         const SensitiveDictionary& dict, const IngestLimits& limits = {},
                         const std::string& name_hint = "",
                         const std::string& version_hint = "",
                         const std::string& scanned_at = "");

/// Line-delimited verdict sink; appends are mutex-serialized so workers can
/// share one instance.
class VerdictSink {
public:
    explicit VerdictSink(std::filesystem::path path);
    void append(const ScanVerdict& verdict);
    const std::filesystem::path& path() const { return path_; }
    std::size_t count() const { return count_; }

private:
    std::filesystem::path path_;
    std::mutex mutex_;
    std::size_t count_ = 0;
};

std::vector<ScanVerdict> read_sink(const std::filesystem::path& path);

/// Persisted cursors + at-most-once dedup cache, one directory per scanner
/// identity. The dedup log is append-only.
class ScanState {
public:
    explicit ScanState(std::filesystem::path state_dir);

    std::string cursor_for(const std::string& source_id) const;
    void set_cursor(const std::string& source_id, const std::string& cursor);
    void save_cursors() const;

    bool seen(Ecosystem eco, const std::string& name, const std::string& version) const;
    void mark(Ecosystem eco, const std::string& name, const std::string& version);

private:
    std::filesystem::path dir_;
    std::map<std::string, std::string> cursors_;
    std::set<std::string> seen_;
};

struct EcosystemCounts {
    std::uint64_t scanned = 0;
    std::uint64_t flagged = 0;
    std::uint64_t errors = 0;
};

struct RunSummary {
    std::map<Ecosystem, EcosystemCounts> per_ecosystem;
    std::uint64_t scanned() const;
    std::uint64_t flagged() const;
    std::uint64_t errors() const;
};

struct WatchOptions {
    int max_cycles = -1;  // -1: poll until stopped
    int workers = 8;
    std::uint64_t download_cap = 256ull << 20;
    IngestLimits limits;
    std::string fixed_scanned_at;  // non-empty pins verdict timestamps
    std::filesystem::path download_dir;
};

/// Poll-fetch-scan loop (single pass per cycle over every source). Started
/// packages always finish; cursors and the dedup cache persist after every
/// cycle.
RunSummary run_watch(const std::vector<std::unique_ptr<FeedSource>>& sources,
                     const std::vector<ModelEntry>& models, const FeatureSchema& schema,
                     const SensitiveDictionary& dict, const ArchiveFetcher& fetcher,
                     VerdictSink& sink, ScanState& state, std::atomic<bool>& stop,
                     const WatchOptions& options);

std::string iso8601_utc_now();

}  // namespace pkgscan
