#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "pkgscan/ingest.hpp"

namespace pkgscan {

enum class FeedErrc {
    feed_unavailable,   // retryable
    malformed_payload,
    download_failed,    // retryable
    oversize_download,
};

class FeedError : public std::runtime_error {
public:
    FeedError(FeedErrc code, const std::string& what)
        : std::runtime_error(what), code_(code) {}
    FeedErrc code() const { return code_; }
    bool retryable() const {
        return code_ == FeedErrc::feed_unavailable || code_ == FeedErrc::download_failed;
    }

private:
    FeedErrc code_;
};

struct FeedEvent {
    Ecosystem ecosystem = Ecosystem::npm;
    std::string name;
    std::string version;      // may be empty until resolved
    std::string archive_url;  // file:// or http(s)://; empty until resolved
    std::string observed_at;  // ISO-8601 UTC
};

struct PollResult {
    std::vector<FeedEvent> events;  // strictly newer than the cursor, oldest first
    std::string next_cursor;
    int malformed = 0;  // items dropped from an otherwise valid payload
};

class FeedSource {
public:
    virtual ~FeedSource() = default;
    virtual std::string id() const = 0;
    virtual Ecosystem ecosystem() const = 0;
    virtual PollResult poll(const std::string& cursor) = 0;
    virtual int poll_interval_seconds() const = 0;
};

/// Offline source: every archive file dropped into the directory is one
/// event. The cursor is a lexicographic filename high-water mark, so drops
/// must sort after already-processed names to be picked up.
class LocalDirFeedSource : public FeedSource {
public:
    LocalDirFeedSource(std::filesystem::path dir, Ecosystem eco, int interval_seconds = 1);
    std::string id() const override;
    Ecosystem ecosystem() const override { return eco_; }
    PollResult poll(const std::string& cursor) override;
    int poll_interval_seconds() const override { return interval_; }

private:
    std::filesystem::path dir_;
    Ecosystem eco_;
    int interval_;
};

struct HttpOptions {
    int timeout_seconds = 30;
    int max_retries = 3;
    double backoff_base_seconds = 1.0;  // doubled per retry
    std::string user_agent = "pkgscan/0.1 (registry malware scanner)";
};

/// Returns the response body, or nullopt after exhausting retries.
using HttpGetFn = std::function<std::optional<std::string>(const std::string& url)>;

HttpGetFn make_http_client(const HttpOptions& options);

/// Payload parsers, exposed for fixture tests. Both throw
/// FeedError(malformed_payload) when the whole payload is unusable and count
/// per-item damage in PollResult::malformed.

/// PyPI newest-packages RSS: <item><title>name version</title>... Items are
/// returned oldest-first; the cursor is the newest item's "name version"
/// title previously seen.
PollResult parse_pypi_rss(const std::string& xml, const std::string& cursor);

/// npm follow-changes JSON: {"results":[{"seq":..,"id":"pkg"}],"last_seq":N}.
/// Cursor is the decimal sequence number.
PollResult parse_npm_changes(const std::string& json_payload, const std::string& cursor);

class PyPiFeedSource : public FeedSource {
public:
    PyPiFeedSource(std::string feed_url, HttpGetFn getter, int interval_seconds = 900);
    std::string id() const override { return "pypi-feed"; }
    Ecosystem ecosystem() const override { return Ecosystem::pypi; }
    PollResult poll(const std::string& cursor) override;
    int poll_interval_seconds() const override { return interval_; }

private:
    std::string url_;
    HttpGetFn get_;
    int interval_;
};

class NpmFeedSource : public FeedSource {
public:
    NpmFeedSource(std::string changes_url, HttpGetFn getter, int interval_seconds = 900);
    std::string id() const override { return "npm-feed"; }
    Ecosystem ecosystem() const override { return Ecosystem::npm; }
    PollResult poll(const std::string& cursor) override;
    int poll_interval_seconds() const override { return interval_; }

private:
    std::string url_;
    HttpGetFn get_;
    int interval_;
};

/// Downloads archives with a pre-decompression size cap; resolves registry
/// metadata when an event carries no archive URL yet.
class ArchiveFetcher {
public:
    ArchiveFetcher(HttpGetFn getter, std::uint64_t size_cap)
        : get_(std::move(getter)), size_cap_(size_cap) {}

    /// Fills version/archive_url from the registry when missing.
    void resolve(FeedEvent& event) const;

    /// Persists the archive under dest_dir; returns its path and records the
    /// content hash when sha256_out is given.
    std::filesystem::path fetch(const FeedEvent& event, const std::filesystem::path& dest_dir,
                                std::string* sha256_out = nullptr) const;

private:
    HttpGetFn get_;
    std::uint64_t size_cap_;
};

}  // namespace pkgscan
