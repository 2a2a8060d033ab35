#include "pkgscan/scanner.hpp"

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <ctime>
#include <fstream>
#include <thread>

#include "pkgscan/util.hpp"

namespace pkgscan {

std::string_view disposition_name(ScanDisposition d) {
    switch (d) {
    case ScanDisposition::ok: return "ok";
    case ScanDisposition::ingest_error: return "ingest_error";
    case ScanDisposition::download_error: return "download_error";
    case ScanDisposition::oversize: return "oversize";
    }
    return "ok";
}

namespace {

ScanDisposition disposition_from_name(std::string_view name) {
    if (name == "ingest_error") return ScanDisposition::ingest_error;
    if (name == "download_error") return ScanDisposition::download_error;
    if (name == "oversize") return ScanDisposition::oversize;
    return ScanDisposition::ok;
}

}  // namespace

std::string iso8601_utc_now() {
    const std::time_t t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&t, &tm);
    char buf[32];
    std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

nlohmann::json verdict_to_json(const ScanVerdict& v) {
    nlohmann::json j;
    j["ecosystem"] = std::string(ecosystem_name(v.ecosystem));
    j["name"] = v.name;
    j["version"] = v.version;
    j["disposition"] = std::string(disposition_name(v.disposition));
    if (!v.error.empty()) j["error"] = v.error;
    nlohmann::json models = nlohmann::json::array();
    for (const ModelVerdict& m : v.models) {
        models.push_back({{"model_id", m.model_id},
                          {"probability", m.probability},
                          {"label", m.malicious ? "malicious" : "benign"}});
    }
    j["models"] = std::move(models);
    j["flagged"] = v.flagged;
    nlohmann::json top = nlohmann::json::array();
    for (const auto& [name, importance] : v.top_features) {
        top.push_back({{"feature", name}, {"importance", importance}});
    }
    j["top_features"] = std::move(top);
    j["schema_hash"] = v.schema_hash;
    j["scanned_at"] = v.scanned_at;
    j["format"] = v.archive_format;
    j["truncation"] = v.truncation;
    j["lex_error"] = v.lex_error;
    if (!v.content_sha256.empty()) j["sha256"] = v.content_sha256;
    return j;
}

ScanVerdict verdict_from_json(const nlohmann::json& j) {
    ScanVerdict v;
    v.ecosystem = ecosystem_from_name(j.at("ecosystem").get<std::string>());
    v.name = j.at("name").get<std::string>();
    v.version = j.value("version", "");
    v.disposition = disposition_from_name(j.value("disposition", "ok"));
    v.error = j.value("error", "");
    if (j.contains("models")) {
        for (const nlohmann::json& m : j["models"]) {
            ModelVerdict mv;
            mv.model_id = m.at("model_id").get<std::string>();
            mv.probability = m.at("probability").get<double>();
            mv.malicious = m.at("label").get<std::string>() == "malicious";
            v.models.push_back(std::move(mv));
        }
    }
    v.flagged = j.value("flagged", false);
    if (j.contains("top_features")) {
        for (const nlohmann::json& f : j["top_features"]) {
            v.top_features.emplace_back(f.at("feature").get<std::string>(),
                                        f.at("importance").get<double>());
        }
    }
    v.schema_hash = j.value("schema_hash", "");
    v.scanned_at = j.value("scanned_at", "");
    v.archive_format = j.value("format", "");
    v.truncation = j.value("truncation", false);
    v.lex_error = j.value("lex_error", false);
    v.content_sha256 = j.value("sha256", "");
    return v;
}

ScanVerdict scan_package(const std::filesystem::path& archive, Ecosystem eco,
                         const std::vector<ModelEntry>& models, const FeatureSchema& schema,
                         const SensitiveDictionary& dict, const IngestLimits& limits,
                         const std::string& name_hint, const std::string& version_hint,
                         const std::string& scanned_at) {
    for (const ModelEntry& entry : models) {
        if (entry.model.schema_hash != schema.content_hash()) {
            throw ModelError(ModelErrc::schema_hash_mismatch,
                             "model " + entry.model_id + " was trained on a different schema");
        }
    }

    ScanVerdict verdict;
    verdict.ecosystem = eco;
    verdict.name = name_hint;
    verdict.version = version_hint;
    verdict.schema_hash = schema.content_hash();
    verdict.scanned_at = scanned_at.empty() ? iso8601_utc_now() : scanned_at;

    PackageArtifact artifact;
    try {
        artifact = open_archive(archive, eco, limits);
    } catch (const IngestError& e) {
        verdict.disposition = ScanDisposition::ingest_error;
        verdict.error = e.what();
        return verdict;
    }
    if (verdict.name.empty()) verdict.name = artifact.name;
    if (verdict.version.empty()) verdict.version = artifact.version;
    verdict.archive_format = artifact.archive_format;

    ExtractionNotes notes;
    const FeatureVector features = extract_features(artifact, schema, dict, &notes);
    verdict.truncation = notes.any_truncated;
    verdict.lex_error = notes.any_lex_error;

    const ModelEntry* flagging = nullptr;
    for (const ModelEntry& entry : models) {
        const Prediction pred = predict(entry.model, features);
        verdict.models.push_back(ModelVerdict{entry.model_id, pred.probability,
                                              pred.malicious});
        if (pred.malicious && !flagging) flagging = &entry;
    }
    verdict.flagged = flagging != nullptr;

    if (flagging) {
        std::vector<std::pair<std::string, double>> ranked;
        for (const auto& [name, importance] : feature_importance(flagging->model, schema)) {
            ranked.emplace_back(name, importance);
        }
        std::sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) {
            if (a.second != b.second) return a.second > b.second;
            return a.first < b.first;
        });
        if (ranked.size() > 10) ranked.resize(10);
        verdict.top_features = std::move(ranked);
    }
    return verdict;
}

VerdictSink::VerdictSink(std::filesystem::path path) : path_(std::move(path)) {
    if (path_.has_parent_path()) {
        std::filesystem::create_directories(path_.parent_path());
    }
}

void VerdictSink::append(const ScanVerdict& verdict) {
    std::lock_guard<std::mutex> lock(mutex_);
    std::ofstream out(path_, std::ios::app);
    if (!out) {
        throw std::runtime_error("cannot append to sink: " + path_.string());
    }
    out << verdict_to_json(verdict).dump() << "\n";
    ++count_;
}

std::vector<ScanVerdict> read_sink(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) {
        throw std::runtime_error("cannot open sink: " + path.string());
    }
    std::vector<ScanVerdict> verdicts;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        verdicts.push_back(verdict_from_json(nlohmann::json::parse(line)));
    }
    return verdicts;
}

namespace {

std::string triple_key(Ecosystem eco, const std::string& name, const std::string& version) {
    std::string key(ecosystem_name(eco));
    key += '\t';
    key += name;
    key += '\t';
    key += version;
    return key;
}

}  // namespace

ScanState::ScanState(std::filesystem::path state_dir) : dir_(std::move(state_dir)) {
    namespace fs = std::filesystem;
    fs::create_directories(dir_);
    const fs::path cursor_file = dir_ / "cursors.json";
    if (fs::exists(cursor_file)) {
        std::ifstream in(cursor_file);
        nlohmann::json doc = nlohmann::json::parse(in, nullptr, false);
        if (!doc.is_discarded() && doc.is_object()) {
            for (const auto& [key, value] : doc.items()) {
                cursors_[key] = value.get<std::string>();
            }
        }
    }
    const fs::path seen_file = dir_ / "seen.log";
    if (fs::exists(seen_file)) {
        std::ifstream in(seen_file);
        std::string line;
        while (std::getline(in, line)) {
            if (!line.empty()) seen_.insert(line);
        }
    }
}

std::string ScanState::cursor_for(const std::string& source_id) const {
    auto it = cursors_.find(source_id);
    return it == cursors_.end() ? "" : it->second;
}

void ScanState::set_cursor(const std::string& source_id, const std::string& cursor) {
    cursors_[source_id] = cursor;
}

void ScanState::save_cursors() const {
    nlohmann::json doc = nlohmann::json::object();
    for (const auto& [key, value] : cursors_) doc[key] = value;
    std::ofstream out(dir_ / "cursors.json");
    out << doc.dump(2) << "\n";
}

bool ScanState::seen(Ecosystem eco, const std::string& name, const std::string& version) const {
    return seen_.count(triple_key(eco, name, version)) > 0;
}

void ScanState::mark(Ecosystem eco, const std::string& name, const std::string& version) {
    const std::string key = triple_key(eco, name, version);
    if (!seen_.insert(key).second) return;
    std::ofstream out(dir_ / "seen.log", std::ios::app);
    out << key << "\n";
}

std::uint64_t RunSummary::scanned() const {
    std::uint64_t n = 0;
    for (const auto& [_, counts] : per_ecosystem) n += counts.scanned;
    return n;
}

std::uint64_t RunSummary::flagged() const {
    std::uint64_t n = 0;
    for (const auto& [_, counts] : per_ecosystem) n += counts.flagged;
    return n;
}

std::uint64_t RunSummary::errors() const {
    std::uint64_t n = 0;
    for (const auto& [_, counts] : per_ecosystem) n += counts.errors;
    return n;
}

RunSummary run_watch(const std::vector<std::unique_ptr<FeedSource>>& sources,
                     const std::vector<ModelEntry>& models, const FeatureSchema& schema,
                     const SensitiveDictionary& dict, const ArchiveFetcher& fetcher,
                     VerdictSink& sink, ScanState& state, std::atomic<bool>& stop,
                     const WatchOptions& options) {
    namespace fs = std::filesystem;
    RunSummary summary;
    std::mutex summary_mutex;

    const fs::path download_dir =
        options.download_dir.empty() ? fs::temp_directory_path() / "pkgscan-downloads"
                                     : options.download_dir;

    const auto process_event = [&](const FeedEvent& event) {
        ScanVerdict verdict;
        try {
            FeedEvent resolved = event;
            fetcher.resolve(resolved);
            std::string sha;
            const fs::path archive = fetcher.fetch(resolved, download_dir, &sha);
            verdict = scan_package(archive, resolved.ecosystem, models, schema, dict,
                                   options.limits, resolved.name, resolved.version,
                                   options.fixed_scanned_at);
            verdict.content_sha256 = sha;
            std::error_code ec;
            fs::remove(archive, ec);  // downloads are transient
        } catch (const FeedError& e) {
            verdict.ecosystem = event.ecosystem;
            verdict.name = event.name;
            verdict.version = event.version;
            verdict.disposition = e.code() == FeedErrc::oversize_download
                                      ? ScanDisposition::oversize
                                      : ScanDisposition::download_error;
            verdict.error = e.what();
            verdict.scanned_at = options.fixed_scanned_at.empty() ? iso8601_utc_now()
                                                                  : options.fixed_scanned_at;
        }
        return verdict;
    };

    int cycle = 0;
    while (!stop.load()) {
        std::vector<FeedEvent> batch;
        for (const auto& source : sources) {
            try {
                PollResult result = source->poll(state.cursor_for(source->id()));
                state.set_cursor(source->id(), result.next_cursor);
                for (FeedEvent& event : result.events) {
                    if (state.seen(event.ecosystem, event.name, event.version)) continue;
                    state.mark(event.ecosystem, event.name, event.version);
                    batch.push_back(std::move(event));
                }
            } catch (const FeedError& e) {
                // feed failure: skip this cycle, retry on the next
                std::fprintf(stderr, "feed %s: %s\n", source->id().c_str(), e.what());
            }
        }

        if (!batch.empty()) {
            const int workers = std::max(1, std::min<int>(options.workers,
                                                          static_cast<int>(batch.size())));
            std::vector<ScanVerdict> results(batch.size());
            std::atomic<std::size_t> next{0};
            std::vector<std::thread> pool;
            pool.reserve(static_cast<std::size_t>(workers));
            for (int w = 0; w < workers; ++w) {
                pool.emplace_back([&] {
                    // started packages run to completion even when stopping
                    while (true) {
                        const std::size_t i = next.fetch_add(1);
                        if (i >= batch.size()) break;
                        results[i] = process_event(batch[i]);
                    }
                });
            }
            for (std::thread& t : pool) t.join();
            // sink appends in batch order so runs are reproducible
            for (const ScanVerdict& verdict : results) {
                sink.append(verdict);
                std::lock_guard<std::mutex> lock(summary_mutex);
                EcosystemCounts& counts = summary.per_ecosystem[verdict.ecosystem];
                ++counts.scanned;
                if (verdict.flagged) ++counts.flagged;
                if (verdict.disposition != ScanDisposition::ok) ++counts.errors;
            }
        }
        state.save_cursors();

        ++cycle;
        if (options.max_cycles > 0 && cycle >= options.max_cycles) break;
        if (stop.load()) break;

        // sleep until the earliest poll interval elapses, checking stop
        int interval = 900;
        for (const auto& source : sources) {
            interval = std::min(interval, source->poll_interval_seconds());
        }
        for (int waited = 0; waited < interval * 10 && !stop.load(); ++waited) {
            std::this_thread::sleep_for(std::chrono::milliseconds(100));
        }
    }
    state.save_cursors();
    return summary;
}

}  // namespace pkgscan
