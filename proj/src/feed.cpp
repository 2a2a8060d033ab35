#include "pkgscan/feed.hpp"

#include <algorithm>
#include <chrono>
#include <fstream>
#include <thread>

#define CPPHTTPLIB_OPENSSL_SUPPORT
#include <httplib.h>
#include <json.hpp>

#include "pkgscan/util.hpp"

namespace pkgscan {

namespace {

bool looks_like_archive(const std::filesystem::path& p) {
    const std::string name = ascii_lower(p.filename().string());
    for (std::string_view suffix : {".tgz", ".tar.gz", ".whl", ".zip"}) {
        if (name.size() > suffix.size() &&
            name.compare(name.size() - suffix.size(), suffix.size(), suffix) == 0) {
            return true;
        }
    }
    return false;
}

std::string iso_from_file_time(const std::filesystem::path& p) {
    std::error_code ec;
    const auto ftime = std::filesystem::last_write_time(p, ec);
    if (ec) return "";
    const auto sys = std::chrono::time_point_cast<std::chrono::seconds>(
        std::chrono::file_clock::to_sys(ftime));
    const std::time_t t = std::chrono::system_clock::to_time_t(sys);
    std::tm tm{};
    gmtime_r(&t, &tm);
    char buf[32];
    std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

}  // namespace

LocalDirFeedSource::LocalDirFeedSource(std::filesystem::path dir, Ecosystem eco,
                                       int interval_seconds)
    : dir_(std::move(dir)), eco_(eco), interval_(interval_seconds) {}

std::string LocalDirFeedSource::id() const {
    return "local:" + dir_.string();
}

PollResult LocalDirFeedSource::poll(const std::string& cursor) {
    namespace fs = std::filesystem;
    if (!fs::exists(dir_)) {
        throw FeedError(FeedErrc::feed_unavailable,
                        "feed directory missing: " + dir_.string());
    }
    std::vector<fs::path> archives;
    for (const auto& entry : fs::directory_iterator(dir_)) {
        if (entry.is_regular_file() && looks_like_archive(entry.path())) {
            archives.push_back(entry.path());
        }
    }
    std::sort(archives.begin(), archives.end());

    PollResult result;
    result.next_cursor = cursor;
    for (const fs::path& archive : archives) {
        const std::string key = archive.filename().string();
        if (!cursor.empty() && key <= cursor) continue;
        FeedEvent event;
        event.ecosystem = eco_;
        auto [name, version] = parse_name_version(key);
        event.name = std::move(name);
        event.version = std::move(version);
        event.archive_url = "file://" + fs::absolute(archive).string();
        event.observed_at = iso_from_file_time(archive);
        result.events.push_back(std::move(event));
        result.next_cursor = std::max(result.next_cursor, key);
    }
    return result;
}

HttpGetFn make_http_client(const HttpOptions& options) {
    return [options](const std::string& url) -> std::optional<std::string> {
        // split scheme://host[:port]/path
        const std::size_t scheme_end = url.find("://");
        if (scheme_end == std::string::npos) return std::nullopt;
        const std::size_t path_start = url.find('/', scheme_end + 3);
        const std::string base = url.substr(0, path_start);
        const std::string path = path_start == std::string::npos ? "/" : url.substr(path_start);

        for (int attempt = 0; attempt <= options.max_retries; ++attempt) {
            if (attempt > 0) {
                const double delay =
                    options.backoff_base_seconds * static_cast<double>(1 << (attempt - 1));
                std::this_thread::sleep_for(std::chrono::duration<double>(delay));
            }
            httplib::Client client(base);
            client.set_connection_timeout(options.timeout_seconds, 0);
            client.set_read_timeout(options.timeout_seconds, 0);
            client.set_follow_location(true);
            httplib::Headers headers = {{"User-Agent", options.user_agent}};
            auto res = client.Get(path, headers);
            if (res && res->status >= 200 && res->status < 300) {
                return res->body;
            }
            // 4xx responses are permanent; retry only transport errors / 5xx
            if (res && res->status >= 400 && res->status < 500) {
                return std::nullopt;
            }
        }
        return std::nullopt;
    };
}

namespace {

std::string xml_text_between(const std::string& xml, std::size_t from, std::size_t to,
                             const std::string& tag) {
    const std::string open = "<" + tag + ">";
    const std::string close = "</" + tag + ">";
    const std::size_t a = xml.find(open, from);
    if (a == std::string::npos || a >= to) return "";
    const std::size_t b = xml.find(close, a + open.size());
    if (b == std::string::npos || b > to) return "";
    return xml.substr(a + open.size(), b - a - open.size());
}

}  // namespace

PollResult parse_pypi_rss(const std::string& xml, const std::string& cursor) {
    if (xml.find("<rss") == std::string::npos && xml.find("<channel") == std::string::npos) {
        throw FeedError(FeedErrc::malformed_payload, "payload is not an RSS document");
    }
    PollResult result;
    result.next_cursor = cursor;

    struct Item {
        std::string title, link, date;
    };
    std::vector<Item> items;  // document order: newest first
    std::size_t pos = 0;
    while (true) {
        const std::size_t a = xml.find("<item>", pos);
        if (a == std::string::npos) break;
        const std::size_t b = xml.find("</item>", a);
        if (b == std::string::npos) break;
        Item item;
        item.title = xml_text_between(xml, a, b, "title");
        item.link = xml_text_between(xml, a, b, "link");
        item.date = xml_text_between(xml, a, b, "pubDate");
        items.push_back(std::move(item));
        pos = b + 7;
    }

    std::vector<FeedEvent> fresh;
    for (const Item& item : items) {
        if (!cursor.empty() && item.title == cursor) break;  // older from here on
        const std::size_t space = item.title.rfind(' ');
        if (item.title.empty() || space == std::string::npos ||
            space + 1 >= item.title.size()) {
            ++result.malformed;  // e.g. a title without a version
            continue;
        }
        FeedEvent event;
        event.ecosystem = Ecosystem::pypi;
        event.name = item.title.substr(0, space);
        event.version = item.title.substr(space + 1);
        event.archive_url = "";  // resolved via the JSON API at fetch time
        event.observed_at = item.date;
        fresh.push_back(std::move(event));
    }
    if (!items.empty() && !items.front().title.empty()) {
        result.next_cursor = items.front().title;
    }
    std::reverse(fresh.begin(), fresh.end());  // oldest first
    result.events = std::move(fresh);
    return result;
}

PollResult parse_npm_changes(const std::string& json_payload, const std::string& cursor) {
    nlohmann::json doc = nlohmann::json::parse(json_payload, nullptr, false);
    if (doc.is_discarded() || !doc.is_object() || !doc.contains("results")) {
        throw FeedError(FeedErrc::malformed_payload, "not a changes-feed document");
    }
    PollResult result;
    std::uint64_t since = 0;
    if (!cursor.empty()) {
        since = std::strtoull(cursor.c_str(), nullptr, 10);
    }
    std::uint64_t max_seq = since;
    for (const nlohmann::json& row : doc["results"]) {
        if (!row.is_object() || !row.contains("id") || !row.contains("seq")) {
            ++result.malformed;
            continue;
        }
        const std::uint64_t seq = row["seq"].get<std::uint64_t>();
        max_seq = std::max(max_seq, seq);
        if (seq <= since) continue;
        FeedEvent event;
        event.ecosystem = Ecosystem::npm;
        event.name = row["id"].get<std::string>();
        event.archive_url = "";  // resolved via the registry at fetch time
        result.events.push_back(std::move(event));
    }
    if (doc.contains("last_seq") && doc["last_seq"].is_number()) {
        max_seq = std::max(max_seq, doc["last_seq"].get<std::uint64_t>());
    }
    result.next_cursor = std::to_string(max_seq);
    return result;
}

PyPiFeedSource::PyPiFeedSource(std::string feed_url, HttpGetFn getter, int interval_seconds)
    : url_(std::move(feed_url)), get_(std::move(getter)), interval_(interval_seconds) {}

PollResult PyPiFeedSource::poll(const std::string& cursor) {
    auto body = get_(url_);
    if (!body) {
        throw FeedError(FeedErrc::feed_unavailable, "pypi feed fetch failed: " + url_);
    }
    return parse_pypi_rss(*body, cursor);
}

NpmFeedSource::NpmFeedSource(std::string changes_url, HttpGetFn getter, int interval_seconds)
    : url_(std::move(changes_url)), get_(std::move(getter)), interval_(interval_seconds) {}

PollResult NpmFeedSource::poll(const std::string& cursor) {
    std::string url = url_;
    if (!cursor.empty()) {
        url += (url.find('?') == std::string::npos ? "?" : "&");
        url += "since=" + cursor;
    }
    auto body = get_(url);
    if (!body) {
        throw FeedError(FeedErrc::feed_unavailable, "npm feed fetch failed: " + url);
    }
    return parse_npm_changes(*body, cursor);
}

void ArchiveFetcher::resolve(FeedEvent& event) const {
    if (!event.archive_url.empty()) return;
    if (event.ecosystem == Ecosystem::pypi) {
        const std::string meta_url =
            "https://pypi.org/pypi/" + event.name +
            (event.version.empty() ? "" : "/" + event.version) + "/json";
        auto body = get_(meta_url);
        if (!body) {
            throw FeedError(FeedErrc::download_failed, "pypi metadata fetch failed: " + meta_url);
        }
        nlohmann::json doc = nlohmann::json::parse(*body, nullptr, false);
        if (doc.is_discarded() || !doc.contains("urls")) {
            throw FeedError(FeedErrc::malformed_payload, "unexpected pypi metadata");
        }
        if (event.version.empty() && doc.contains("info")) {
            event.version = doc["info"].value("version", "");
        }
        // prefer the sdist; fall back to the first file
        std::string chosen;
        for (const nlohmann::json& file : doc["urls"]) {
            const std::string url = file.value("url", "");
            if (url.empty()) continue;
            if (chosen.empty()) chosen = url;
            if (file.value("packagetype", "") == "sdist") {
                chosen = url;
                break;
            }
        }
        if (chosen.empty()) {
            throw FeedError(FeedErrc::download_failed,
                            "no downloadable files for " + event.name);
        }
        event.archive_url = chosen;
    } else {
        const std::string meta_url = "https://registry.npmjs.org/" + event.name;
        auto body = get_(meta_url);
        if (!body) {
            throw FeedError(FeedErrc::download_failed, "npm metadata fetch failed: " + meta_url);
        }
        nlohmann::json doc = nlohmann::json::parse(*body, nullptr, false);
        if (doc.is_discarded()) {
            throw FeedError(FeedErrc::malformed_payload, "unexpected npm metadata");
        }
        if (event.version.empty()) {
            event.version = doc.contains("dist-tags")
                                ? doc["dist-tags"].value("latest", "")
                                : "";
        }
        if (event.version.empty() || !doc.contains("versions") ||
            !doc["versions"].contains(event.version)) {
            throw FeedError(FeedErrc::malformed_payload,
                            "cannot resolve version for " + event.name);
        }
        event.archive_url = doc["versions"][event.version]["dist"].value("tarball", "");
        if (event.archive_url.empty()) {
            throw FeedError(FeedErrc::download_failed, "no tarball for " + event.name);
        }
    }
}

std::filesystem::path ArchiveFetcher::fetch(const FeedEvent& event,
                                            const std::filesystem::path& dest_dir,
                                            std::string* sha256_out) const {
    namespace fs = std::filesystem;
    fs::create_directories(dest_dir);

    std::string body;
    std::string filename;
    if (event.archive_url.rfind("file://", 0) == 0) {
        const fs::path src = event.archive_url.substr(7);
        std::error_code ec;
        const std::uint64_t size = fs::file_size(src, ec);
        if (ec) {
            throw FeedError(FeedErrc::download_failed, "missing file: " + src.string());
        }
        if (size > size_cap_) {
            throw FeedError(FeedErrc::oversize_download,
                            "archive exceeds download cap: " + src.string());
        }
        std::ifstream in(src, std::ios::binary);
        body.assign(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
        filename = src.filename().string();
    } else {
        auto fetched = get_(event.archive_url);
        if (!fetched) {
            throw FeedError(FeedErrc::download_failed,
                            "download failed: " + event.archive_url);
        }
        if (fetched->size() > size_cap_) {
            throw FeedError(FeedErrc::oversize_download,
                            "archive exceeds download cap: " + event.archive_url);
        }
        body = std::move(*fetched);
        const std::size_t slash = event.archive_url.find_last_of('/');
        filename = slash == std::string::npos ? event.archive_url
                                              : event.archive_url.substr(slash + 1);
        if (filename.empty()) filename = event.name + ".archive";
    }

    if (sha256_out) *sha256_out = sha256_hex(body);
    const fs::path dest = dest_dir / filename;
    std::ofstream out(dest, std::ios::binary);
    out.write(body.data(), static_cast<std::streamsize>(body.size()));
    out.close();
    return dest;
}

}  // namespace pkgscan
