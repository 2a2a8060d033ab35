#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <atomic>
#include <fstream>

#include "fixtures.hpp"
#include "pkgscan/scanner.hpp"
#include "pkgscan/tuning.hpp"

using namespace pkgscan;
using pkgscan::testing::TempDir;

namespace {

// Trains one small GBT on synthetic data; reused across scanner tests.
TreeEnsembleModel fixture_model(const FeatureSchema& schema, const SensitiveDictionary& dict,
                                std::uint64_t seed = 100) {
    Dataset ds = pkgscan::testing::synth_dataset(seed, Ecosystem::npm, 40, 160, schema, dict);
    Dataset py = pkgscan::testing::synth_dataset(seed + 1, Ecosystem::pypi, 40, 160, schema,
                                                 dict);
    Dataset cross = merge_cross(ds, py);
    DataMatrix X;
    std::vector<int> y;
    X.cols = schema.size();
    for (const LabeledSample& s : cross.samples) {
        X.storage.insert(X.storage.end(), s.feature_vector.values.begin(),
                         s.feature_vector.values.end());
        y.push_back(s.label == Label::malicious ? 1 : 0);
        ++X.rows;
    }
    Hyperparams hp;
    hp.n_estimators = 40;
    hp.max_depth = 4;
    hp.learning_rate = 0.3;
    return train_gbt(X, y, hp, seed, schema);
}

}  // namespace

TEST_CASE("local feed: fresh cursor sees all drops, advanced cursor none") {
    TempDir tmp("feed");
    Rng rng(1);
    for (int i = 0; i < 3; ++i) {
        pkgscan::testing::write_synth_archive(tmp.path(), rng, Ecosystem::npm, false,
                                              "pkg-" + std::to_string(i));
    }
    LocalDirFeedSource source(tmp.path(), Ecosystem::npm);
    PollResult first = source.poll("");
    CHECK(first.events.size() == 3);
    CHECK(first.events[0].archive_url.rfind("file://", 0) == 0);

    PollResult second = source.poll(first.next_cursor);
    CHECK(second.events.empty());

    // a later drop that sorts after the cursor is picked up
    pkgscan::testing::write_synth_archive(tmp.path(), rng, Ecosystem::npm, false, "pkg-9");
    PollResult third = source.poll(first.next_cursor);
    CHECK(third.events.size() == 1);
    CHECK(third.events[0].name == "pkg");
}

TEST_CASE("pypi rss parsing: events, cursor, malformed items") {
    const std::string xml = R"(<?xml version="1.0"?>
<rss version="2.0"><channel>
  <item><title>newpkg 2.0.1</title><link>https://pypi.org/project/newpkg/2.0.1/</link><pubDate>Mon, 24 Oct 2022 10:00:00 GMT</pubDate></item>
  <item><title>badtitle</title><link>x</link></item>
  <item><title>oldpkg 1.0.0</title><link>https://pypi.org/project/oldpkg/1.0.0/</link><pubDate>Mon, 24 Oct 2022 09:00:00 GMT</pubDate></item>
</channel></rss>)";
    PollResult result = parse_pypi_rss(xml, "");
    CHECK(result.malformed == 1);
    REQUIRE(result.events.size() == 2);
    // oldest first
    CHECK(result.events[0].name == "oldpkg");
    CHECK(result.events[1].name == "newpkg");
    CHECK(result.events[1].version == "2.0.1");
    CHECK(result.next_cursor == "newpkg 2.0.1");

    // re-poll with the advanced cursor: nothing new
    PollResult again = parse_pypi_rss(xml, result.next_cursor);
    CHECK(again.events.empty());

    CHECK_THROWS_AS(parse_pypi_rss("not xml at all", ""), FeedError);
}

TEST_CASE("npm changes parsing: sequence cursor") {
    const std::string payload =
        R"({"results":[{"seq":5,"id":"alpha","changes":[]},{"seq":7,"id":"beta","changes":[]},{"seq":9,"noid":true}],"last_seq":9})";
    PollResult result = parse_npm_changes(payload, "");
    CHECK(result.malformed == 1);
    REQUIRE(result.events.size() == 2);
    CHECK(result.events[0].name == "alpha");
    CHECK(result.next_cursor == "9");

    PollResult later = parse_npm_changes(payload, "7");
    CHECK(later.events.empty());  // nothing newer than seq 7 with an id

    CHECK_THROWS_AS(parse_npm_changes("[1,2,3]", ""), FeedError);
}

TEST_CASE("fetch: file url round-trips bytes and enforces the cap") {
    TempDir tmp("fetch");
    const auto src = tmp.path() / "pkg-1.0.0.tgz";
    pkgscan::testing::write_tar_gz(src, {{"package/package.json", "{}"}});

    ArchiveFetcher fetcher([](const std::string&) { return std::nullopt; }, 1 << 20);
    FeedEvent event;
    event.ecosystem = Ecosystem::npm;
    event.name = "pkg";
    event.version = "1.0.0";
    event.archive_url = "file://" + std::filesystem::absolute(src).string();

    std::string sha;
    const auto dest = fetcher.fetch(event, tmp.path() / "dl", &sha);
    std::ifstream a(src, std::ios::binary), b(dest, std::ios::binary);
    std::stringstream sa, sb;
    sa << a.rdbuf();
    sb << b.rdbuf();
    CHECK(sa.str() == sb.str());
    CHECK(sha == sha256_hex(sa.str()));

    ArchiveFetcher tiny_cap([](const std::string&) { return std::nullopt; }, 8);
    try {
        tiny_cap.fetch(event, tmp.path() / "dl2");
        FAIL("expected OversizeDownload");
    } catch (const FeedError& e) {
        CHECK(e.code() == FeedErrc::oversize_download);
    }

    FeedEvent missing = event;
    missing.archive_url = "file:///does/not/exist.tgz";
    try {
        fetcher.fetch(missing, tmp.path() / "dl3");
        FAIL("expected DownloadFailed");
    } catch (const FeedError& e) {
        CHECK(e.code() == FeedErrc::download_failed);
        CHECK(e.retryable());
    }
}

TEST_CASE("fetch: http 404 surfaces as DownloadFailed") {
    ArchiveFetcher fetcher([](const std::string&) { return std::nullopt; }, 1 << 20);
    FeedEvent event;
    event.ecosystem = Ecosystem::npm;
    event.name = "gone";
    event.archive_url = "https://registry.example/gone.tgz";
    try {
        fetcher.fetch(event, std::filesystem::temp_directory_path() / "pkgscan-404");
        FAIL("expected DownloadFailed");
    } catch (const FeedError& e) {
        CHECK(e.code() == FeedErrc::download_failed);
    }
}

TEST_CASE("resolve: registry metadata fills url and version") {
    // canned npm + pypi metadata served by a stub getter
    const auto getter = [](const std::string& url) -> std::optional<std::string> {
        if (url == "https://registry.npmjs.org/leftpad") {
            return std::string(
                R"({"dist-tags":{"latest":"1.2.0"},"versions":{"1.2.0":{"dist":{"tarball":"https://registry.npmjs.org/leftpad/-/leftpad-1.2.0.tgz"}}}})");
        }
        if (url == "https://pypi.org/pypi/demo/0.1/json") {
            return std::string(
                R"({"info":{"version":"0.1"},"urls":[{"packagetype":"bdist_wheel","url":"https://files.example/demo-0.1-py3-none-any.whl"},{"packagetype":"sdist","url":"https://files.example/demo-0.1.tar.gz"}]})");
        }
        return std::nullopt;
    };
    ArchiveFetcher fetcher(getter, 1 << 20);

    FeedEvent npm_event;
    npm_event.ecosystem = Ecosystem::npm;
    npm_event.name = "leftpad";
    fetcher.resolve(npm_event);
    CHECK(npm_event.version == "1.2.0");
    CHECK(npm_event.archive_url ==
          "https://registry.npmjs.org/leftpad/-/leftpad-1.2.0.tgz");

    FeedEvent pypi_event;
    pypi_event.ecosystem = Ecosystem::pypi;
    pypi_event.name = "demo";
    pypi_event.version = "0.1";
    fetcher.resolve(pypi_event);
    CHECK(pypi_event.archive_url == "https://files.example/demo-0.1.tar.gz");  // sdist wins
}

TEST_CASE("scan_package: benign, malicious, corrupt") {
    TempDir tmp("scanpkg");
    const FeatureSchema& schema = FeatureSchema::builtin();
    SensitiveDictionary dict = expand_dictionary(SensitiveDictionary::builtin_keywords());
    TreeEnsembleModel model = fixture_model(schema, dict);
    std::vector<ModelEntry> models;
    models.push_back(ModelEntry{"cross-gbt", model});

    Rng rng(500);
    const auto benign = pkgscan::testing::write_synth_archive(tmp.path(), rng, Ecosystem::npm,
                                                              false, "good-1.0.0");
    const auto mal = pkgscan::testing::write_synth_archive(tmp.path(), rng, Ecosystem::npm,
                                                           true, "bad-1.0.0");
    const auto corrupt = tmp.path() / "corrupt-1.0.0.tgz";
    pkgscan::testing::write_corrupt_archive(corrupt);

    ScanVerdict vb = scan_package(benign, Ecosystem::npm, models, schema, dict);
    CHECK(vb.disposition == ScanDisposition::ok);
    CHECK_FALSE(vb.flagged);
    REQUIRE(vb.models.size() == 1);
    CHECK(vb.models[0].probability <= 0.5);
    CHECK(vb.top_features.empty());

    ScanVerdict vm = scan_package(mal, Ecosystem::npm, models, schema, dict);
    CHECK(vm.disposition == ScanDisposition::ok);
    CHECK(vm.flagged);
    CHECK(vm.models[0].probability > 0.5);
    CHECK_FALSE(vm.top_features.empty());
    CHECK(vm.schema_hash == schema.content_hash());

    ScanVerdict vc = scan_package(corrupt, Ecosystem::npm, models, schema, dict);
    CHECK(vc.disposition == ScanDisposition::ingest_error);
    CHECK(vc.models.empty());
    CHECK_FALSE(vc.flagged);
}

TEST_CASE("scan_package with two attached models carries both probabilities") {
    TempDir tmp("twomodels");
    const FeatureSchema& schema = FeatureSchema::builtin();
    SensitiveDictionary dict = expand_dictionary(SensitiveDictionary::builtin_keywords());
    std::vector<ModelEntry> models;
    models.push_back(ModelEntry{"mono", fixture_model(schema, dict, 200)});
    models.push_back(ModelEntry{"cross", fixture_model(schema, dict, 300)});
    Rng rng(77);
    const auto archive = pkgscan::testing::write_synth_archive(tmp.path(), rng,
                                                               Ecosystem::npm, true, "m-1.0");
    ScanVerdict v = scan_package(archive, Ecosystem::npm, models, schema, dict);
    REQUIRE(v.models.size() == 2);
    CHECK(v.models[0].model_id == "mono");
    CHECK(v.models[1].model_id == "cross");
    CHECK(v.models[0].probability >= 0.0);
    CHECK(v.models[1].probability <= 1.0);
    // flag-if-any rule
    CHECK(v.flagged == (v.models[0].malicious || v.models[1].malicious));
}

TEST_CASE("scan_package rejects models with foreign schema hashes") {
    TempDir tmp("hashchk");
    const FeatureSchema& schema = FeatureSchema::builtin();
    SensitiveDictionary dict = expand_dictionary(SensitiveDictionary::builtin_keywords());
    TreeEnsembleModel model = fixture_model(schema, dict);
    model.schema_hash = "feedfeedfeedfeed";
    std::vector<ModelEntry> models{ModelEntry{"m", model}};
    Rng rng(7);
    const auto archive =
        pkgscan::testing::write_synth_archive(tmp.path(), rng, Ecosystem::npm, false, "x-1");
    CHECK_THROWS_AS(scan_package(archive, Ecosystem::npm, models, schema, dict), ModelError);
}

TEST_CASE("verdict json round-trip") {
    ScanVerdict v;
    v.ecosystem = Ecosystem::pypi;
    v.name = "pkg";
    v.version = "1.2.3";
    v.disposition = ScanDisposition::ok;
    v.models = {{"mono", 0.25, false}, {"cross", 0.75, true}};
    v.flagged = true;
    v.top_features = {{"has_install_hook", 0.5}, {"base64_string_count", 0.25}};
    v.schema_hash = "abc";
    v.scanned_at = "2026-01-01T00:00:00Z";
    v.archive_format = "sdist";
    v.truncation = true;
    v.lex_error = false;
    v.content_sha256 = "deadbeef";
    ScanVerdict round = verdict_from_json(verdict_to_json(v));
    CHECK(round.ecosystem == v.ecosystem);
    CHECK(round.name == v.name);
    CHECK(round.version == v.version);
    CHECK(round.models.size() == 2);
    CHECK(round.models[1].probability == 0.75);
    CHECK(round.models[1].malicious);
    CHECK(round.flagged);
    CHECK(round.top_features == v.top_features);
    CHECK(round.truncation);
    CHECK(round.content_sha256 == "deadbeef");
}

TEST_CASE("run_watch: 20 fixtures, at-most-once, summary totals, crash-resume") {
    TempDir tmp("watch");
    namespace fs = std::filesystem;
    const FeatureSchema& schema = FeatureSchema::builtin();
    SensitiveDictionary dict = expand_dictionary(SensitiveDictionary::builtin_keywords());
    TreeEnsembleModel model = fixture_model(schema, dict);
    std::vector<ModelEntry> models{ModelEntry{"cross-gbt", model}};

    const fs::path feed_dir = tmp.path() / "feed";
    fs::create_directories(feed_dir);
    Rng rng(900);
    int expected_flagged = 0;
    for (int i = 0; i < 18; ++i) {
        const bool mal = i % 9 == 0;  // 2 malicious fixtures
        expected_flagged += mal;
        char name[32];
        std::snprintf(name, sizeof(name), "pkg%02d-1.0.%d", i, i);
        pkgscan::testing::write_synth_archive(feed_dir, rng, Ecosystem::npm, mal, name);
    }
    pkgscan::testing::write_corrupt_archive(feed_dir / "pkgxx-1.0.98.tgz");
    {
        // oversize: larger than the download cap set below
        std::ofstream big(feed_dir / "pkgyy-1.0.99.tgz", std::ios::binary);
        std::string junk(256 * 1024, 'x');
        big.write(junk.data(), static_cast<std::streamsize>(junk.size()));
    }

    std::vector<std::unique_ptr<FeedSource>> sources;
    sources.push_back(std::make_unique<LocalDirFeedSource>(feed_dir, Ecosystem::npm));

    VerdictSink sink(tmp.path() / "out" / "scan.jsonl");
    ScanState state(tmp.path() / "state");
    ArchiveFetcher fetcher([](const std::string&) { return std::nullopt; }, 128 * 1024);
    std::atomic<bool> stop{false};
    WatchOptions options;
    options.max_cycles = 1;
    options.workers = 4;
    options.download_cap = 128 * 1024;
    options.fixed_scanned_at = "2026-08-10T00:00:00Z";
    options.download_dir = tmp.path() / "dl";

    RunSummary summary = run_watch(sources, models, schema, dict, fetcher, sink, state, stop,
                                   options);
    CHECK(summary.scanned() == 20);
    CHECK(summary.flagged() == std::uint64_t(expected_flagged));
    CHECK(summary.errors() == 2);  // corrupt + oversize
    const auto verdicts = read_sink(sink.path());
    CHECK(verdicts.size() == 20);

    // per-run at-most-once: no triple repeats
    std::set<std::string> triples;
    for (const ScanVerdict& v : verdicts) {
        CHECK(triples.insert(v.name + "@" + v.version).second);
    }

    // crash-resume: a new run with the persisted state emits nothing new
    VerdictSink sink2(tmp.path() / "out" / "scan2.jsonl");
    ScanState state2(tmp.path() / "state");
    std::atomic<bool> stop2{false};
    RunSummary resumed = run_watch(sources, models, schema, dict, fetcher, sink2, state2,
                                   stop2, options);
    CHECK(resumed.scanned() == 0);
    const bool sink2_has_records =
        fs::exists(sink2.path()) && !read_sink(sink2.path()).empty();
    CHECK_FALSE(sink2_has_records);
}

TEST_CASE("run_watch: stop signal drains started work") {
    TempDir tmp("drain");
    namespace fs = std::filesystem;
    const FeatureSchema& schema = FeatureSchema::builtin();
    SensitiveDictionary dict = expand_dictionary(SensitiveDictionary::builtin_keywords());
    TreeEnsembleModel model = fixture_model(schema, dict, 321);
    std::vector<ModelEntry> models{ModelEntry{"m", model}};

    const fs::path feed_dir = tmp.path() / "feed";
    fs::create_directories(feed_dir);
    Rng rng(42);
    for (int i = 0; i < 6; ++i) {
        pkgscan::testing::write_synth_archive(feed_dir, rng, Ecosystem::npm, false,
                                              "p" + std::to_string(i) + "-1.0." +
                                                  std::to_string(i));
    }
    std::vector<std::unique_ptr<FeedSource>> sources;
    sources.push_back(std::make_unique<LocalDirFeedSource>(feed_dir, Ecosystem::npm));
    VerdictSink sink(tmp.path() / "scan.jsonl");
    ScanState state(tmp.path() / "state");
    ArchiveFetcher fetcher([](const std::string&) { return std::nullopt; }, 1 << 20);
    std::atomic<bool> stop{true};  // raised before the run starts
    WatchOptions options;
    options.max_cycles = 3;
    options.fixed_scanned_at = "2026-08-10T00:00:00Z";
    options.download_dir = tmp.path() / "dl";
    RunSummary summary = run_watch(sources, models, schema, dict, fetcher, sink, state, stop,
                                   options);
    // stop observed before the first cycle: nothing started, nothing lost,
    // cursors still persisted
    CHECK(summary.scanned() == 0);
    CHECK(fs::exists(tmp.path() / "state" / "cursors.json"));
}
