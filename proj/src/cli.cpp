#include "pkgscan/cli.hpp"

#include <atomic>
#include <csignal>
#include <cstdlib>
#include <fstream>
#include <iostream>

#include <CLI11.hpp>
#include <json.hpp>

#include "pkgscan/dataset.hpp"
#include "pkgscan/feature_csv.hpp"
#include "pkgscan/features.hpp"
#include "pkgscan/ingest.hpp"
#include "pkgscan/models.hpp"
#include "pkgscan/scanner.hpp"
#include "pkgscan/tuning.hpp"
#include "pkgscan/util.hpp"

namespace pkgscan::cli {

namespace {

namespace fs = std::filesystem;

constexpr int kExitOk = 0;
constexpr int kExitPartial = 2;
constexpr int kExitUsage = 64;       // EX_USAGE
constexpr int kExitNoInput = 66;     // EX_NOINPUT
constexpr int kExitInternal = 70;    // EX_SOFTWARE
constexpr int kExitIo = 74;          // EX_IOERR

std::atomic<bool> g_stop{false};

void handle_signal(int) { g_stop.store(true); }

struct Common {
    std::string schema_path;
    std::string dict_path;
    std::uint64_t seed = 0;

    FeatureSchema schema() const {
        return schema_path.empty() ? FeatureSchema::builtin() : FeatureSchema::load(schema_path);
    }
    SensitiveDictionary dictionary() const {
        const auto keywords = dict_path.empty()
                                  ? SensitiveDictionary::builtin_keywords()
                                  : SensitiveDictionary::load_keywords(dict_path);
        return expand_dictionary(keywords);
    }
};

void add_common(CLI::App* cmd, Common& common) {
    cmd->add_option("--schema", common.schema_path, "Feature schema JSON (default: built-in)");
    cmd->add_option("--dict", common.dict_path,
                    "Suspicious-keyword file, one per line (default: built-in)");
    cmd->add_option("--seed", common.seed, "RNG seed (all randomness derives from it)");
}

bool looks_like_archive(const fs::path& p) {
    const std::string name = ascii_lower(p.filename().string());
    for (std::string_view suffix : {".tgz", ".tar.gz", ".whl", ".zip"}) {
        if (name.size() > suffix.size() &&
            name.compare(name.size() - suffix.size(), suffix.size(), suffix) == 0) {
            return true;
        }
    }
    return false;
}

Hyperparams load_hp_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) {
        throw std::invalid_argument("cannot open hyperparameter file: " + path);
    }
    nlohmann::json doc = nlohmann::json::parse(in, nullptr, false);
    if (doc.is_discarded() || !doc.is_object()) {
        throw std::invalid_argument("hyperparameter file is not a JSON object: " + path);
    }
    return hyperparams_from_json(doc);
}

std::string pct(const MeanStd& ms) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.1f+-%.1f", ms.mean * 100.0, ms.stddev * 100.0);
    return buf;
}

void print_cv_report(std::ostream& out, std::string_view learner, const CVResult& result) {
    const auto line = [&](std::string_view scope, const MetricsReport& r) {
        out << learner << "\t" << scope << "\tPr=" << pct(r.precision)
            << "\tRec=" << pct(r.recall) << "\tF1=" << pct(r.f1)
            << "\tAcc=" << pct(r.accuracy) << "\tn=" << r.evaluations << "\n";
    };
    line("overall", result.overall);
    for (const auto& [eco, report] : result.per_ecosystem) {
        line(ecosystem_name(eco), report);
    }
}

// ---------------------------------------------------------------- extract

struct ExtractArgs {
    Common common;
    std::string input;
    std::string ecosystem;
    std::string out;
    std::string label = "-";
};

int cmd_extract(const ExtractArgs& args) {
    const FeatureSchema schema = args.common.schema();
    const SensitiveDictionary dict = args.common.dictionary();
    const Ecosystem eco = ecosystem_from_name(args.ecosystem);

    std::vector<fs::path> archives;
    if (fs::is_directory(args.input)) {
        for (const auto& entry : fs::recursive_directory_iterator(args.input)) {
            if (entry.is_regular_file() && looks_like_archive(entry.path())) {
                archives.push_back(entry.path());
            }
        }
        std::sort(archives.begin(), archives.end());
    } else if (fs::exists(args.input)) {
        archives.push_back(args.input);
    } else {
        std::cerr << "pkgscan: no such input: " << args.input << "\n";
        return kExitNoInput;
    }

    std::ofstream out(args.out);
    if (!out) {
        std::cerr << "pkgscan: cannot write " << args.out << "\n";
        return kExitIo;
    }
    write_feature_csv_header(out, schema);

    std::optional<int> label;
    if (args.label == "0") label = 0;
    else if (args.label == "1") label = 1;

    std::size_t failures = 0;
    for (const fs::path& archive : archives) {
        FeatureRow row;
        row.ecosystem = eco;
        row.label = label;
        auto [name, version] = parse_name_version(archive.filename().string());
        row.name = std::move(name);
        row.version = std::move(version);
        try {
            const PackageArtifact artifact = open_archive(archive, eco);
            row.vector = extract_features(artifact, schema, dict);
        } catch (const IngestError& e) {
            ++failures;
            out << "# error " << archive.string() << ": " << e.what() << "\n";
            row.label = std::nullopt;
            row.vector.schema_version = schema.version;
            row.vector.values.assign(schema.size(), 0.0);
        }
        write_feature_csv_row(out, row);
    }
    std::cerr << "extracted " << archives.size() - failures << "/" << archives.size()
              << " packages\n";
    return failures > 0 ? kExitPartial : kExitOk;
}

// ----------------------------------------------------------- build-dataset

struct BuildArgs {
    Common common;
    std::string malicious_dir;
    std::string benign_dir;
    std::string campaign_map;
    std::string out;
    std::string provenance_out;
    std::string distribution_out;
    double ratio = 0.9;
};

int cmd_build_dataset(const BuildArgs& args) {
    const FeatureSchema schema = args.common.schema();
    const SensitiveDictionary dict = args.common.dictionary();

    std::map<std::string, std::string> campaigns;
    if (!args.campaign_map.empty()) {
        campaigns = load_campaign_map(args.campaign_map);
    }

    CorpusScanResult malicious =
        scan_corpus_tree(args.malicious_dir, Label::malicious, schema, dict, campaigns);
    CorpusScanResult benign =
        scan_corpus_tree(args.benign_dir, Label::benign, schema, dict);

    const std::size_t before = malicious.samples.size();
    std::vector<LabeledSample> deduped = dedup_malicious(std::move(malicious.samples));
    Dataset ds = assemble(std::move(benign.samples), std::move(deduped), args.ratio);

    save_dataset_csv(ds, schema, args.out);

    std::ostringstream prov;
    prov << "schema_version: " << schema.version << "\n"
         << "schema_hash: " << schema.content_hash() << "\n"
         << "malicious_dir: " << args.malicious_dir << " (" << before << " scanned, "
         << ds.count(Label::malicious) << " after dedup)\n"
         << "benign_dir: " << args.benign_dir << " (" << ds.count(Label::benign)
         << " kept at ratio " << args.ratio << ")\n";
    for (const std::string& err : malicious.errors) prov << "error: " << err << "\n";
    for (const std::string& err : benign.errors) prov << "error: " << err << "\n";
    if (!args.provenance_out.empty()) {
        std::ofstream pout(args.provenance_out);
        pout << prov.str();
    }
    if (!args.distribution_out.empty()) {
        std::ofstream dout(args.distribution_out);
        write_distribution_csv(dout, feature_distribution_report(ds, schema));
    }
    std::cerr << prov.str();
    return malicious.errors.empty() && benign.errors.empty() ? kExitOk : kExitPartial;
}

// ------------------------------------------------------------------ train

struct TrainArgs {
    Common common;
    std::string data;
    std::string learner = "gbt";
    std::string hp_file;
    std::string out;
    double threshold = 0.5;
};

int cmd_train(const TrainArgs& args) {
    const FeatureSchema schema = args.common.schema();
    const Dataset ds = load_dataset_csv(args.data, schema);
    if (ds.samples.empty()) {
        std::cerr << "pkgscan: dataset has no labeled samples\n";
        return kExitNoInput;
    }
    Hyperparams hp;
    if (!args.hp_file.empty()) hp = load_hp_file(args.hp_file);

    DataMatrix X;
    std::vector<int> y;
    X.cols = schema.size();
    for (const LabeledSample& s : ds.samples) {
        X.storage.insert(X.storage.end(), s.feature_vector.values.begin(),
                         s.feature_vector.values.end());
        y.push_back(s.label == Label::malicious ? 1 : 0);
        ++X.rows;
    }

    const LearnerKind kind = learner_from_name(args.learner);
    TreeEnsembleModel model;
    switch (kind) {
    case LearnerKind::dt: model = train_dt(X, y, hp, args.common.seed, schema); break;
    case LearnerKind::rf: model = train_rf(X, y, hp, args.common.seed, schema); break;
    case LearnerKind::gbt: model = train_gbt(X, y, hp, args.common.seed, schema); break;
    }
    model.decision_threshold = args.threshold;
    if (model.degenerate) {
        std::cerr << "warning: training data contains a single class; "
                     "model is a flagged constant\n";
    }
    save_model(model, args.out);
    std::cerr << "wrote " << learner_name(kind) << " model (" << model.trees.size()
              << " trees) to " << args.out << "\n";
    return kExitOk;
}

// --------------------------------------------------------------- evaluate

struct EvaluateArgs {
    Common common;
    std::string data;
    std::string learner = "all";
    std::string hp_file;
    std::string out;
    int k = 5;
    int repeats = 10;
};

int cmd_evaluate(const EvaluateArgs& args) {
    const FeatureSchema schema = args.common.schema();
    const Dataset ds = load_dataset_csv(args.data, schema);
    Hyperparams hp;
    if (!args.hp_file.empty()) hp = load_hp_file(args.hp_file);

    CVConfig cv;
    cv.k = args.k;
    cv.repeats = args.repeats;
    cv.seed = args.common.seed;

    std::vector<LearnerKind> kinds;
    if (args.learner == "all") {
        kinds = {LearnerKind::dt, LearnerKind::rf, LearnerKind::gbt};
    } else {
        kinds = {learner_from_name(args.learner)};
    }

    std::ostringstream report;
    report << "# cross-validation report\n"
           << "# dataset: " << args.data << " (" << ds.samples.size() << " samples, "
           << ds.count(Label::malicious) << " malicious / " << ds.count(Label::benign)
           << " benign)\n"
           << "# k=" << cv.k << " repeats=" << cv.repeats << " seed=" << cv.seed << "\n";
    for (LearnerKind kind : kinds) {
        const CVResult result = cross_validate(ds, kind, hp, cv);
        print_cv_report(report, learner_name(kind), result);
    }

    if (args.out.empty()) {
        std::cout << report.str();
    } else {
        std::ofstream out(args.out);
        if (!out) {
            std::cerr << "pkgscan: cannot write " << args.out << "\n";
            return kExitIo;
        }
        out << report.str();
    }
    return kExitOk;
}

// ------------------------------------------------------------------- tune

struct TuneArgs {
    Common common;
    std::string data;
    std::string learner = "gbt";
    std::string space_file;
    std::string strategy = "smbo";
    std::string out_hp;
    std::string trial_log;
    int budget = 50;
    int k = 5;
    int repeats = 1;
};

int cmd_tune(const TuneArgs& args) {
    const FeatureSchema schema = args.common.schema();
    const Dataset ds = load_dataset_csv(args.data, schema);
    const LearnerKind kind = learner_from_name(args.learner);
    const SearchSpace space = args.space_file.empty() ? SearchSpace::defaults(kind)
                                                      : SearchSpace::load(args.space_file);
    CVConfig cv;
    cv.k = args.k;
    cv.repeats = args.repeats;
    cv.seed = args.common.seed;

    const TuneResult result = optimize_hyperparams(
        ds, kind, space, args.budget, strategy_from_name(args.strategy), cv, args.common.seed);

    std::cout << "best trial: precision " << pct(result.best_report.precision) << ", recall "
              << pct(result.best_report.recall) << "\n"
              << hyperparams_to_json(result.best_hp).dump(2) << "\n";
    if (!args.out_hp.empty()) {
        std::ofstream out(args.out_hp);
        out << hyperparams_to_json(result.best_hp).dump(2) << "\n";
    }
    if (!args.trial_log.empty()) {
        std::ofstream out(args.trial_log);
        write_trial_log(out, result.log);
    }
    return kExitOk;
}

// ------------------------------------------------------------ scan / watch

constexpr const char* kDefaultSinkDir = ".";
constexpr const char* kDefaultStateDir = "pkgscan-state";
constexpr int kDefaultWorkers = 8;

struct ScanArgs {
    Common common;
    std::string config_path;
    std::string feed_dir;
    std::string ecosystem = "npm";
    std::vector<std::string> model_paths;
    std::string sink_path;
    std::string sink_dir = kDefaultSinkDir;
    std::string state_dir = kDefaultStateDir;
    std::string now_override;
    int workers = kDefaultWorkers;
    int max_cycles = -1;  // watch: unlimited; scan forces 1
    int interval = 900;
};

struct ScanSetup {
    std::vector<std::unique_ptr<FeedSource>> sources;
    std::vector<ModelEntry> models;
    FeatureSchema schema;
    SensitiveDictionary dict;
    WatchOptions options;
    fs::path sink_path;
    fs::path state_dir;
};

ScanSetup prepare_scan(ScanArgs args) {
    // config file (flag or PKGSCAN_CONFIG) provides defaults; flags win
    std::string config_path = args.config_path;
    if (config_path.empty()) {
        if (const char* env = std::getenv("PKGSCAN_CONFIG")) config_path = env;
    }
    nlohmann::json config = nlohmann::json::object();
    if (!config_path.empty()) {
        std::ifstream in(config_path);
        if (!in) {
            throw std::invalid_argument("cannot open config file: " + config_path);
        }
        config = nlohmann::json::parse(in);
    }

    ScanSetup setup;
    if (args.common.schema_path.empty() && config.contains("schema")) {
        args.common.schema_path = config["schema"].get<std::string>();
    }
    if (args.common.dict_path.empty() && config.contains("dictionary")) {
        args.common.dict_path = config["dictionary"].get<std::string>();
    }
    setup.schema = args.common.schema();
    setup.dict = args.common.dictionary();

    if (args.model_paths.empty() && config.contains("models")) {
        args.model_paths = config["models"].get<std::vector<std::string>>();
    }
    if (args.model_paths.empty()) {
        throw std::invalid_argument("no models given (use --model or a config file)");
    }
    for (const std::string& path : args.model_paths) {
        if (!fs::exists(path)) {
            throw FeedError(FeedErrc::download_failed, "model file missing: " + path);
        }
        ModelEntry entry;
        entry.model_id = fs::path(path).stem().string();
        entry.model = load_model(path, setup.schema);
        setup.models.push_back(std::move(entry));
    }

    HttpOptions http;
    const HttpGetFn getter = make_http_client(http);
    if (!args.feed_dir.empty()) {
        setup.sources.push_back(std::make_unique<LocalDirFeedSource>(
            fs::path(args.feed_dir), ecosystem_from_name(args.ecosystem), args.interval));
    }
    if (config.contains("sources")) {
        for (const nlohmann::json& src : config["sources"]) {
            const std::string kind = src.at("kind").get<std::string>();
            const int interval = src.value("interval_seconds", args.interval);
            if (kind == "local") {
                setup.sources.push_back(std::make_unique<LocalDirFeedSource>(
                    fs::path(src.at("path").get<std::string>()),
                    ecosystem_from_name(src.value("ecosystem", "npm")), interval));
            } else if (kind == "pypi-rss") {
                setup.sources.push_back(std::make_unique<PyPiFeedSource>(
                    src.value("url", "https://pypi.org/rss/packages.xml"), getter, interval));
            } else if (kind == "npm-changes") {
                setup.sources.push_back(std::make_unique<NpmFeedSource>(
                    src.value("url", "https://replicate.npmjs.com/_changes"), getter,
                    interval));
            } else {
                throw std::invalid_argument("unknown feed source kind: " + kind);
            }
        }
    }
    if (setup.sources.empty()) {
        throw std::invalid_argument("no feed sources configured");
    }

    // explicit flags beat config values, which beat the built-in defaults
    setup.options.workers =
        args.workers != kDefaultWorkers ? args.workers : config.value("workers", args.workers);
    setup.options.max_cycles = args.max_cycles;
    setup.options.download_cap = config.value("download_cap_bytes", 256ull << 20);
    setup.options.limits.total_decompressed_cap =
        config.value("total_decompressed_cap_bytes", 256ull << 20);
    setup.options.limits.per_file_cap = config.value("per_file_cap_bytes", 16ull << 20);
    setup.options.fixed_scanned_at = args.now_override;

    setup.state_dir = args.state_dir != kDefaultStateDir
                          ? args.state_dir
                          : config.value("state_dir", args.state_dir);
    if (!args.sink_path.empty()) {
        setup.sink_path = args.sink_path;
    } else {
        const std::string dir = args.sink_dir != kDefaultSinkDir
                                    ? args.sink_dir
                                    : config.value("sink_dir", args.sink_dir);
        const std::string date = args.now_override.empty()
                                     ? iso8601_utc_now().substr(0, 10)
                                     : args.now_override.substr(0, 10);
        const std::string run_id =
            to_hex(mix_seed(args.common.seed, 0x5eedULL)).substr(0, 8);
        setup.sink_path = fs::path(dir) / ("scan-" + date + "-" + run_id + ".jsonl");
    }
    setup.options.download_dir = setup.state_dir / "downloads";
    return setup;
}

int run_scan_loop(const ScanArgs& args, bool watch_mode) {
    ScanSetup setup = prepare_scan(args);
    VerdictSink sink(setup.sink_path);
    ScanState state(setup.state_dir);
    ArchiveFetcher fetcher(make_http_client(HttpOptions{}), setup.options.download_cap);

    if (!watch_mode) setup.options.max_cycles = 1;
    g_stop.store(false);
    if (watch_mode) {
        std::signal(SIGINT, handle_signal);
        std::signal(SIGTERM, handle_signal);
    }

    const RunSummary summary = run_watch(setup.sources, setup.models, setup.schema, setup.dict,
                                         fetcher, sink, state, g_stop, setup.options);

    std::cout << "sink: " << sink.path().string() << "\n";
    for (const auto& [eco, counts] : summary.per_ecosystem) {
        std::cout << ecosystem_name(eco) << ": scanned=" << counts.scanned
                  << " flagged=" << counts.flagged << " errors=" << counts.errors << "\n";
    }
    std::cout << "total: scanned=" << summary.scanned() << " flagged=" << summary.flagged()
              << " errors=" << summary.errors() << "\n";
    return kExitOk;
}

// ----------------------------------------------------------------- report

struct ReportArgs {
    std::vector<std::string> sinks;
    std::string out;
};

int cmd_report(const ReportArgs& args) {
    struct Row {
        std::uint64_t benign = 0, flagged = 0;
    };
    std::map<std::string, std::map<Ecosystem, Row>> by_model;
    std::map<Ecosystem, std::uint64_t> error_counts;
    for (const std::string& sink : args.sinks) {
        if (!fs::exists(sink)) {
            std::cerr << "pkgscan: no such sink: " << sink << "\n";
            return kExitNoInput;
        }
        for (const ScanVerdict& v : read_sink(sink)) {
            if (v.disposition != ScanDisposition::ok) {
                ++error_counts[v.ecosystem];
                continue;
            }
            for (const ModelVerdict& m : v.models) {
                Row& row = by_model[m.model_id][v.ecosystem];
                if (m.malicious) {
                    ++row.flagged;
                } else {
                    ++row.benign;
                }
            }
        }
    }

    std::ostringstream table;
    table << "model,ecosystem,benign,flagged\n";
    for (const auto& [model, per_eco] : by_model) {
        for (const auto& [eco, row] : per_eco) {
            table << model << ',' << ecosystem_name(eco) << ',' << row.benign << ','
                  << row.flagged << "\n";
        }
    }
    for (const auto& [eco, count] : error_counts) {
        table << "-," << ecosystem_name(eco) << ",errors," << count << "\n";
    }
    if (args.out.empty()) {
        std::cout << table.str();
    } else {
        std::ofstream out(args.out);
        out << table.str();
    }
    return kExitOk;
}

}  // namespace

int run(int argc, const char* const* argv) {
    CLI::App app{"Cross-ecosystem malicious package detector"};
    app.require_subcommand(1);

    ExtractArgs extract_args;
    CLI::App* extract = app.add_subcommand("extract", "Extract feature vectors from archives");
    extract->add_option("input", extract_args.input, "Archive file or directory")->required();
    extract->add_option("--ecosystem", extract_args.ecosystem, "npm or pypi")
        ->required()
        ->check(CLI::IsMember({"npm", "pypi"}));
    extract->add_option("--out", extract_args.out, "Output feature CSV")->required();
    extract->add_option("--label", extract_args.label, "Label for all rows: 0, 1 or -")
        ->check(CLI::IsMember({"0", "1", "-"}));
    add_common(extract, extract_args.common);

    BuildArgs build_args;
    CLI::App* build = app.add_subcommand("build-dataset",
                                         "Assemble a labeled dataset from corpus trees");
    build->add_option("--malicious-dir", build_args.malicious_dir,
                      "Tree: <eco>/<name>/<version>/<archive>")->required();
    build->add_option("--benign-dir", build_args.benign_dir, "Benign tree, same layout")
        ->required();
    build->add_option("--campaign-map", build_args.campaign_map,
                      "name<TAB>campaign_id lines");
    build->add_option("--ratio", build_args.ratio, "Benign share of the dataset (default 0.9)");
    build->add_option("--out", build_args.out, "Output dataset CSV")->required();
    build->add_option("--provenance-out", build_args.provenance_out, "Provenance manifest");
    build->add_option("--distribution-out", build_args.distribution_out,
                      "Per-feature distribution statistics CSV");
    add_common(build, build_args.common);

    TrainArgs train_args;
    CLI::App* train = app.add_subcommand("train", "Train a model on a dataset CSV");
    train->add_option("--data", train_args.data, "Dataset CSV")->required();
    train->add_option("--learner", train_args.learner, "dt, rf or gbt")
        ->check(CLI::IsMember({"dt", "rf", "gbt"}));
    train->add_option("--hp", train_args.hp_file, "Hyperparameter JSON file");
    train->add_option("--out", train_args.out, "Output model file")->required();
    train->add_option("--threshold", train_args.threshold, "Decision threshold (default 0.5)");
    add_common(train, train_args.common);

    EvaluateArgs eval_args;
    CLI::App* evaluate = app.add_subcommand("evaluate",
                                            "Repeated stratified cross-validation report");
    evaluate->add_option("--data", eval_args.data, "Dataset CSV")->required();
    evaluate->add_option("--learner", eval_args.learner, "dt, rf, gbt or all")
        ->check(CLI::IsMember({"dt", "rf", "gbt", "all"}));
    evaluate->add_option("--hp", eval_args.hp_file, "Hyperparameter JSON file");
    evaluate->add_option("--k", eval_args.k, "Folds (default 5)");
    evaluate->add_option("--repeats", eval_args.repeats, "Repetitions (default 10)");
    evaluate->add_option("--out", eval_args.out, "Report file (default stdout)");
    add_common(evaluate, eval_args.common);

    TuneArgs tune_args;
    CLI::App* tune = app.add_subcommand("tune", "Precision-maximizing hyperparameter search");
    tune->add_option("--data", tune_args.data, "Dataset CSV")->required();
    tune->add_option("--learner", tune_args.learner, "dt, rf or gbt")
        ->check(CLI::IsMember({"dt", "rf", "gbt"}));
    tune->add_option("--space", tune_args.space_file, "Search-space JSON (default: built-in)");
    tune->add_option("--strategy", tune_args.strategy, "smbo or random")
        ->check(CLI::IsMember({"smbo", "random"}));
    tune->add_option("--budget", tune_args.budget, "Trial budget (default 50)");
    tune->add_option("--k", tune_args.k, "Folds per trial (default 5)");
    tune->add_option("--repeats", tune_args.repeats, "CV repetitions per trial (default 1)");
    tune->add_option("--out-hp", tune_args.out_hp, "Write the best hyperparameters here");
    tune->add_option("--trial-log", tune_args.trial_log, "Line-delimited trial log");
    add_common(tune, tune_args.common);

    ScanArgs scan_args;
    CLI::App* scan = app.add_subcommand("scan", "Single pass over the configured feeds");
    ScanArgs watch_args;
    CLI::App* watch = app.add_subcommand("watch", "Poll feeds until interrupted");
    for (auto& [cmd, args_ref] :
         std::initializer_list<std::pair<CLI::App*, ScanArgs*>>{{scan, &scan_args},
                                                                {watch, &watch_args}}) {
        cmd->add_option("--config", args_ref->config_path,
                        "Config JSON (or PKGSCAN_CONFIG env var)");
        cmd->add_option("--feed-dir", args_ref->feed_dir, "Local directory feed");
        cmd->add_option("--ecosystem", args_ref->ecosystem, "Ecosystem of --feed-dir")
            ->check(CLI::IsMember({"npm", "pypi"}));
        cmd->add_option("--model", args_ref->model_paths, "Model file (repeatable)");
        cmd->add_option("--sink", args_ref->sink_path, "Verdict sink file (overrides naming)");
        cmd->add_option("--sink-dir", args_ref->sink_dir, "Directory for named sinks");
        cmd->add_option("--state-dir", args_ref->state_dir, "Cursor / dedup state directory");
        cmd->add_option("--now", args_ref->now_override,
                        "Fixed ISO timestamp for reproducible output");
        cmd->add_option("--workers", args_ref->workers, "Concurrent packages (default 8)");
        add_common(cmd, args_ref->common);
    }
    watch->add_option("--max-cycles", watch_args.max_cycles, "Stop after N poll cycles");
    watch->add_option("--interval", watch_args.interval, "Poll interval seconds (default 900)");

    ReportArgs report_args;
    CLI::App* report = app.add_subcommand("report", "Summarize one or more verdict sinks");
    report->add_option("sinks", report_args.sinks, "Sink files")->required();
    report->add_option("--out", report_args.out, "Report file (default stdout)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        std::cout << app.help();
        return kExitOk;
    } catch (const CLI::ParseError& e) {
        std::cerr << e.what() << "\n";
        return kExitUsage;
    }

    try {
        if (extract->parsed()) return cmd_extract(extract_args);
        if (build->parsed()) return cmd_build_dataset(build_args);
        if (train->parsed()) return cmd_train(train_args);
        if (evaluate->parsed()) return cmd_evaluate(eval_args);
        if (tune->parsed()) return cmd_tune(tune_args);
        if (scan->parsed()) return run_scan_loop(scan_args, false);
        if (watch->parsed()) return run_scan_loop(watch_args, true);
        if (report->parsed()) return cmd_report(report_args);
    } catch (const std::invalid_argument& e) {
        std::cerr << "pkgscan: " << e.what() << "\n";
        return kExitUsage;
    } catch (const FeedError& e) {
        std::cerr << "pkgscan: " << e.what() << "\n";
        return e.code() == FeedErrc::download_failed ? kExitNoInput : kExitIo;
    } catch (const ModelError& e) {
        std::cerr << "pkgscan: " << e.what() << "\n";
        return e.code() == ModelErrc::malformed_model_file ? kExitNoInput : kExitUsage;
    } catch (const std::runtime_error& e) {
        std::cerr << "pkgscan: " << e.what() << "\n";
        return kExitIo;
    } catch (const std::exception& e) {
        std::cerr << "pkgscan: internal error: " << e.what() << "\n";
        return kExitInternal;
    }
    return kExitUsage;
}

}  // namespace pkgscan::cli
