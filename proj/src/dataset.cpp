#include "pkgscan/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <ostream>
#include <set>
#include <sstream>

#include "pkgscan/util.hpp"

namespace pkgscan {

std::size_t Dataset::count(Label label) const {
    std::size_t n = 0;
    for (const LabeledSample& s : samples) {
        if (s.label == label) ++n;
    }
    return n;
}

bool version_less(const std::string& a, const std::string& b) {
    std::size_t ia = 0, ib = 0;
    while (ia < a.size() || ib < b.size()) {
        std::size_t ea = a.find('.', ia);
        std::size_t eb = b.find('.', ib);
        std::string sa = a.substr(ia, (ea == std::string::npos ? a.size() : ea) - ia);
        std::string sb = b.substr(ib, (eb == std::string::npos ? b.size() : eb) - ib);

        const auto numeric = [](const std::string& s) {
            return !s.empty() && s.find_first_not_of("0123456789") == std::string::npos;
        };
        if (sa != sb) {
            if (numeric(sa) && numeric(sb)) {
                // compare as integers without overflow: longer (trimmed) wins
                std::string ta = sa.substr(std::min(sa.find_first_not_of('0'), sa.size()));
                std::string tb = sb.substr(std::min(sb.find_first_not_of('0'), sb.size()));
                if (ta.size() != tb.size()) return ta.size() < tb.size();
                if (ta != tb) return ta < tb;
                // equal numeric value, differ only in leading zeros
                if (sa != sb) return sa < sb;
            } else {
                return sa < sb;
            }
        }
        if (ea == std::string::npos && eb == std::string::npos) break;
        ia = ea == std::string::npos ? a.size() : ea + 1;
        ib = eb == std::string::npos ? b.size() : eb + 1;
        if (ea == std::string::npos) return true;   // a ran out of segments
        if (eb == std::string::npos) return false;  // b ran out of segments
    }
    return a < b;  // ties by full lexicographic comparison
}

std::vector<LabeledSample> dedup_malicious(std::vector<LabeledSample> samples) {
    // 1. latest version per (ecosystem, name)
    std::map<std::pair<Ecosystem, std::string>, std::size_t> latest;
    for (std::size_t i = 0; i < samples.size(); ++i) {
        auto key = std::make_pair(samples[i].ecosystem, samples[i].name);
        auto [it, inserted] = latest.emplace(key, i);
        if (!inserted && version_less(samples[it->second].version, samples[i].version)) {
            it->second = i;
        }
    }
    std::vector<LabeledSample> by_version;
    for (std::size_t i = 0; i < samples.size(); ++i) {
        auto key = std::make_pair(samples[i].ecosystem, samples[i].name);
        if (latest.at(key) == i) by_version.push_back(std::move(samples[i]));
    }

    // 2. one representative per campaign: lowest (name, ecosystem, version)
    const auto rep_less = [](const LabeledSample& a, const LabeledSample& b) {
        if (a.name != b.name) return a.name < b.name;
        if (a.ecosystem != b.ecosystem) return a.ecosystem < b.ecosystem;
        return a.version < b.version;
    };
    std::map<std::string, std::size_t> campaign_rep;
    for (std::size_t i = 0; i < by_version.size(); ++i) {
        if (!by_version[i].campaign_id.has_value()) continue;
        auto [it, inserted] = campaign_rep.emplace(*by_version[i].campaign_id, i);
        if (!inserted && rep_less(by_version[i], by_version[it->second])) {
            it->second = i;
        }
    }
    std::vector<LabeledSample> by_campaign;
    for (std::size_t i = 0; i < by_version.size(); ++i) {
        if (by_version[i].campaign_id.has_value() &&
            campaign_rep.at(*by_version[i].campaign_id) != i) {
            continue;
        }
        by_campaign.push_back(std::move(by_version[i]));
    }

    // 3. collapse bit-identical feature vectors
    std::map<std::vector<double>, std::size_t> vector_rep;
    for (std::size_t i = 0; i < by_campaign.size(); ++i) {
        auto [it, inserted] = vector_rep.emplace(by_campaign[i].feature_vector.values, i);
        if (!inserted && rep_less(by_campaign[i], by_campaign[it->second])) {
            it->second = i;
        }
    }
    std::vector<LabeledSample> result;
    for (std::size_t i = 0; i < by_campaign.size(); ++i) {
        if (vector_rep.at(by_campaign[i].feature_vector.values) == i) {
            result.push_back(std::move(by_campaign[i]));
        }
    }
    return result;
}

Dataset assemble(std::vector<LabeledSample> benign, std::vector<LabeledSample> malicious,
                 double ratio) {
    if (ratio <= 0.0 || ratio >= 1.0) {
        throw std::invalid_argument("benign ratio must be in (0, 1)");
    }
    const double mal = static_cast<double>(malicious.size());
    const std::size_t want_benign =
        static_cast<std::size_t>(std::llround(mal * ratio / (1.0 - ratio)));
    if (benign.size() < want_benign) {
        throw DatasetError(DatasetErrc::insufficient_benign,
                           "need " + std::to_string(want_benign) + " benign samples, have " +
                               std::to_string(benign.size()));
    }
    std::sort(benign.begin(), benign.end(), [](const LabeledSample& a, const LabeledSample& b) {
        if (a.name != b.name) return a.name < b.name;
        if (a.ecosystem != b.ecosystem) return a.ecosystem < b.ecosystem;
        return a.version < b.version;
    });
    benign.resize(want_benign);

    Dataset ds;
    for (LabeledSample& s : malicious) {
        s.label = Label::malicious;
        ds.samples.push_back(std::move(s));
    }
    for (LabeledSample& s : benign) {
        s.label = Label::benign;
        ds.samples.push_back(std::move(s));
    }
    if (!ds.samples.empty()) {
        ds.schema_version = ds.samples.front().feature_vector.schema_version;
    }

    std::set<std::tuple<Ecosystem, std::string, std::string>> seen;
    for (const LabeledSample& s : ds.samples) {
        if (!seen.insert({s.ecosystem, s.name, s.version}).second) {
            throw DatasetError(DatasetErrc::duplicate_sample,
                               "duplicate sample: " + s.name + "@" + s.version);
        }
        if (s.feature_vector.schema_version != ds.schema_version) {
            throw DatasetError(DatasetErrc::schema_mismatch,
                               "mixed schema versions in dataset");
        }
    }

    std::ostringstream prov;
    prov << "assembled: " << malicious.size() << " malicious + " << want_benign
         << " benign (ratio " << ratio << ")";
    ds.provenance = prov.str();
    return ds;
}

Dataset merge_cross(const Dataset& a, const Dataset& b) {
    if (!a.samples.empty() && !b.samples.empty() && a.schema_version != b.schema_version) {
        throw DatasetError(DatasetErrc::schema_mismatch,
                           "cannot merge datasets with different schema versions");
    }
    Dataset out;
    out.schema_version = a.samples.empty() ? b.schema_version : a.schema_version;
    out.samples = a.samples;
    out.samples.insert(out.samples.end(), b.samples.begin(), b.samples.end());

    std::set<std::tuple<Ecosystem, std::string, std::string>> seen;
    for (const LabeledSample& s : out.samples) {
        if (!seen.insert({s.ecosystem, s.name, s.version}).second) {
            throw DatasetError(DatasetErrc::duplicate_sample,
                               "duplicate sample in union: " + s.name + "@" + s.version);
        }
    }
    out.provenance = a.provenance + " | " + b.provenance;
    return out;
}

std::vector<FeatureDistributionRow> feature_distribution_report(const Dataset& ds,
                                                                const FeatureSchema& schema) {
    std::vector<FeatureDistributionRow> rows;
    for (Label label : {Label::benign, Label::malicious}) {
        if (ds.count(label) == 0) continue;
        for (std::size_t f = 0; f < schema.size(); ++f) {
            std::vector<double> values;
            for (const LabeledSample& s : ds.samples) {
                if (s.label == label && f < s.feature_vector.values.size()) {
                    values.push_back(s.feature_vector.values[f]);
                }
            }
            FeatureDistributionRow row;
            row.feature = schema.names[f];
            row.label = label;
            std::sort(values.begin(), values.end());
            row.min = values.front();
            row.max = values.back();
            const double n = static_cast<double>(values.size());
            double sum = 0;
            for (double v : values) sum += v;
            row.mean = sum / n;
            double sq = 0;
            for (double v : values) sq += (v - row.mean) * (v - row.mean);
            row.stddev = std::sqrt(sq / n);
            const auto quantile = [&values](double q) {
                const double h = q * (static_cast<double>(values.size()) - 1.0);
                const std::size_t lo = static_cast<std::size_t>(h);
                if (lo + 1 >= values.size()) return values[lo];
                return values[lo] + (h - static_cast<double>(lo)) * (values[lo + 1] - values[lo]);
            };
            row.median = quantile(0.5);
            row.q3 = quantile(0.75);
            rows.push_back(std::move(row));
        }
    }
    return rows;
}

void write_distribution_csv(std::ostream& out,
                            const std::vector<FeatureDistributionRow>& rows) {
    out << "feature,label,min,mean,median,q3,max,std\n";
    for (const FeatureDistributionRow& row : rows) {
        out << csv_escape(row.feature) << ','
            << (row.label == Label::malicious ? "malicious" : "benign") << ','
            << format_double(row.min) << ',' << format_double(row.mean) << ','
            << format_double(row.median) << ',' << format_double(row.q3) << ','
            << format_double(row.max) << ',' << format_double(row.stddev) << '\n';
    }
}

std::map<std::string, std::string> load_campaign_map(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) {
        throw std::runtime_error("cannot open campaign map: " + path.string());
    }
    std::map<std::string, std::string> map;
    std::string line;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty() || line[0] == '#') continue;
        std::size_t tab = line.find('\t');
        if (tab == std::string::npos) continue;
        map[line.substr(0, tab)] = line.substr(tab + 1);
    }
    return map;
}

CorpusScanResult scan_corpus_tree(const std::filesystem::path& root, Label label,
                                  const FeatureSchema& schema,
                                  const SensitiveDictionary& dict,
                                  const std::map<std::string, std::string>& campaigns,
                                  const IngestLimits& limits) {
    namespace fs = std::filesystem;
    CorpusScanResult result;
    if (!fs::exists(root)) {
        throw std::runtime_error("corpus root does not exist: " + root.string());
    }
    for (std::string_view eco_name : {"npm", "pypi"}) {
        const fs::path eco_dir = root / eco_name;
        if (!fs::exists(eco_dir)) continue;
        const Ecosystem eco = ecosystem_from_name(eco_name);
        std::vector<fs::path> archives;
        for (const auto& entry : fs::recursive_directory_iterator(eco_dir)) {
            if (entry.is_regular_file()) archives.push_back(entry.path());
        }
        std::sort(archives.begin(), archives.end());
        for (const fs::path& archive : archives) {
            // layout: <root>/<ecosystem>/<name>/<version>/<archive>
            const fs::path version_dir = archive.parent_path();
            const fs::path name_dir = version_dir.parent_path();
            LabeledSample sample;
            sample.label = label;
            sample.ecosystem = eco;
            sample.name = name_dir.filename().string();
            sample.version = version_dir.filename().string();
            try {
                PackageArtifact artifact = open_archive(archive, eco, limits);
                sample.feature_vector = extract_features(artifact, schema, dict);
            } catch (const IngestError& e) {
                result.errors.push_back(archive.string() + ": " + e.what());
                continue;
            }
            auto it = campaigns.find(sample.name);
            if (it != campaigns.end()) sample.campaign_id = it->second;
            result.samples.push_back(std::move(sample));
        }
    }
    return result;
}

Dataset dataset_from_rows(const std::vector<FeatureRow>& rows, const FeatureSchema& schema) {
    Dataset ds;
    ds.schema_version = schema.version;
    for (const FeatureRow& row : rows) {
        if (!row.label.has_value()) continue;  // unlabeled rows cannot train
        LabeledSample s;
        s.ecosystem = row.ecosystem;
        s.name = row.name;
        s.version = row.version;
        s.label = *row.label == 1 ? Label::malicious : Label::benign;
        s.feature_vector = row.vector;
        ds.samples.push_back(std::move(s));
    }
    return ds;
}

void save_dataset_csv(const Dataset& ds, const FeatureSchema& schema,
                      const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) {
        throw std::runtime_error("cannot write dataset csv: " + path.string());
    }
    write_feature_csv_header(out, schema);
    for (const LabeledSample& s : ds.samples) {
        FeatureRow row;
        row.ecosystem = s.ecosystem;
        row.name = s.name;
        row.version = s.version;
        row.label = s.label == Label::malicious ? 1 : 0;
        row.vector = s.feature_vector;
        write_feature_csv_row(out, row);
    }
}

Dataset load_dataset_csv(const std::filesystem::path& path, const FeatureSchema& schema) {
    std::ifstream in(path);
    if (!in) {
        throw std::runtime_error("cannot open dataset csv: " + path.string());
    }
    return dataset_from_rows(read_feature_csv(in, schema), schema);
}

}  // namespace pkgscan
