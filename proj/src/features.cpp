#include "pkgscan/features.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <set>

#include <json.hpp>

#include "pkgscan/util.hpp"

namespace pkgscan {

std::string gl4_encode(std::string_view s) {
    std::string out;
    out.reserve(s.size());
    for (char c : s) {
        if (c >= 'a' && c <= 'z') {
            out += 'L';
        } else if (c >= 'A' && c <= 'Z') {
            out += 'U';
        } else if (c >= '0' && c <= '9') {
            out += 'D';
        } else {
            out += 'S';
        }
    }
    return out;
}

double shannon_entropy(std::string_view pattern) {
    if (pattern.empty()) return 0.0;
    std::array<std::size_t, 256> freq{};
    for (unsigned char c : pattern) ++freq[c];
    const double n = static_cast<double>(pattern.size());
    double h = 0.0;
    for (std::size_t count : freq) {
        if (count == 0) continue;
        const double p = static_cast<double>(count) / n;
        h -= p * std::log2(p);
    }
    return h;
}

SummaryStats summarize(std::vector<double> values) {
    SummaryStats stats;
    if (values.empty()) return stats;
    const double n = static_cast<double>(values.size());

    double sum = 0.0;
    for (double v : values) sum += v;
    stats.mean = sum / n;

    double sq = 0.0;
    for (double v : values) sq += (v - stats.mean) * (v - stats.mean);
    stats.stddev = std::sqrt(sq / n);

    std::sort(values.begin(), values.end());
    stats.max = values.back();

    // Q3, inclusive method: linear interpolation at rank 0.75 * (n - 1).
    const double h = 0.75 * (n - 1.0);
    const std::size_t lo = static_cast<std::size_t>(h);
    if (lo + 1 < values.size()) {
        stats.q3 = values[lo] + (h - static_cast<double>(lo)) * (values[lo + 1] - values[lo]);
    } else {
        stats.q3 = values[lo];
    }
    return stats;
}

SummaryStats entropy_stats(std::span<const std::string> items) {
    std::vector<double> entropies;
    entropies.reserve(items.size());
    for (const std::string& item : items) {
        entropies.push_back(shannon_entropy(gl4_encode(item)));
    }
    return summarize(std::move(entropies));
}

HomogeneityCounts homogeneity_counts(std::span<const std::string> items) {
    HomogeneityCounts counts;
    for (const std::string& item : items) {
        std::string pattern = gl4_encode(item);
        bool homogeneous = true;
        for (char c : pattern) {
            if (c != pattern[0]) {
                homogeneous = false;
                break;
            }
        }
        if (homogeneous) {
            ++counts.homogeneous;
        } else {
            ++counts.heterogeneous;
        }
    }
    return counts;
}

namespace {

bool is_url_body_char(char c) {
    return !std::isspace(static_cast<unsigned char>(c)) && c != '"' && c != '\'' &&
           c != '`';
}

}  // namespace

std::uint64_t count_urls(std::span<const std::string> strings) {
    static constexpr std::array<std::string_view, 5> schemes = {"https", "http", "wss",
                                                                "ws", "ftp"};
    std::uint64_t total = 0;
    for (const std::string& s : strings) {
        const std::string low = ascii_lower(s);
        std::size_t pos = 0;
        while (pos < low.size()) {
            bool matched = false;
            for (std::string_view scheme : schemes) {
                if (low.compare(pos, scheme.size(), scheme) != 0) continue;
                const std::size_t after = pos + scheme.size();
                if (after > low.size() || low.compare(after, 3, "://") != 0) continue;
                if (after + 3 < low.size() && is_url_body_char(low[after + 3])) {
                    ++total;
                    pos = after + 3;
                    matched = true;
                }
                break;
            }
            if (!matched) ++pos;
        }
    }
    return total;
}

std::uint64_t count_ips(std::span<const std::string> strings) {
    const auto is_digit = [](char c) { return c >= '0' && c <= '9'; };
    std::uint64_t total = 0;
    for (const std::string& s : strings) {
        for (std::size_t i = 0; i < s.size(); ++i) {
            if (!is_digit(s[i])) continue;
            if (i > 0 && (is_digit(s[i - 1]) || s[i - 1] == '.')) continue;

            std::size_t pos = i;
            bool ok = true;
            for (int octet = 0; octet < 4 && ok; ++octet) {
                if (octet > 0) {
                    if (pos >= s.size() || s[pos] != '.') {
                        ok = false;
                        break;
                    }
                    ++pos;
                }
                std::size_t start = pos;
                unsigned value = 0;
                while (pos < s.size() && is_digit(s[pos]) && pos - start < 3) {
                    value = value * 10 + static_cast<unsigned>(s[pos] - '0');
                    ++pos;
                }
                if (pos == start || value > 255) ok = false;
            }
            if (ok && pos < s.size() && (is_digit(s[pos]) || s[pos] == '.')) {
                ok = false;  // longer dotted run, e.g. a version string
            }
            if (ok) {
                ++total;
                i = pos - 1;
            }
        }
    }
    return total;
}

std::uint64_t count_base64(std::span<const std::string> strings, std::size_t min_run) {
    const auto is_b64 = [](char c) {
        return (c >= 'A' && c <= 'Z') || (c >= 'a' && c <= 'z') ||
               (c >= '0' && c <= '9') || c == '+' || c == '/';
    };
    std::uint64_t total = 0;
    for (const std::string& s : strings) {
        bool hit = false;
        std::size_t i = 0;
        while (i < s.size() && !hit) {
            if (!is_b64(s[i])) {
                ++i;
                continue;
            }
            std::size_t run_start = i;
            while (i < s.size() && is_b64(s[i])) ++i;
            std::size_t run_len = i - run_start;
            std::size_t pads = 0;
            while (i < s.size() && s[i] == '=' && pads < 2) {
                ++i;
                ++pads;
            }
            if (run_len >= min_run && (run_len + pads) % 4 == 0) {
                hit = true;
            }
        }
        if (hit) ++total;
    }
    return total;
}

std::uint64_t count_suspicious(std::span<const std::string> strings,
                               const SensitiveDictionary& dict) {
    std::uint64_t total = 0;
    for (const std::string& s : strings) {
        const std::string low = ascii_lower(s);
        for (const SensitiveDictionary::Entry& entry : dict.entries) {
            std::set<std::size_t> offsets;  // same keyword, same offset: one hit
            for (const std::string& variant : entry.variants) {
                std::size_t pos = low.find(variant);
                while (pos != std::string::npos) {
                    offsets.insert(pos);
                    pos = low.find(variant, pos + 1);
                }
            }
            total += offsets.size();
        }
    }
    return total;
}

SummaryStats symbol_ratio_stats(const PackageArtifact& artifact, SymbolClass symbol) {
    std::vector<double> ratios;
    for (const PackageFile& file : artifact.files) {
        if (file.role != FileRole::source_js && file.role != FileRole::source_py) continue;
        if (file.byte_size == 0 || file.truncated) continue;
        std::uint64_t count = 0;
        for (char c : file.content) {
            switch (symbol) {
            case SymbolClass::square_brackets:
                count += (c == '[' || c == ']') ? 1 : 0;
                break;
            case SymbolClass::equals:
                count += c == '=' ? 1 : 0;
                break;
            case SymbolClass::plus:
                count += c == '+' ? 1 : 0;
                break;
            }
        }
        ratios.push_back(static_cast<double>(count) / static_cast<double>(file.byte_size));
    }
    return summarize(std::move(ratios));
}

std::map<std::string, TokenStream> lex_artifact(const PackageArtifact& artifact) {
    std::map<std::string, TokenStream> streams;
    for (const PackageFile& file : artifact.files) {
        if (file.truncated) continue;
        TokenStream stream;
        switch (file.role) {
        case FileRole::source_js:
            stream = lex_javascript(file.content);
            break;
        case FileRole::source_py:
            stream = lex_python(file.content);
            break;
        case FileRole::install_script:
            stream = artifact.ecosystem == Ecosystem::npm
                         ? lex_package_json(file.content)
                         : lex_python(file.content);
            break;
        default:
            continue;
        }
        stream.file = file.rel_path;
        streams.emplace(file.rel_path, std::move(stream));
    }
    return streams;
}

namespace {

bool is_hook_name(std::string_view name) {
    static constexpr std::array<std::string_view, 5> hooks = {
        "install", "preinstall", "postinstall", "pre-install", "post-install"};
    for (std::string_view hook : hooks) {
        if (iequals(name, hook)) return true;
    }
    return false;
}

}  // namespace

bool detect_install_hook(const PackageArtifact& artifact,
                         const std::map<std::string, TokenStream>& tokens) {
    if (artifact.ecosystem == Ecosystem::pypi) {
        for (const PackageFile& file : artifact.files) {
            if (file.role == FileRole::install_script) return true;
        }
        return false;
    }
    for (const PackageFile& file : artifact.files) {
        if (file.role != FileRole::install_script || file.truncated) continue;
        nlohmann::json doc = nlohmann::json::parse(file.content, nullptr, false);
        if (!doc.is_discarded()) {
            if (!doc.is_object()) continue;
            auto scripts = doc.find("scripts");
            if (scripts == doc.end() || !scripts->is_object()) continue;
            for (const auto& [key, _] : scripts->items()) {
                if (is_hook_name(key)) return true;
            }
        } else {
            // loosely lexed fallback: any matching string token counts
            auto it = tokens.find(file.rel_path);
            if (it == tokens.end()) continue;
            for (const Token& token : it->second.tokens) {
                if (token.kind == TokenKind::string && is_hook_name(token.text)) {
                    return true;
                }
            }
        }
    }
    return false;
}

namespace {

std::pair<std::uint64_t, std::uint64_t> words_and_lines(std::string_view text) {
    std::uint64_t words = 0;
    bool in_word = false;
    for (char c : text) {
        if (std::isspace(static_cast<unsigned char>(c))) {
            in_word = false;
        } else if (!in_word) {
            in_word = true;
            ++words;
        }
    }
    std::uint64_t lines = 0;
    std::size_t seg_start = 0;
    for (std::size_t i = 0; i < text.size(); ++i) {
        if (text[i] == '\n') {
            ++lines;
            seg_start = i + 1;
        }
    }
    if (seg_start < text.size()) ++lines;  // final unterminated segment
    return {words, lines};
}

}  // namespace

SizeCounts size_counts(const PackageArtifact& artifact) {
    SizeCounts counts;
    for (const PackageFile& file : artifact.files) {
        if (file.truncated) continue;
        if (file.role == FileRole::install_script) {
            auto [w, l] = words_and_lines(file.content);
            counts.install_words += w;
            counts.install_lines += l;
        } else if (file.role == FileRole::source_js || file.role == FileRole::source_py) {
            auto [w, l] = words_and_lines(file.content);
            counts.source_words += w;
            counts.source_lines += l;
        }
    }
    return counts;
}

std::vector<std::uint64_t> extension_census(const PackageArtifact& artifact,
                                            const FeatureSchema& schema) {
    std::vector<std::uint64_t> counts(schema.extensions.size(), 0);
    for (const PackageFile& file : artifact.files) {
        for (std::size_t i = 0; i < schema.extensions.size(); ++i) {
            if (file.extension == schema.extensions[i]) {
                ++counts[i];
                break;
            }
        }
    }
    return counts;
}

FeatureVector extract_features(const PackageArtifact& artifact, const FeatureSchema& schema,
                               const SensitiveDictionary& dict, ExtractionNotes* notes) {
    const std::map<std::string, TokenStream> streams = lex_artifact(artifact);

    std::vector<std::string> src_strings, src_idents, inst_strings, inst_idents;
    for (const PackageFile& file : artifact.files) {
        auto it = streams.find(file.rel_path);
        if (it == streams.end()) continue;
        const bool is_install = file.role == FileRole::install_script;
        for (const Token& token : it->second.tokens) {
            if (token.kind == TokenKind::string) {
                (is_install ? inst_strings : src_strings).push_back(token.text);
            } else if (token.kind == TokenKind::identifier) {
                (is_install ? inst_idents : src_idents).push_back(token.text);
            }
        }
    }

    std::vector<std::string> all_strings;
    all_strings.reserve(src_strings.size() + inst_strings.size());
    all_strings.insert(all_strings.end(), src_strings.begin(), src_strings.end());
    all_strings.insert(all_strings.end(), inst_strings.begin(), inst_strings.end());

    FeatureVector vec;
    vec.schema_version = schema.version;
    vec.values.reserve(schema.size());

    const SizeCounts sizes = size_counts(artifact);
    vec.values.push_back(detect_install_hook(artifact, streams) ? 1.0 : 0.0);
    vec.values.push_back(static_cast<double>(sizes.install_words));
    vec.values.push_back(static_cast<double>(sizes.install_lines));
    vec.values.push_back(static_cast<double>(sizes.source_words));
    vec.values.push_back(static_cast<double>(sizes.source_lines));
    vec.values.push_back(static_cast<double>(count_urls(all_strings)));
    vec.values.push_back(static_cast<double>(count_ips(all_strings)));
    vec.values.push_back(static_cast<double>(count_suspicious(all_strings, dict)));
    vec.values.push_back(static_cast<double>(count_base64(all_strings)));

    const auto push_stats = [&vec](const SummaryStats& stats) {
        vec.values.push_back(stats.mean);
        vec.values.push_back(stats.stddev);
        vec.values.push_back(stats.q3);
        vec.values.push_back(stats.max);
    };

    push_stats(entropy_stats(src_strings));
    const HomogeneityCounts src_str_homog = homogeneity_counts(src_strings);
    vec.values.push_back(static_cast<double>(src_str_homog.homogeneous));
    vec.values.push_back(static_cast<double>(src_str_homog.heterogeneous));

    push_stats(entropy_stats(src_idents));
    const HomogeneityCounts src_id_homog = homogeneity_counts(src_idents);
    vec.values.push_back(static_cast<double>(src_id_homog.homogeneous));
    vec.values.push_back(static_cast<double>(src_id_homog.heterogeneous));

    push_stats(entropy_stats(inst_strings));
    push_stats(entropy_stats(inst_idents));

    push_stats(symbol_ratio_stats(artifact, SymbolClass::square_brackets));
    push_stats(symbol_ratio_stats(artifact, SymbolClass::equals));
    push_stats(symbol_ratio_stats(artifact, SymbolClass::plus));

    for (std::uint64_t count : extension_census(artifact, schema)) {
        vec.values.push_back(static_cast<double>(count));
    }

    if (notes) {
        notes->any_truncated = false;
        notes->any_lex_error = false;
        for (const PackageFile& file : artifact.files) {
            if (file.truncated) notes->any_truncated = true;
        }
        for (const auto& [_, stream] : streams) {
            if (stream.lex_error) notes->any_lex_error = true;
        }
    }
    return vec;
}

}  // namespace pkgscan
