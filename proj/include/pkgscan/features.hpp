#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "pkgscan/ingest.hpp"
#include "pkgscan/lexer.hpp"

namespace pkgscan {

/// Frozen, versioned feature layout: 41 scalar slots followed by 91
/// per-extension file counters (132 total). The order is embedded in every
/// trained model via content_hash().
struct FeatureSchema {
    std::string version;
    std::vector<std::string> names;
    std::vector<std::string> extensions;

    std::size_t size() const { return names.size(); }
    std::size_t index_of(std::string_view name) const;  // throws if unknown

    /// Hash over the canonical serialization (version + names + extensions),
    /// independent of file formatting.
    std::string content_hash() const;

    static const FeatureSchema& builtin();
    static FeatureSchema load(const std::filesystem::path& path);
    void save(const std::filesystem::path& path) const;
};

struct FeatureVector {
    std::string schema_version;
    std::vector<double> values;
};

/// Four-symbol generalization of a string: lowercase -> L, uppercase -> U,
/// digit -> D, anything else (byte-wise, including non-ASCII) -> S.
std::string gl4_encode(std::string_view s);

/// Shannon entropy in bits of the character distribution of `pattern`.
double shannon_entropy(std::string_view pattern);

struct SummaryStats {
    double mean = 0.0;
    double stddev = 0.0;  // population
    double q3 = 0.0;      // inclusive linear interpolation
    double max = 0.0;
};

/// mean / population std / Q3 / max of a value multiset; empty -> all zero.
SummaryStats summarize(std::vector<double> values);

/// Statistics over {shannon_entropy(gl4_encode(item))}.
SummaryStats entropy_stats(std::span<const std::string> items);

struct HomogeneityCounts {
    std::uint64_t homogeneous = 0;    // GL4 encoding uses exactly one symbol
    std::uint64_t heterogeneous = 0;  // (empty strings count as homogeneous)
};

HomogeneityCounts homogeneity_counts(std::span<const std::string> items);

/// Occurrences of `(http|https|ftp|ws|wss)://` + at least one
/// non-whitespace, non-quote character; scheme case-insensitive.
std::uint64_t count_urls(std::span<const std::string> strings);

/// IPv4 dotted quads with octets in 0-255, bounded by non-digit/non-dot
/// context on both sides.
std::uint64_t count_ips(std::span<const std::string> strings);

/// Tokens containing a run of >= `min_run` base64-alphabet characters plus
/// 0-2 `=` with total length divisible by 4; each token counted once.
std::uint64_t count_base64(std::span<const std::string> strings, std::size_t min_run = 20);

struct SensitiveDictionary {
    struct Entry {
        std::string keyword;
        std::vector<std::string> variants;  // lowercased for matching
    };
    std::vector<Entry> entries;

    static std::vector<std::string> builtin_keywords();

    /// Keyword file: one keyword per line, `#` comments and blanks skipped.
    static std::vector<std::string> load_keywords(const std::filesystem::path& path);
};

/// Expands keywords into plaintext, base64, base32, rot13 and URL-encoded
/// variants. Base64/base32 additionally get the two byte-shifted cores so
/// keywords embedded inside larger encoded blobs still match.
SensitiveDictionary expand_dictionary(const std::vector<std::string>& keywords);

/// Case-insensitive substring hits of any variant; overlapping variants of
/// one keyword at the same offset count once.
std::uint64_t count_suspicious(std::span<const std::string> strings,
                               const SensitiveDictionary& dict);

enum class SymbolClass { square_brackets, equals, plus };

/// Per source file: (symbol count in raw bytes) / byte_size, summarized
/// across files. Truncated files (no content retained) are skipped.
SummaryStats symbol_ratio_stats(const PackageArtifact& artifact, SymbolClass symbol);

/// Lexes every source and install-script file with the lexer its role
/// demands. Keyed by rel_path.
std::map<std::string, TokenStream> lex_artifact(const PackageArtifact& artifact);

/// pypi: any setup.py present. npm: a lifecycle key among
/// {install, preinstall, postinstall, pre-install, post-install}
/// (case-insensitive) under the `scripts` object of any package.json; for
/// unparseable package.json any matching string token counts.
bool detect_install_hook(const PackageArtifact& artifact,
                         const std::map<std::string, TokenStream>& tokens);

struct SizeCounts {
    std::uint64_t install_words = 0;
    std::uint64_t install_lines = 0;
    std::uint64_t source_words = 0;
    std::uint64_t source_lines = 0;
};

SizeCounts size_counts(const PackageArtifact& artifact);

std::vector<std::uint64_t> extension_census(const PackageArtifact& artifact,
                                            const FeatureSchema& schema);

struct ExtractionNotes {
    bool any_truncated = false;
    bool any_lex_error = false;
};

/// The full 132-slot vector. String/identifier entropy populations are
/// pooled across all source files and, separately, across all install
/// scripts; URL/IP/base64/suspicious counts run over the union of string
/// tokens from both populations; symbol ratios cover source files only.
FeatureVector extract_features(const PackageArtifact& artifact, const FeatureSchema& schema,
                               const SensitiveDictionary& dict,
                               ExtractionNotes* notes = nullptr);

}  // namespace pkgscan
