#pragma once

#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace pkgscan {

enum class Ecosystem { npm, pypi };

std::string_view ecosystem_name(Ecosystem eco);
Ecosystem ecosystem_from_name(std::string_view name);

enum class FileRole { source_js, source_py, install_script, shell_script, other };

std::string_view file_role_name(FileRole role);

struct PackageFile {
    std::string rel_path;
    std::string extension;  // lowercased suffix after the final '.', empty if none
    std::uint64_t byte_size = 0;
    std::string content;    // empty when truncated
    bool truncated = false; // decompressed size exceeded the per-file cap
    FileRole role = FileRole::other;
};

struct PackageArtifact {
    Ecosystem ecosystem = Ecosystem::npm;
    std::string name;
    std::string version;
    std::vector<PackageFile> files;
    std::filesystem::path source_path;
    std::string archive_format;  // tgz | sdist | wheel | zip
};

enum class IngestErrc {
    unsupported_format,
    path_traversal,
    size_bomb_exceeded,
    corrupt_archive,
};

class IngestError : public std::runtime_error {
public:
    IngestError(IngestErrc code, const std::string& what)
        : std::runtime_error(what), code_(code) {}
    IngestErrc code() const { return code_; }

private:
    IngestErrc code_;
};

struct IngestLimits {
    std::uint64_t total_decompressed_cap = 256ull << 20;  // 256 MiB
    std::uint64_t per_file_cap = 16ull << 20;             // 16 MiB
};

/// Lowercased suffix after the final '.' of the basename, or "".
std::string derive_extension(std::string_view rel_path);

/// Role from ecosystem + path. Install scripts (package.json / setup.py) are
/// matched on the basename, case-insensitively, at any depth.
FileRole derive_role(Ecosystem eco, std::string_view rel_path, std::string_view extension);

/// Re-derives extension and role for every file. Total function.
PackageArtifact classify_files(PackageArtifact artifact);

/// Opens a gzip tar (.tgz/.tar.gz) or zip (.whl/.zip) archive into a
/// classified PackageArtifact. Entries with absolute paths or `..` traversal
/// raise path_traversal; link entries are skipped. Name and version are
/// parsed best-effort from the archive filename and may be overridden by the
/// caller.
PackageArtifact open_archive(const std::filesystem::path& path, Ecosystem eco,
                             const IngestLimits& limits = {});

/// `name-1.2.3.tgz` -> {name, 1.2.3}. Falls back to {stem, ""}.
std::pair<std::string, std::string> parse_name_version(std::string_view filename);

}  // namespace pkgscan
