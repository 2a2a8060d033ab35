#include "pkgscan/ingest.hpp"

#include <algorithm>
#include <fstream>
#include <map>

#include "archive_readers.hpp"
#include "pkgscan/util.hpp"

namespace pkgscan {

std::string_view ecosystem_name(Ecosystem eco) {
    return eco == Ecosystem::npm ? "npm" : "pypi";
}

Ecosystem ecosystem_from_name(std::string_view name) {
    if (name == "npm") return Ecosystem::npm;
    if (name == "pypi") return Ecosystem::pypi;
    throw std::invalid_argument("unknown ecosystem: " + std::string(name));
}

std::string_view file_role_name(FileRole role) {
    switch (role) {
    case FileRole::source_js: return "source_js";
    case FileRole::source_py: return "source_py";
    case FileRole::install_script: return "install_script";
    case FileRole::shell_script: return "shell_script";
    case FileRole::other: return "other";
    }
    return "other";
}

namespace {

std::string_view basename_of(std::string_view rel_path) {
    std::size_t slash = rel_path.find_last_of('/');
    return slash == std::string_view::npos ? rel_path : rel_path.substr(slash + 1);
}

/// Normalizes an archive entry path: strips `./` segments, collapses empty
/// segments, rejects absolute paths and any `..` component.
std::string sanitize_entry_path(const std::string& raw) {
    std::string path = raw;
    std::replace(path.begin(), path.end(), '\\', '/');
    if (!path.empty() && path.front() == '/') {
        throw IngestError(IngestErrc::path_traversal, "absolute entry path: " + raw);
    }
    if (path.size() >= 2 && path[1] == ':') {
        throw IngestError(IngestErrc::path_traversal, "drive-letter entry path: " + raw);
    }

    std::vector<std::string> parts;
    std::size_t start = 0;
    while (start <= path.size()) {
        std::size_t end = path.find('/', start);
        if (end == std::string::npos) end = path.size();
        std::string seg = path.substr(start, end - start);
        if (seg == "..") {
            throw IngestError(IngestErrc::path_traversal, "`..` in entry path: " + raw);
        }
        if (!seg.empty() && seg != ".") {
            parts.push_back(std::move(seg));
        }
        start = end + 1;
    }
    std::string out;
    for (std::size_t i = 0; i < parts.size(); ++i) {
        if (i > 0) out += '/';
        out += parts[i];
    }
    return out;
}

std::string detect_format(const std::filesystem::path& path, Ecosystem eco, bool is_zip) {
    if (!is_zip) {
        return eco == Ecosystem::npm ? "tgz" : "sdist";
    }
    std::string ext = ascii_lower(path.extension().string());
    return ext == ".whl" ? "wheel" : "zip";
}

}  // namespace

std::string derive_extension(std::string_view rel_path) {
    std::string_view base = basename_of(rel_path);
    std::size_t dot = base.find_last_of('.');
    if (dot == std::string_view::npos || dot + 1 == base.size()) return "";
    return ascii_lower(base.substr(dot + 1));
}

FileRole derive_role(Ecosystem eco, std::string_view rel_path, std::string_view extension) {
    std::string_view base = basename_of(rel_path);
    if (eco == Ecosystem::npm && iequals(base, "package.json")) {
        return FileRole::install_script;
    }
    if (eco == Ecosystem::pypi && iequals(base, "setup.py")) {
        return FileRole::install_script;
    }
    if (extension == "js") return FileRole::source_js;
    if (extension == "py") return FileRole::source_py;
    if (extension == "sh") return FileRole::shell_script;
    return FileRole::other;
}

PackageArtifact classify_files(PackageArtifact artifact) {
    for (PackageFile& file : artifact.files) {
        file.extension = derive_extension(file.rel_path);
        file.role = derive_role(artifact.ecosystem, file.rel_path, file.extension);
    }
    return artifact;
}

std::pair<std::string, std::string> parse_name_version(std::string_view filename) {
    std::string stem(filename);
    // strip .tar.gz / .tgz / .whl / .zip
    for (std::string_view suffix : {".tar.gz", ".tgz", ".whl", ".zip", ".tar"}) {
        if (stem.size() > suffix.size() &&
            iequals(std::string_view(stem).substr(stem.size() - suffix.size()), suffix)) {
            stem.resize(stem.size() - suffix.size());
            break;
        }
    }
    // wheels carry build tags: name-version-python-abi-platform
    // sdists/tgz: name-version; the version starts at the last '-' followed
    // by a leading digit
    std::vector<std::size_t> dashes;
    for (std::size_t i = 0; i < stem.size(); ++i) {
        if (stem[i] == '-') dashes.push_back(i);
    }
    for (std::size_t d : dashes) {
        if (d + 1 < stem.size() && stem[d + 1] >= '0' && stem[d + 1] <= '9') {
            std::string version = stem.substr(d + 1);
            // trim wheel tags after the version component
            std::size_t tag = version.find('-');
            if (tag != std::string::npos) version.resize(tag);
            return {stem.substr(0, d), version};
        }
    }
    return {stem, ""};
}

PackageArtifact open_archive(const std::filesystem::path& path, Ecosystem eco,
                             const IngestLimits& limits) {
    std::ifstream probe(path, std::ios::binary);
    if (!probe) {
        throw IngestError(IngestErrc::corrupt_archive, "cannot open " + path.string());
    }
    unsigned char magic[2] = {0, 0};
    probe.read(reinterpret_cast<char*>(magic), 2);
    if (probe.gcount() < 2) {
        throw IngestError(IngestErrc::corrupt_archive, "file too small: " + path.string());
    }
    probe.close();

    bool is_zip = false;
    if (magic[0] == 0x1f && magic[1] == 0x8b) {
        is_zip = false;
    } else if (magic[0] == 'P' && magic[1] == 'K') {
        is_zip = true;
    } else {
        throw IngestError(IngestErrc::unsupported_format,
                          "not a gzip tar or zip archive: " + path.string());
    }

    detail::ExtractionBudget budget{limits.total_decompressed_cap, limits.per_file_cap, 0};
    std::vector<detail::RawEntry> raw =
        is_zip ? detail::read_zip(path, budget) : detail::read_tar_gz(path, budget);

    // Last entry wins on duplicate paths, mirroring sequential extraction.
    std::map<std::string, PackageFile> by_path;
    for (detail::RawEntry& entry : raw) {
        std::string clean = sanitize_entry_path(entry.path);
        if (clean.empty()) continue;
        PackageFile file;
        file.rel_path = clean;
        file.byte_size = entry.size;
        file.content = std::move(entry.content);
        file.truncated = entry.truncated;
        by_path[clean] = std::move(file);
    }

    PackageArtifact artifact;
    artifact.ecosystem = eco;
    artifact.source_path = path;
    artifact.archive_format = detect_format(path, eco, is_zip);
    auto [name, version] = parse_name_version(path.filename().string());
    artifact.name = std::move(name);
    artifact.version = std::move(version);
    artifact.files.reserve(by_path.size());
    for (auto& [_, file] : by_path) {
        artifact.files.push_back(std::move(file));
    }
    return classify_files(std::move(artifact));
}

}  // namespace pkgscan
