#pragma once

// Internal raw-entry readers behind open_archive(). Not installed.

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "pkgscan/ingest.hpp"

namespace pkgscan::detail {

struct RawEntry {
    std::string path;       // as stored in the archive, not yet sanitized
    std::uint64_t size = 0; // full decompressed size
    std::string content;    // empty when truncated
    bool truncated = false;
};

struct ExtractionBudget {
    std::uint64_t total_cap;
    std::uint64_t per_file_cap;
    std::uint64_t total_used = 0;

    void charge(std::uint64_t n) {
        total_used += n;
        if (total_used > total_cap) {
            throw IngestError(IngestErrc::size_bomb_exceeded,
                              "decompressed size exceeds cap");
        }
    }
};

/// Inflates a gzip stream and parses the contained tar. Regular files only;
/// link and special entries are dropped.
std::vector<RawEntry> read_tar_gz(const std::filesystem::path& path, ExtractionBudget& budget);

/// Walks the zip central directory; supports stored and deflate entries.
std::vector<RawEntry> read_zip(const std::filesystem::path& path, ExtractionBudget& budget);

}  // namespace pkgscan::detail
