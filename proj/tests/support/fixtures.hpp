#pragma once

// Shared test fixtures: throwaway dirs, in-test archive writers, and a
// seeded synthetic package generator.

#include <cstdint>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "pkgscan/dataset.hpp"
#include "pkgscan/features.hpp"
#include "pkgscan/ingest.hpp"
#include "pkgscan/util.hpp"

namespace pkgscan::testing {

class TempDir {
public:
    explicit TempDir(const std::string& tag);
    ~TempDir();
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;
    const std::filesystem::path& path() const { return path_; }

private:
    std::filesystem::path path_;
};

struct Entry {
    std::string name;
    std::string content;
};

/// Minimal ustar + gzip writer.
void write_tar_gz(const std::filesystem::path& out, const std::vector<Entry>& entries);

/// Tar entry with an arbitrary (possibly traversing) raw name.
std::string tar_bytes(const std::vector<Entry>& entries);
void gzip_to_file(const std::filesystem::path& out, const std::string& raw);

/// Minimal zip writer; per-entry stored (method 0) or deflate (method 8).
void write_zip(const std::filesystem::path& out, const std::vector<Entry>& entries,
               bool deflate = false);

/// Valid gzip magic followed by garbage; open_archive must reject it.
void write_corrupt_archive(const std::filesystem::path& out);

/// In-memory package synthesis for the controlled experiments. The same
/// generator drives unit tests and the acceptance harness.
PackageArtifact synth_package(Rng& rng, Ecosystem eco, bool malicious);

/// n_mal + n_benign synthetic packages, features extracted, labels attached.
Dataset synth_dataset(std::uint64_t seed, Ecosystem eco, std::size_t n_mal,
                      std::size_t n_benign, const FeatureSchema& schema,
                      const SensitiveDictionary& dict);

/// Writes a synthetic package to disk as a .tgz (npm) or .tar.gz (pypi).
std::filesystem::path write_synth_archive(const std::filesystem::path& dir, Rng& rng,
                                          Ecosystem eco, bool malicious,
                                          const std::string& name);

}  // namespace pkgscan::testing
