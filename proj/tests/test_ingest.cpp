#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <fstream>

#include "fixtures.hpp"
#include "pkgscan/ingest.hpp"

using namespace pkgscan;
using pkgscan::testing::Entry;
using pkgscan::testing::TempDir;

namespace {

const PackageFile* find_file(const PackageArtifact& a, const std::string& path) {
    for (const PackageFile& f : a.files) {
        if (f.rel_path == path) return &f;
    }
    return nullptr;
}

}  // namespace

TEST_CASE("tar.gz archive yields classified inventory") {
    TempDir tmp("tar");
    const auto archive = tmp.path() / "demo-1.0.0.tgz";
    pkgscan::testing::write_tar_gz(archive, {
                                                {"package/package.json", "{}"},
                                                {"package/index.js", "var x = 1;\n"},
                                            });
    PackageArtifact a = open_archive(archive, Ecosystem::npm);
    CHECK(a.files.size() == 2);
    CHECK(a.name == "demo");
    CHECK(a.version == "1.0.0");
    CHECK(a.archive_format == "tgz");
    REQUIRE(find_file(a, "package/package.json"));
    CHECK(find_file(a, "package/package.json")->role == FileRole::install_script);
    REQUIRE(find_file(a, "package/index.js"));
    CHECK(find_file(a, "package/index.js")->role == FileRole::source_js);
    CHECK(find_file(a, "package/index.js")->content == "var x = 1;\n");
}

TEST_CASE("zip (wheel) archives are supported, stored and deflated") {
    TempDir tmp("zip");
    for (bool deflate : {false, true}) {
        const auto archive = tmp.path() / (deflate ? "a-1.0-py3.whl" : "b-1.0-py3.whl");
        pkgscan::testing::write_zip(archive,
                                    {
                                        {"pkg/mod.py", "import os\n"},
                                        {"pkg/data.txt", "hello"},
                                    },
                                    deflate);
        PackageArtifact a = open_archive(archive, Ecosystem::pypi);
        CHECK(a.archive_format == "wheel");
        REQUIRE(a.files.size() == 2);
        CHECK(find_file(a, "pkg/mod.py")->role == FileRole::source_py);
        CHECK(find_file(a, "pkg/mod.py")->content == "import os\n");
        CHECK(find_file(a, "pkg/data.txt")->byte_size == 5);
    }
}

TEST_CASE("path traversal entries are rejected, not skipped") {
    TempDir tmp("trav");
    SUBCASE("tar with ..") {
        const auto archive = tmp.path() / "evil.tgz";
        pkgscan::testing::write_tar_gz(archive, {{"../../etc/cron.d/x", "boom"}});
        CHECK_THROWS_AS(open_archive(archive, Ecosystem::npm), IngestError);
        try {
            open_archive(archive, Ecosystem::npm);
        } catch (const IngestError& e) {
            CHECK(e.code() == IngestErrc::path_traversal);
        }
    }
    SUBCASE("zip with ..") {
        const auto archive = tmp.path() / "evil.zip";
        pkgscan::testing::write_zip(archive, {{"../../etc/cron.d/x", "boom"}});
        try {
            open_archive(archive, Ecosystem::pypi);
            FAIL("expected PathTraversal");
        } catch (const IngestError& e) {
            CHECK(e.code() == IngestErrc::path_traversal);
        }
    }
    SUBCASE("absolute path") {
        const auto archive = tmp.path() / "abs.tgz";
        pkgscan::testing::write_tar_gz(archive, {{"/etc/passwd", "boom"}});
        try {
            open_archive(archive, Ecosystem::npm);
            FAIL("expected PathTraversal");
        } catch (const IngestError& e) {
            CHECK(e.code() == IngestErrc::path_traversal);
        }
    }
}

TEST_CASE("nested setup.py is an install script at any depth") {
    TempDir tmp("nest");
    const auto archive = tmp.path() / "pkg-1.0.tar.gz";
    pkgscan::testing::write_tar_gz(archive, {{"pkg-1.0/setup.py", "from setuptools import setup\n"}});
    PackageArtifact a = open_archive(archive, Ecosystem::pypi);
    CHECK(a.archive_format == "sdist");
    REQUIRE(a.files.size() == 1);
    CHECK(a.files[0].role == FileRole::install_script);
}

TEST_CASE("classification rules") {
    CHECK(derive_extension("README.md") == "md");
    CHECK(derive_extension("a/b/LICENSE") == "");
    CHECK(derive_extension("archive.TAR.GZ") == "gz");
    CHECK(derive_extension("x.") == "");

    CHECK(derive_role(Ecosystem::npm, "README.md", "md") == FileRole::other);
    CHECK(derive_role(Ecosystem::npm, "a/b/script.sh", "sh") == FileRole::shell_script);
    // install-script basenames match case-insensitively at any depth
    CHECK(derive_role(Ecosystem::pypi, "deep/Setup.PY", "py") == FileRole::install_script);
    CHECK(derive_role(Ecosystem::npm, "x/Package.JSON", "json") == FileRole::install_script);
    // but only for the matching ecosystem
    CHECK(derive_role(Ecosystem::npm, "deep/setup.py", "py") == FileRole::source_py);
    CHECK(derive_role(Ecosystem::pypi, "package.json", "json") == FileRole::other);
}

TEST_CASE("corrupt and unsupported archives") {
    TempDir tmp("bad");
    SUBCASE("gzip magic followed by garbage") {
        const auto archive = tmp.path() / "corrupt.tgz";
        pkgscan::testing::write_corrupt_archive(archive);
        try {
            open_archive(archive, Ecosystem::npm);
            FAIL("expected CorruptArchive");
        } catch (const IngestError& e) {
            CHECK(e.code() == IngestErrc::corrupt_archive);
        }
    }
    SUBCASE("unknown format") {
        const auto archive = tmp.path() / "notanarchive.tgz";
        std::ofstream f(archive);
        f << "plain text, no magic";
        f.close();
        try {
            open_archive(archive, Ecosystem::npm);
            FAIL("expected UnsupportedFormat");
        } catch (const IngestError& e) {
            CHECK(e.code() == IngestErrc::unsupported_format);
        }
    }
}

TEST_CASE("per-file cap truncates content but keeps metadata") {
    TempDir tmp("cap");
    const auto archive = tmp.path() / "big-1.0.tgz";
    const std::string big(64 * 1024, 'a');
    pkgscan::testing::write_tar_gz(archive, {
                                                {"package/big.bin", big},
                                                {"package/small.js", "x"},
                                            });
    IngestLimits limits;
    limits.per_file_cap = 1024;
    PackageArtifact a = open_archive(archive, Ecosystem::npm, limits);
    const PackageFile* bigf = find_file(a, "package/big.bin");
    REQUIRE(bigf);
    CHECK(bigf->truncated);
    CHECK(bigf->content.empty());
    CHECK(bigf->byte_size == big.size());
    CHECK_FALSE(find_file(a, "package/small.js")->truncated);
}

TEST_CASE("total decompression cap rejects bombs") {
    TempDir tmp("bomb");
    const auto archive = tmp.path() / "bomb-1.0.tgz";
    // highly compressible: 8 MiB of zeros inside a small .tgz
    pkgscan::testing::write_tar_gz(archive, {{"package/zeros", std::string(8 << 20, '\0')}});
    IngestLimits limits;
    limits.total_decompressed_cap = 1 << 20;
    try {
        open_archive(archive, Ecosystem::npm, limits);
        FAIL("expected SizeBombExceeded");
    } catch (const IngestError& e) {
        CHECK(e.code() == IngestErrc::size_bomb_exceeded);
    }
}

TEST_CASE("round-trip determinism: reopening yields an identical inventory") {
    TempDir tmp("round");
    const auto archive = tmp.path() / "pkg-2.3.4.tgz";
    pkgscan::testing::write_tar_gz(archive, {
                                                {"package/package.json", "{\"name\":\"pkg\"}"},
                                                {"package/a.js", "var a;"},
                                                {"package/sub/b.py", "import os"},
                                            });
    PackageArtifact a = open_archive(archive, Ecosystem::npm);
    PackageArtifact b = open_archive(archive, Ecosystem::npm);
    REQUIRE(a.files.size() == b.files.size());
    for (std::size_t i = 0; i < a.files.size(); ++i) {
        CHECK(a.files[i].rel_path == b.files[i].rel_path);
        CHECK(a.files[i].byte_size == b.files[i].byte_size);
        CHECK(a.files[i].role == b.files[i].role);
        CHECK(a.files[i].content == b.files[i].content);
    }
}

TEST_CASE("byte sizes equal decompressed entry lengths") {
    TempDir tmp("sizes");
    const auto archive = tmp.path() / "s-1.tgz";
    const std::vector<Entry> entries = {
        {"package/a", std::string(100, 'x')},
        {"package/b", std::string(3000, 'y')},
        {"package/c", ""},
    };
    pkgscan::testing::write_tar_gz(archive, entries);
    PackageArtifact a = open_archive(archive, Ecosystem::npm);
    std::uint64_t total = 0;
    for (const PackageFile& f : a.files) total += f.byte_size;
    CHECK(total == 3100);
}

TEST_CASE("adversarial entry-name fuzz never escapes or crashes") {
    TempDir tmp("fuzz");
    Rng rng(1234);
    const std::string alphabet = "abc./\\_-~$%";
    for (int trial = 0; trial < 60; ++trial) {
        std::string name;
        const std::size_t len = 1 + rng.next_below(24);
        for (std::size_t i = 0; i < len; ++i) {
            name += alphabet[rng.next_below(alphabet.size())];
        }
        const auto archive = tmp.path() / ("f" + std::to_string(trial) + ".tgz");
        pkgscan::testing::write_tar_gz(archive, {{name, "data"}});
        try {
            PackageArtifact a = open_archive(archive, Ecosystem::npm);
            for (const PackageFile& f : a.files) {
                CHECK_FALSE(f.rel_path.starts_with("/"));
                // no `..` segment survives sanitization
                std::size_t start = 0;
                while (start <= f.rel_path.size()) {
                    std::size_t end = f.rel_path.find('/', start);
                    if (end == std::string::npos) end = f.rel_path.size();
                    CHECK(f.rel_path.substr(start, end - start) != "..");
                    start = end + 1;
                }
            }
        } catch (const IngestError&) {
            // rejection is an acceptable outcome; escaping is not
        }
    }
}

TEST_CASE("duplicate entries: last one wins, inventory stays unique") {
    TempDir tmp("dup");
    const auto archive = tmp.path() / "d-1.tgz";
    pkgscan::testing::write_tar_gz(archive, {
                                                {"package/x.js", "first"},
                                                {"package/x.js", "second"},
                                            });
    PackageArtifact a = open_archive(archive, Ecosystem::npm);
    REQUIRE(a.files.size() == 1);
    CHECK(a.files[0].content == "second");
}

TEST_CASE("name/version parsing from archive filenames") {
    CHECK(parse_name_version("left-pad-1.3.0.tgz") ==
          std::pair<std::string, std::string>("left-pad", "1.3.0"));
    CHECK(parse_name_version("requests-2.28.1.tar.gz") ==
          std::pair<std::string, std::string>("requests", "2.28.1"));
    CHECK(parse_name_version("numpy-1.24.0-cp39-abi3-linux_x86_64.whl") ==
          std::pair<std::string, std::string>("numpy", "1.24.0"));
    CHECK(parse_name_version("noversion.tgz") ==
          std::pair<std::string, std::string>("noversion", ""));
}
