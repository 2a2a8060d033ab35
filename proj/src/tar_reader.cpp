#include <zlib.h>

#include <cstring>
#include <fstream>

#include "archive_readers.hpp"

namespace pkgscan::detail {

namespace {

constexpr std::size_t kBlock = 512;

std::string inflate_gzip(const std::filesystem::path& path, ExtractionBudget& budget) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw IngestError(IngestErrc::corrupt_archive, "cannot open " + path.string());
    }

    z_stream strm{};
    // 15 + 32: zlib or gzip header auto-detection
    if (inflateInit2(&strm, 15 + 32) != Z_OK) {
        throw IngestError(IngestErrc::corrupt_archive, "inflateInit failed");
    }

    std::string out;
    char inbuf[1 << 16];
    char outbuf[1 << 16];
    int ret = Z_OK;
    try {
        while (ret != Z_STREAM_END) {
            in.read(inbuf, sizeof(inbuf));
            std::streamsize got = in.gcount();
            if (got == 0 && ret != Z_STREAM_END) {
                throw IngestError(IngestErrc::corrupt_archive, "truncated gzip stream");
            }
            strm.next_in = reinterpret_cast<Bytef*>(inbuf);
            strm.avail_in = static_cast<uInt>(got);
            while (strm.avail_in > 0 && ret != Z_STREAM_END) {
                strm.next_out = reinterpret_cast<Bytef*>(outbuf);
                strm.avail_out = sizeof(outbuf);
                ret = inflate(&strm, Z_NO_FLUSH);
                if (ret != Z_OK && ret != Z_STREAM_END) {
                    throw IngestError(IngestErrc::corrupt_archive,
                                      std::string("gzip inflate error: ") +
                                          (strm.msg ? strm.msg : "unknown"));
                }
                std::size_t produced = sizeof(outbuf) - strm.avail_out;
                budget.charge(produced);
                out.append(outbuf, produced);
            }
        }
    } catch (...) {
        inflateEnd(&strm);
        throw;
    }
    inflateEnd(&strm);
    return out;
}

std::uint64_t parse_tar_size(const char* field, std::size_t len) {
    // GNU base-256 extension: high bit of the first byte set.
    if (static_cast<unsigned char>(field[0]) & 0x80) {
        std::uint64_t v = static_cast<unsigned char>(field[0]) & 0x7f;
        for (std::size_t i = 1; i < len; ++i) {
            v = (v << 8) | static_cast<unsigned char>(field[i]);
        }
        return v;
    }
    std::uint64_t v = 0;
    for (std::size_t i = 0; i < len; ++i) {
        char c = field[i];
        if (c == ' ' || c == '\0') continue;
        if (c < '0' || c > '7') {
            throw IngestError(IngestErrc::corrupt_archive, "bad octal size field");
        }
        v = v * 8 + static_cast<std::uint64_t>(c - '0');
    }
    return v;
}

bool is_zero_block(const char* p) {
    for (std::size_t i = 0; i < kBlock; ++i) {
        if (p[i] != 0) return false;
    }
    return true;
}

bool checksum_ok(const char* hdr) {
    std::uint64_t stored = 0;
    bool any_digit = false;
    for (std::size_t i = 148; i < 156; ++i) {
        char c = hdr[i];
        if (c >= '0' && c <= '7') {
            stored = stored * 8 + static_cast<std::uint64_t>(c - '0');
            any_digit = true;
        } else if (any_digit) {
            break;
        }
    }
    std::uint64_t sum = 0;
    for (std::size_t i = 0; i < kBlock; ++i) {
        sum += (i >= 148 && i < 156) ? 32u
                                     : static_cast<unsigned char>(hdr[i]);
    }
    return sum == stored;
}

std::string field_str(const char* p, std::size_t len) {
    std::size_t n = 0;
    while (n < len && p[n] != '\0') ++n;
    return std::string(p, n);
}

// pax extended header: sequence of "<len> <key>=<value>\n" records.
std::string pax_path_override(const std::string& data) {
    std::size_t pos = 0;
    std::string path;
    while (pos < data.size()) {
        std::size_t sp = data.find(' ', pos);
        if (sp == std::string::npos) break;
        std::uint64_t reclen = 0;
        for (std::size_t i = pos; i < sp; ++i) {
            char c = data[i];
            if (c < '0' || c > '9') return path;
            reclen = reclen * 10 + static_cast<std::uint64_t>(c - '0');
        }
        if (reclen == 0 || pos + reclen > data.size()) break;
        std::string record = data.substr(sp + 1, pos + reclen - sp - 2);
        if (record.rfind("path=", 0) == 0) {
            path = record.substr(5);
        }
        pos += reclen;
    }
    return path;
}

}  // namespace

std::vector<RawEntry> read_tar_gz(const std::filesystem::path& path, ExtractionBudget& budget) {
    const std::string tar = inflate_gzip(path, budget);
    if (tar.size() < kBlock) {
        throw IngestError(IngestErrc::corrupt_archive, "tar stream shorter than one block");
    }

    std::vector<RawEntry> entries;
    std::string gnu_longname;
    std::string pax_path;
    std::size_t off = 0;

    while (off + kBlock <= tar.size()) {
        const char* hdr = tar.data() + off;
        if (is_zero_block(hdr)) break;  // end-of-archive marker
        if (!checksum_ok(hdr)) {
            throw IngestError(IngestErrc::corrupt_archive, "tar header checksum mismatch");
        }

        std::string name = field_str(hdr + 0, 100);
        std::string prefix = field_str(hdr + 345, 155);
        const std::uint64_t size = parse_tar_size(hdr + 124, 12);
        const char typeflag = hdr[156];
        off += kBlock;

        const std::uint64_t padded = (size + kBlock - 1) / kBlock * kBlock;
        if (off + padded > tar.size()) {
            throw IngestError(IngestErrc::corrupt_archive, "tar entry truncated");
        }

        switch (typeflag) {
        case 'L':  // GNU long name: content names the next entry
            gnu_longname = field_str(tar.data() + off, static_cast<std::size_t>(size));
            off += padded;
            continue;
        case 'x': {  // pax extended header for the next entry
            pax_path = pax_path_override(tar.substr(off, static_cast<std::size_t>(size)));
            off += padded;
            continue;
        }
        case '0':
        case '\0':
        case '7':  // contiguous files treated as regular
            break;
        default:
            // directories, links, fifos, global pax headers: no content kept,
            // links are never followed
            gnu_longname.clear();
            pax_path.clear();
            off += padded;
            continue;
        }

        RawEntry entry;
        if (!pax_path.empty()) {
            entry.path = pax_path;
        } else if (!gnu_longname.empty()) {
            entry.path = gnu_longname;
        } else if (!prefix.empty()) {
            entry.path = prefix + "/" + name;
        } else {
            entry.path = name;
        }
        gnu_longname.clear();
        pax_path.clear();

        entry.size = size;
        if (size <= budget.per_file_cap) {
            entry.content = tar.substr(off, static_cast<std::size_t>(size));
        } else {
            entry.truncated = true;
        }
        entries.push_back(std::move(entry));
        off += padded;
    }
    return entries;
}

}  // namespace pkgscan::detail
