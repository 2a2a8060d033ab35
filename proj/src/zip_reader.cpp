#include <zlib.h>

#include <algorithm>
#include <cstring>
#include <fstream>

#include "archive_readers.hpp"

namespace pkgscan::detail {

namespace {

std::uint16_t rd16(const unsigned char* p) {
    return static_cast<std::uint16_t>(p[0] | (p[1] << 8));
}

std::uint32_t rd32(const unsigned char* p) {
    return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
           (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
}

struct CentralRecord {
    std::string name;
    std::uint16_t method = 0;
    std::uint32_t crc32 = 0;
    std::uint64_t compressed_size = 0;
    std::uint64_t uncompressed_size = 0;
    std::uint32_t local_offset = 0;
    std::uint32_t external_attrs = 0;
    std::uint16_t flags = 0;
};

constexpr std::uint32_t kEocdSig = 0x06054b50;
constexpr std::uint32_t kCentralSig = 0x02014b50;
constexpr std::uint32_t kLocalSig = 0x04034b50;

// Inflates raw deflate data, counting every produced byte against the budget
// regardless of how much we retain. Returns the retained prefix.
std::string inflate_raw(const std::string& compressed, std::uint64_t retain_cap,
                        std::uint64_t& produced_total, ExtractionBudget& budget) {
    z_stream strm{};
    if (inflateInit2(&strm, -15) != Z_OK) {
        throw IngestError(IngestErrc::corrupt_archive, "inflateInit failed");
    }
    std::string out;
    char outbuf[1 << 16];
    strm.next_in = reinterpret_cast<Bytef*>(const_cast<char*>(compressed.data()));
    strm.avail_in = static_cast<uInt>(compressed.size());
    int ret = Z_OK;
    try {
        do {
            strm.next_out = reinterpret_cast<Bytef*>(outbuf);
            strm.avail_out = sizeof(outbuf);
            ret = inflate(&strm, Z_FINISH);
            if (ret != Z_OK && ret != Z_STREAM_END && ret != Z_BUF_ERROR) {
                throw IngestError(IngestErrc::corrupt_archive,
                                  std::string("zip inflate error: ") +
                                      (strm.msg ? strm.msg : "unknown"));
            }
            std::size_t got = sizeof(outbuf) - strm.avail_out;
            budget.charge(got);
            produced_total += got;
            if (out.size() < retain_cap) {
                out.append(outbuf, std::min<std::size_t>(got, retain_cap - out.size()));
            }
            if (ret == Z_BUF_ERROR && strm.avail_in == 0 && got == 0) {
                throw IngestError(IngestErrc::corrupt_archive, "zip entry data truncated");
            }
        } while (ret != Z_STREAM_END);
    } catch (...) {
        inflateEnd(&strm);
        throw;
    }
    inflateEnd(&strm);
    return out;
}

}  // namespace

std::vector<RawEntry> read_zip(const std::filesystem::path& path, ExtractionBudget& budget) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw IngestError(IngestErrc::corrupt_archive, "cannot open " + path.string());
    }
    in.seekg(0, std::ios::end);
    const std::uint64_t file_size = static_cast<std::uint64_t>(in.tellg());
    if (file_size < 22) {
        throw IngestError(IngestErrc::corrupt_archive, "too small for a zip archive");
    }

    // Locate the end-of-central-directory record; the comment may push it
    // back by up to 64 KiB.
    const std::uint64_t tail_len = std::min<std::uint64_t>(file_size, 22 + 65535);
    std::string tail(tail_len, '\0');
    in.seekg(static_cast<std::streamoff>(file_size - tail_len));
    in.read(tail.data(), static_cast<std::streamsize>(tail_len));

    std::size_t eocd = std::string::npos;
    for (std::size_t i = tail.size() - 22 + 1; i-- > 0;) {
        if (rd32(reinterpret_cast<const unsigned char*>(tail.data() + i)) == kEocdSig) {
            eocd = i;
            break;
        }
    }
    if (eocd == std::string::npos) {
        throw IngestError(IngestErrc::corrupt_archive, "missing end-of-central-directory");
    }
    const unsigned char* e = reinterpret_cast<const unsigned char*>(tail.data() + eocd);
    const std::uint16_t num_entries = rd16(e + 10);
    const std::uint32_t cdir_size = rd32(e + 12);
    const std::uint32_t cdir_offset = rd32(e + 16);
    if (num_entries == 0xFFFF || cdir_offset == 0xFFFFFFFF) {
        throw IngestError(IngestErrc::corrupt_archive, "zip64 archives not supported");
    }
    if (std::uint64_t(cdir_offset) + cdir_size > file_size) {
        throw IngestError(IngestErrc::corrupt_archive, "central directory out of bounds");
    }

    std::string cdir(cdir_size, '\0');
    in.seekg(cdir_offset);
    in.read(cdir.data(), cdir_size);

    std::vector<CentralRecord> records;
    std::size_t pos = 0;
    for (std::uint16_t i = 0; i < num_entries; ++i) {
        if (pos + 46 > cdir.size() ||
            rd32(reinterpret_cast<const unsigned char*>(cdir.data() + pos)) != kCentralSig) {
            throw IngestError(IngestErrc::corrupt_archive, "bad central directory record");
        }
        const unsigned char* r = reinterpret_cast<const unsigned char*>(cdir.data() + pos);
        CentralRecord rec;
        rec.flags = rd16(r + 8);
        rec.method = rd16(r + 10);
        rec.crc32 = rd32(r + 16);
        rec.compressed_size = rd32(r + 20);
        rec.uncompressed_size = rd32(r + 24);
        const std::uint16_t name_len = rd16(r + 28);
        const std::uint16_t extra_len = rd16(r + 30);
        const std::uint16_t comment_len = rd16(r + 32);
        rec.external_attrs = rd32(r + 38);
        rec.local_offset = rd32(r + 42);
        if (pos + 46 + name_len > cdir.size()) {
            throw IngestError(IngestErrc::corrupt_archive, "central directory name overrun");
        }
        rec.name.assign(cdir.data() + pos + 46, name_len);
        records.push_back(std::move(rec));
        pos += 46u + name_len + extra_len + comment_len;
    }

    std::vector<RawEntry> entries;
    for (const CentralRecord& rec : records) {
        if (!rec.name.empty() && rec.name.back() == '/') continue;  // directory
        const std::uint32_t unix_mode = rec.external_attrs >> 16;
        if ((unix_mode & 0xF000) == 0xA000) continue;  // symlink, never followed
        if (rec.flags & 0x1) {
            throw IngestError(IngestErrc::unsupported_format, "encrypted zip entry");
        }
        if (rec.method != 0 && rec.method != 8) {
            throw IngestError(IngestErrc::unsupported_format,
                              "unsupported zip compression method");
        }

        if (std::uint64_t(rec.local_offset) + 30 > file_size) {
            throw IngestError(IngestErrc::corrupt_archive, "local header out of bounds");
        }
        unsigned char lh[30];
        in.seekg(rec.local_offset);
        in.read(reinterpret_cast<char*>(lh), 30);
        if (rd32(lh) != kLocalSig) {
            throw IngestError(IngestErrc::corrupt_archive, "bad local header signature");
        }
        const std::uint16_t lh_name = rd16(lh + 26);
        const std::uint16_t lh_extra = rd16(lh + 28);
        const std::uint64_t data_off = std::uint64_t(rec.local_offset) + 30 + lh_name + lh_extra;
        if (data_off + rec.compressed_size > file_size) {
            throw IngestError(IngestErrc::corrupt_archive, "zip entry data out of bounds");
        }

        std::string compressed(rec.compressed_size, '\0');
        in.seekg(static_cast<std::streamoff>(data_off));
        in.read(compressed.data(), static_cast<std::streamsize>(rec.compressed_size));

        RawEntry entry;
        entry.path = rec.name;
        if (rec.method == 0) {
            budget.charge(compressed.size());
            entry.size = compressed.size();
            if (entry.size <= budget.per_file_cap) {
                entry.content = std::move(compressed);
            } else {
                entry.truncated = true;
            }
        } else {
            std::uint64_t produced = 0;
            std::string data = inflate_raw(compressed, budget.per_file_cap, produced, budget);
            entry.size = produced;
            if (produced <= budget.per_file_cap) {
                entry.content = std::move(data);
            } else {
                entry.truncated = true;
            }
        }
        if (!entry.truncated) {
            const auto crc = ::crc32(0L, reinterpret_cast<const Bytef*>(entry.content.data()),
                                     static_cast<uInt>(entry.content.size()));
            if (static_cast<std::uint32_t>(crc) != rec.crc32) {
                throw IngestError(IngestErrc::corrupt_archive, "zip entry crc mismatch");
            }
        }
        entries.push_back(std::move(entry));
    }
    return entries;
}

}  // namespace pkgscan::detail
