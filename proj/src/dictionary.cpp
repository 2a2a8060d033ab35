#include <fstream>
#include <set>

#include "pkgscan/features.hpp"
#include "pkgscan/util.hpp"

namespace pkgscan {

namespace {

constexpr std::string_view kB64Alphabet =
    "ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz0123456789+/";
constexpr std::string_view kB32Alphabet = "ABCDEFGHIJKLMNOPQRSTUVWXYZ234567";

std::string base64_encode(std::string_view data, bool pad) {
    std::string out;
    out.reserve((data.size() + 2) / 3 * 4);
    std::size_t i = 0;
    while (i + 3 <= data.size()) {
        std::uint32_t v = (static_cast<unsigned char>(data[i]) << 16) |
                          (static_cast<unsigned char>(data[i + 1]) << 8) |
                          static_cast<unsigned char>(data[i + 2]);
        out += kB64Alphabet[(v >> 18) & 63];
        out += kB64Alphabet[(v >> 12) & 63];
        out += kB64Alphabet[(v >> 6) & 63];
        out += kB64Alphabet[v & 63];
        i += 3;
    }
    std::size_t rem = data.size() - i;
    if (rem == 1) {
        std::uint32_t v = static_cast<unsigned char>(data[i]) << 16;
        out += kB64Alphabet[(v >> 18) & 63];
        out += kB64Alphabet[(v >> 12) & 63];
        if (pad) out += "==";
    } else if (rem == 2) {
        std::uint32_t v = (static_cast<unsigned char>(data[i]) << 16) |
                          (static_cast<unsigned char>(data[i + 1]) << 8);
        out += kB64Alphabet[(v >> 18) & 63];
        out += kB64Alphabet[(v >> 12) & 63];
        out += kB64Alphabet[(v >> 6) & 63];
        if (pad) out += '=';
    }
    return out;
}

std::string base32_encode(std::string_view data, bool pad) {
    std::string out;
    std::uint64_t buffer = 0;
    int bits = 0;
    for (unsigned char c : data) {
        buffer = (buffer << 8) | c;
        bits += 8;
        while (bits >= 5) {
            out += kB32Alphabet[(buffer >> (bits - 5)) & 31];
            bits -= 5;
        }
    }
    if (bits > 0) {
        out += kB32Alphabet[(buffer << (5 - bits)) & 31];
    }
    if (pad) {
        while (out.size() % 8 != 0) out += '=';
    }
    return out;
}

std::string rot13(std::string_view s) {
    std::string out(s);
    for (char& c : out) {
        if (c >= 'a' && c <= 'z') {
            c = static_cast<char>('a' + (c - 'a' + 13) % 26);
        } else if (c >= 'A' && c <= 'Z') {
            c = static_cast<char>('A' + (c - 'A' + 13) % 26);
        }
    }
    return out;
}

std::string url_encode(std::string_view s) {
    static const char* hex = "0123456789ABCDEF";
    std::string out;
    for (unsigned char c : s) {
        bool unreserved = (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') ||
                          (c >= '0' && c <= '9') || c == '-' || c == '.' ||
                          c == '_' || c == '~';
        if (unreserved) {
            out += static_cast<char>(c);
        } else {
            out += '%';
            out += hex[c >> 4];
            out += hex[c & 0xf];
        }
    }
    return out;
}

/// Substring-matchable core of an encoding: the characters that depend only
/// on the keyword bytes when the keyword sits at byte offset ≡ shift inside a
/// larger blob. `bits_per_char` is 6 for base64, 5 for base32.
std::string shifted_core(std::string_view keyword, std::size_t shift, int bits_per_char) {
    std::string prefixed(shift, '\0');
    prefixed += keyword;
    std::string full = bits_per_char == 6 ? base64_encode(prefixed, false)
                                          : base32_encode(prefixed, false);
    const std::size_t bpc = static_cast<std::size_t>(bits_per_char);
    const std::size_t lead = (shift * 8 + bpc - 1) / bpc;
    const std::size_t pure_end = (shift + keyword.size()) * 8 / bpc;
    if (pure_end <= lead || pure_end > full.size()) return "";
    return full.substr(lead, pure_end - lead);
}

}  // namespace

std::vector<std::string> SensitiveDictionary::builtin_keywords() {
    return {
        // reverse shells & command execution
        "/dev/tcp/", "bash -i", "sh -i", "nc -e", "nc -lvp", "ncat --exec",
        "mkfifo /tmp", "socat tcp", "/bin/bash -c", "os.system", "subprocess",
        "child_process", "execsync", "pty.spawn", "cmd.exe /c",
        "powershell -enc", "powershell -nop", "reverse_shell",
        // sensitive files & credentials
        "/etc/passwd", "/etc/shadow", "/etc/hosts", ".ssh/id_rsa",
        "authorized_keys", ".bash_history", ".aws/credentials", ".npmrc",
        "wallet.dat", "keychain",
        // host & network recon
        "ipify", "ifconfig.me", "icanhazip", "ipinfo.io", "os.environ",
        "process.env", "whoami", "keylogger", "screenshot",
        // droppers & exfil transport
        "curl | sh", "wget http", "invoke-webrequest", "downloadstring",
        "net.webclient", "ngrok", "pastebin.com", "discord.com/api/webhooks",
        "burpcollaborator", "oastify.com", "interact.sh", "requestbin",
        "dnslog", "xmlhttprequest",
        // decoding & deobfuscation
        "base64 -d", "frombase64string", "atob(", "b64decode",
        "marshal.loads", "pickle.loads", "fromcharcode", "charcodeat",
        // persistence
        "crontab", "/etc/rc.local", "systemctl enable", "reg add", "schtasks",
    };
}

std::vector<std::string> SensitiveDictionary::load_keywords(
    const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) {
        throw std::runtime_error("cannot open dictionary file: " + path.string());
    }
    std::vector<std::string> keywords;
    std::string line;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        std::size_t start = line.find_first_not_of(" \t");
        if (start == std::string::npos) continue;
        std::size_t end = line.find_last_not_of(" \t");
        std::string word = line.substr(start, end - start + 1);
        if (word.empty() || word[0] == '#') continue;
        keywords.push_back(std::move(word));
    }
    return keywords;
}

SensitiveDictionary expand_dictionary(const std::vector<std::string>& keywords) {
    SensitiveDictionary dict;
    dict.entries.reserve(keywords.size());
    for (const std::string& keyword : keywords) {
        std::set<std::string> variants;
        variants.insert(ascii_lower(keyword));
        variants.insert(ascii_lower(base64_encode(keyword, true)));
        variants.insert(ascii_lower(base32_encode(keyword, true)));
        variants.insert(ascii_lower(rot13(keyword)));
        variants.insert(ascii_lower(url_encode(keyword)));
        // byte-shifted cores so keywords embedded mid-blob still match
        for (std::size_t shift : {std::size_t{0}, std::size_t{1}, std::size_t{2}}) {
            for (int bits : {6, 5}) {
                std::string core = shifted_core(keyword, shift, bits);
                if (core.size() >= 4) {
                    variants.insert(ascii_lower(core));
                }
            }
        }
        SensitiveDictionary::Entry entry;
        entry.keyword = keyword;
        entry.variants.assign(variants.begin(), variants.end());
        dict.entries.push_back(std::move(entry));
    }
    return dict;
}

}  // namespace pkgscan
