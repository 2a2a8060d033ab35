#include <fstream>

#include <json.hpp>

#include "pkgscan/features.hpp"
#include "pkgscan/util.hpp"

namespace pkgscan {

namespace {

// The 91 tracked extensions: code/scripts, web assets, docs, config,
// binaries, archives, key material, media.
const std::vector<std::string>& builtin_extensions() {
    static const std::vector<std::string> exts = {
        // scripts & source
        "js", "mjs", "cjs", "ts", "py", "pyc", "pyw", "sh", "bash", "bat",
        "cmd", "ps1", "vbs", "rb", "pl", "php", "lua", "go", "rs", "java",
        "c", "cpp", "h", "cs",
        // web assets
        "html", "htm", "xml", "css", "scss", "svg", "jsx", "tsx",
        // documentation & text
        "md", "rst", "txt", "pdf", "doc", "docx", "csv", "log",
        // configuration & data
        "json", "yaml", "yml", "toml", "ini", "cfg", "conf", "env", "lock",
        "sql", "db",
        // binaries & native code
        "exe", "dll", "so", "bin", "msi", "apk", "jar", "class", "o", "wasm",
        "node",
        // archives
        "zip", "gz", "tgz", "tar", "bz2", "xz", "7z", "rar", "whl", "egg",
        "gem",
        // key material
        "pem", "crt", "cer", "key", "pub", "der", "asc",
        // media & fonts
        "png", "jpg", "jpeg", "gif", "ico", "bmp", "mp3", "mp4", "wav", "ttf",
        "woff"};
    return exts;
}

std::vector<std::string> build_names(const std::vector<std::string>& extensions) {
    std::vector<std::string> names = {
        "has_install_hook",
        "install_word_count",
        "install_line_count",
        "source_word_count",
        "source_line_count",
        "url_count",
        "ip_count",
        "suspicious_token_count",
        "base64_string_count",
        "source_string_entropy_mean",
        "source_string_entropy_std",
        "source_string_entropy_q3",
        "source_string_entropy_max",
        "source_string_homogeneous_count",
        "source_string_heterogeneous_count",
        "source_identifier_entropy_mean",
        "source_identifier_entropy_std",
        "source_identifier_entropy_q3",
        "source_identifier_entropy_max",
        "source_identifier_homogeneous_count",
        "source_identifier_heterogeneous_count",
        "install_string_entropy_mean",
        "install_string_entropy_std",
        "install_string_entropy_q3",
        "install_string_entropy_max",
        "install_identifier_entropy_mean",
        "install_identifier_entropy_std",
        "install_identifier_entropy_q3",
        "install_identifier_entropy_max",
        "square_bracket_ratio_mean",
        "square_bracket_ratio_std",
        "square_bracket_ratio_q3",
        "square_bracket_ratio_max",
        "equal_sign_ratio_mean",
        "equal_sign_ratio_std",
        "equal_sign_ratio_q3",
        "equal_sign_ratio_max",
        "plus_sign_ratio_mean",
        "plus_sign_ratio_std",
        "plus_sign_ratio_q3",
        "plus_sign_ratio_max",
    };
    names.reserve(names.size() + extensions.size());
    for (const std::string& ext : extensions) {
        names.push_back("ext_count_" + ext);
    }
    return names;
}

}  // namespace

std::size_t FeatureSchema::index_of(std::string_view name) const {
    for (std::size_t i = 0; i < names.size(); ++i) {
        if (names[i] == name) return i;
    }
    throw std::out_of_range("unknown feature name: " + std::string(name));
}

std::string FeatureSchema::content_hash() const {
    std::string canon = "pkgscan-schema\n" + version + "\n";
    for (const std::string& n : names) {
        canon += n;
        canon += '\n';
    }
    canon += "--\n";
    for (const std::string& e : extensions) {
        canon += e;
        canon += '\n';
    }
    return to_hex(fnv1a64(canon));
}

const FeatureSchema& FeatureSchema::builtin() {
    static const FeatureSchema schema = [] {
        FeatureSchema s;
        s.version = "1";
        s.extensions = builtin_extensions();
        s.names = build_names(s.extensions);
        return s;
    }();
    return schema;
}

FeatureSchema FeatureSchema::load(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) {
        throw std::runtime_error("cannot open schema file: " + path.string());
    }
    nlohmann::json doc = nlohmann::json::parse(in);
    FeatureSchema s;
    s.version = doc.at("version").get<std::string>();
    s.extensions = doc.at("extensions").get<std::vector<std::string>>();
    s.names = doc.at("features").get<std::vector<std::string>>();
    std::vector<std::string> expected = build_names(s.extensions);
    if (s.names != expected) {
        throw std::runtime_error("schema feature names do not match the canonical layout");
    }
    return s;
}

void FeatureSchema::save(const std::filesystem::path& path) const {
    nlohmann::json doc;
    doc["version"] = version;
    doc["features"] = names;
    doc["extensions"] = extensions;
    std::ofstream out(path);
    if (!out) {
        throw std::runtime_error("cannot write schema file: " + path.string());
    }
    out << doc.dump(2) << "\n";
}

}  // namespace pkgscan
