#include "pkgscan/feature_csv.hpp"

#include <cstdlib>
#include <istream>
#include <ostream>
#include <stdexcept>

#include "pkgscan/util.hpp"

namespace pkgscan {

std::string csv_escape(const std::string& field) {
    if (field.find_first_of(",\"\n\r") == std::string::npos) return field;
    std::string out = "\"";
    for (char c : field) {
        if (c == '"') out += '"';
        out += c;
    }
    out += '"';
    return out;
}

std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> fields;
    std::string current;
    bool quoted = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
        char c = line[i];
        if (quoted) {
            if (c == '"') {
                if (i + 1 < line.size() && line[i + 1] == '"') {
                    current += '"';
                    ++i;
                } else {
                    quoted = false;
                }
            } else {
                current += c;
            }
        } else if (c == '"') {
            quoted = true;
        } else if (c == ',') {
            fields.push_back(std::move(current));
            current.clear();
        } else if (c != '\r') {
            current += c;
        }
    }
    fields.push_back(std::move(current));
    return fields;
}

void write_feature_csv_header(std::ostream& out, const FeatureSchema& schema) {
    out << "ecosystem,name,version,label";
    for (const std::string& name : schema.names) {
        out << ',' << name;
    }
    out << '\n';
}

void write_feature_csv_row(std::ostream& out, const FeatureRow& row) {
    out << ecosystem_name(row.ecosystem) << ',' << csv_escape(row.name) << ','
        << csv_escape(row.version) << ','
        << (row.label.has_value() ? std::to_string(*row.label) : std::string("-"));
    for (double v : row.vector.values) {
        out << ',' << format_double(v);
    }
    out << '\n';
}

std::vector<FeatureRow> read_feature_csv(std::istream& in, const FeatureSchema& schema) {
    std::string line;
    if (!std::getline(in, line)) {
        throw std::runtime_error("feature csv: empty file");
    }
    std::vector<std::string> header = split_csv_line(line);
    if (header.size() != 4 + schema.size()) {
        throw std::runtime_error("feature csv: header has " + std::to_string(header.size()) +
                                 " columns, expected " + std::to_string(4 + schema.size()));
    }
    for (std::size_t i = 0; i < schema.size(); ++i) {
        if (header[4 + i] != schema.names[i]) {
            throw std::runtime_error("feature csv: column " + header[4 + i] +
                                     " does not match schema (" + schema.names[i] + ")");
        }
    }

    std::vector<FeatureRow> rows;
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty() || line == "\r") continue;
        if (line[0] == '#') continue;  // error markers and comments
        std::vector<std::string> fields = split_csv_line(line);
        if (fields.size() != 4 + schema.size()) {
            throw std::runtime_error("feature csv: line " + std::to_string(line_no) +
                                     " has wrong column count");
        }
        FeatureRow row;
        row.ecosystem = ecosystem_from_name(fields[0]);
        row.name = fields[1];
        row.version = fields[2];
        if (fields[3] == "0") {
            row.label = 0;
        } else if (fields[3] == "1") {
            row.label = 1;
        } else if (fields[3] == "-") {
            row.label = std::nullopt;
        } else {
            throw std::runtime_error("feature csv: bad label on line " +
                                     std::to_string(line_no));
        }
        row.vector.schema_version = schema.version;
        row.vector.values.reserve(schema.size());
        for (std::size_t i = 0; i < schema.size(); ++i) {
            const std::string& field = fields[4 + i];
            char* end = nullptr;
            double v = std::strtod(field.c_str(), &end);
            if (end == field.c_str() || *end != '\0') {
                throw std::runtime_error("feature csv: bad numeric value on line " +
                                         std::to_string(line_no));
            }
            row.vector.values.push_back(v);
        }
        rows.push_back(std::move(row));
    }
    return rows;
}

}  // namespace pkgscan
