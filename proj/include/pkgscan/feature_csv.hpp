#pragma once

#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "pkgscan/features.hpp"
#include "pkgscan/ingest.hpp"

namespace pkgscan {

/// One row of the feature CSV. label: 1 malicious, 0 benign, unset for `-`.
struct FeatureRow {
    Ecosystem ecosystem = Ecosystem::npm;
    std::string name;
    std::string version;
    std::optional<int> label;
    FeatureVector vector;
};

/// Header: ecosystem,name,version,label,<schema names...>
void write_feature_csv_header(std::ostream& out, const FeatureSchema& schema);
void write_feature_csv_row(std::ostream& out, const FeatureRow& row);

/// Reads a full CSV; validates the header against the schema.
std::vector<FeatureRow> read_feature_csv(std::istream& in, const FeatureSchema& schema);

std::string csv_escape(const std::string& field);
std::vector<std::string> split_csv_line(const std::string& line);

}  // namespace pkgscan
