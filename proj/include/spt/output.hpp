#pragma once

#include <cstdint>
#include <ostream>
#include <string>
#include <vector>

#include <json.hpp>

namespace spt {

/// FNV-1a over the compact dump of j, as 16 hex digits.
std::string config_hash(const nlohmann::json& j);

/// One '#'-prefixed metadata line, then a header row, then data rows.
class CsvWriter {
public:
    CsvWriter(std::ostream& os, const nlohmann::json& metadata, const std::vector<std::string>& header);

    void row(const std::vector<double>& values);
    std::size_t rows() const { return rows_; }

private:
    std::ostream& os_;
    std::size_t cols_;
    std::size_t rows_ = 0;
};

void write_json(std::ostream& os, const nlohmann::json& j);

} // namespace spt
