#include "spt/output.hpp"

#include <cstdio>

#include "spt/errors.hpp"

namespace spt {

std::string config_hash(const nlohmann::json& j)
{
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char ch : j.dump()) {
        h ^= ch;
        h *= 0x100000001b3ULL;
    }
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

CsvWriter::CsvWriter(std::ostream& os, const nlohmann::json& metadata, const std::vector<std::string>& header)
    : os_(os), cols_(header.size())
{
    os_ << "# " << metadata.dump() << '\n';
    for (std::size_t i = 0; i < header.size(); ++i) os_ << (i ? "," : "") << header[i];
    os_ << '\n';
}

void CsvWriter::row(const std::vector<double>& values)
{
    if (values.size() != cols_) throw InvalidInput("csv row has " + std::to_string(values.size()) + " columns, expected " + std::to_string(cols_));
    char buf[32];
    for (std::size_t i = 0; i < values.size(); ++i) {
        std::snprintf(buf, sizeof buf, "%.17g", values[i]);
        os_ << (i ? "," : "") << buf;
    }
    os_ << '\n';
    ++rows_;
}

void write_json(std::ostream& os, const nlohmann::json& j) { os << j.dump(2) << '\n'; }

} // namespace spt
