#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "tabattack/data/dataset.hpp"

namespace tabattack {

/// RFC-4180 records: quoted fields, doubled quotes, CRLF or LF line ends.
std::vector<std::vector<std::string>> read_csv_records(std::istream& in);

std::string csv_escape(const std::string& field);
void write_csv_record(std::ostream& out, const std::vector<std::string>& fields);

struct LoadOptions {
  /// Skip rows holding a missing token instead of rejecting the file.
  bool drop_missing = false;
  std::vector<std::string> missing_tokens{"", "?", "NA"};
};

struct LoadReport {
  std::size_t dropped = 0;
};

/// Parses a header+rows CSV against `schema`. Header order is free; extra
/// columns are ignored. Categorical columns without an explicit category list
/// are completed with the sorted set of observed values.
RawDataset parse_csv(std::istream& in, TabularSchema schema, const LoadOptions& options = {},
                     LoadReport* report = nullptr, const std::string& source = "<stream>");

RawDataset load_csv(const std::string& path, TabularSchema schema, const LoadOptions& options = {},
                    LoadReport* report = nullptr);

/// Writes rows in schema column order with the target last.
void write_csv(std::ostream& out, const RawDataset& data);

std::string format_number(double v);

}  // namespace tabattack
