#include "tabattack/data/csv.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <map>
#include <ostream>
#include <set>

#include "tabattack/error.hpp"

namespace tabattack {

std::vector<std::vector<std::string>> read_csv_records(std::istream& in) {
  std::vector<std::vector<std::string>> records;
  std::vector<std::string> record;
  std::string field;
  bool in_quotes = false;
  bool field_started = false;
  char ch;
  auto end_field = [&] {
    record.push_back(std::move(field));
    field.clear();
    field_started = false;
  };
  auto end_record = [&] {
    end_field();
    // A blank line yields a single empty field; skip it.
    if (!(record.size() == 1 && record[0].empty())) records.push_back(std::move(record));
    record.clear();
  };
  while (in.get(ch)) {
    if (in_quotes) {
      if (ch == '"') {
        if (in.peek() == '"') {
          in.get(ch);
          field.push_back('"');
        } else {
          in_quotes = false;
        }
      } else {
        field.push_back(ch);
      }
      continue;
    }
    switch (ch) {
      case '"':
        if (!field_started && field.empty()) {
          in_quotes = true;
          field_started = true;
        } else {
          field.push_back(ch);
        }
        break;
      case ',':
        end_field();
        break;
      case '\r':
        if (in.peek() == '\n') in.get(ch);
        end_record();
        break;
      case '\n':
        end_record();
        break;
      default:
        field.push_back(ch);
        field_started = true;
    }
  }
  if (in_quotes) throw IngestionError("unterminated quoted field at end of input");
  if (!field.empty() || !record.empty()) end_record();
  return records;
}

std::string csv_escape(const std::string& field) {
  if (field.find_first_of(",\"\r\n") == std::string::npos) return field;
  std::string out = "\"";
  for (char c : field) {
    if (c == '"') out.push_back('"');
    out.push_back(c);
  }
  out.push_back('"');
  return out;
}

void write_csv_record(std::ostream& out, const std::vector<std::string>& fields) {
  for (std::size_t i = 0; i < fields.size(); ++i) {
    if (i) out << ',';
    out << csv_escape(fields[i]);
  }
  out << '\n';
}

std::string format_number(double v) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t");
  return s.substr(b, e - b + 1);
}

bool parse_double(const std::string& s, double& out) {
  if (s.empty()) return false;
  const char* first = s.data();
  const char* last = s.data() + s.size();
  if (*first == '+') ++first;
  auto res = std::from_chars(first, last, out);
  return res.ec == std::errc() && res.ptr == last && std::isfinite(out);
}

}  // namespace

RawDataset parse_csv(std::istream& in, TabularSchema schema, const LoadOptions& options, LoadReport* report,
                     const std::string& source) {
  schema.validate(true);
  auto records = read_csv_records(in);
  if (records.empty()) throw IngestionError(source + ": missing header row");
  const auto& header = records.front();

  std::map<std::string, std::size_t> position;
  for (std::size_t i = 0; i < header.size(); ++i) position[trim(header[i])] = i;
  auto locate = [&](const std::string& name) {
    auto it = position.find(name);
    if (it == position.end()) throw IngestionError(source + ": missing column '" + name + "'");
    return it->second;
  };
  std::vector<std::size_t> col_pos;
  for (const auto& c : schema.columns()) col_pos.push_back(locate(c.name));
  const std::size_t target_pos = locate(schema.target().name);

  auto is_missing = [&](const std::string& v) {
    return std::find(options.missing_tokens.begin(), options.missing_tokens.end(), v) != options.missing_tokens.end();
  };

  // Pass 1: collect cells, dropping or rejecting rows with missing values.
  std::vector<std::vector<std::string>> cells;
  std::vector<std::size_t> line_of;
  std::size_t dropped = 0;
  for (std::size_t r = 1; r < records.size(); ++r) {
    const auto& rec = records[r];
    const std::size_t row_index = r - 1;
    std::vector<std::string> row;
    bool missing = false;
    auto take = [&](std::size_t pos, const std::string& name) {
      if (pos >= rec.size()) {
        throw IngestionError(source + ": row " + std::to_string(row_index) + " has no value for column '" + name + "'");
      }
      std::string v = trim(rec[pos]);
      if (is_missing(v)) {
        if (!options.drop_missing) {
          throw IngestionError(source + ": missing value in column '" + name + "' at row " + std::to_string(row_index));
        }
        missing = true;
      }
      row.push_back(std::move(v));
    };
    for (std::size_t c = 0; c < col_pos.size(); ++c) take(col_pos[c], schema.columns()[c].name);
    take(target_pos, schema.target().name);
    if (missing) {
      ++dropped;
      continue;
    }
    cells.push_back(std::move(row));
    line_of.push_back(row_index);
  }

  // Complete omitted category lists, alphabetically.
  for (std::size_t c = 0; c < schema.columns().size(); ++c) {
    const auto& col = schema.columns()[c];
    if (!col.is_categorical() || !col.categories.empty()) continue;
    std::set<std::string> seen;
    for (const auto& row : cells) seen.insert(row[c]);
    schema.set_categories(c, {seen.begin(), seen.end()});
  }
  if (schema.target().classes.empty()) {
    std::set<std::string> seen;
    for (const auto& row : cells) seen.insert(row.back());
    schema.set_classes({seen.begin(), seen.end()});
  }
  schema.validate(false);

  RawDataset out{schema, {}, SplitTag::All};
  out.rows.reserve(cells.size());
  const auto slots = schema.slots();
  for (std::size_t r = 0; r < cells.size(); ++r) {
    RawRow row;
    row.numeric.resize(static_cast<std::size_t>(schema.numeric_count()));
    row.categorical.resize(static_cast<std::size_t>(schema.categorical_count()));
    for (std::size_t c = 0; c < slots.size(); ++c) {
      const std::string& v = cells[r][c];
      const auto& name = schema.columns()[c].name;
      const auto idx = static_cast<std::size_t>(slots[c].index);
      if (slots[c].categorical) {
        if (schema.category_code(slots[c].index, v) < 0) {
          throw IngestionError(source + ": unknown category '" + v + "' in column '" + name + "' at row " +
                               std::to_string(line_of[r]));
        }
        row.categorical[idx] = v;
      } else {
        double d = 0.0;
        if (!parse_double(v, d)) {
          throw IngestionError(source + ": unparsable numeric '" + v + "' in column '" + name + "' at row " +
                               std::to_string(line_of[r]));
        }
        row.numeric[idx] = d;
      }
    }
    row.label = cells[r].back();
    if (schema.class_code(row.label) < 0) {
      throw IngestionError(source + ": unknown class '" + row.label + "' in column '" + schema.target().name +
                           "' at row " + std::to_string(line_of[r]));
    }
    out.rows.push_back(std::move(row));
  }
  if (report) report->dropped = dropped;
  return out;
}

RawDataset load_csv(const std::string& path, TabularSchema schema, const LoadOptions& options, LoadReport* report) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open data file '" + path + "'");
  return parse_csv(in, std::move(schema), options, report, path);
}

void write_csv(std::ostream& out, const RawDataset& data) {
  std::vector<std::string> header;
  for (const auto& c : data.schema.columns()) header.push_back(c.name);
  header.push_back(data.schema.target().name);
  write_csv_record(out, header);
  const auto slots = data.schema.slots();
  for (const auto& row : data.rows) {
    std::vector<std::string> fields;
    for (const auto& s : slots) {
      const auto i = static_cast<std::size_t>(s.index);
      fields.push_back(s.categorical ? row.categorical[i] : format_number(row.numeric[i]));
    }
    fields.push_back(row.label);
    write_csv_record(out, fields);
  }
}

}  // namespace tabattack
