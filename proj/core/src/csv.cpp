/*
 * Copyright (c) 2026 the dmfdyn authors.
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#include "dmf/csv.hpp"

#include <charconv>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace dmf {

std::string format_double(double x) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", x);
  return buf;
}

double parse_double(const std::string& field) {
  double value = 0.0;
  const char* begin = field.data();
  const char* end = begin + field.size();
  auto [ptr, ec] = std::from_chars(begin, end, value);
  if (ec != std::errc{} || ptr != end)
    throw std::invalid_argument("not a number: '" + field + "'");
  return value;
}

namespace {

std::ofstream open_out(const std::filesystem::path& path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open for writing: " + path.string());
  return out;
}

std::ifstream open_in(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open for reading: " + path.string());
  return in;
}

}  // namespace

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> fields;
  std::string field;
  std::stringstream ss(line);
  while (std::getline(ss, field, ',')) fields.push_back(field);
  if (!line.empty() && line.back() == ',') fields.emplace_back();
  return fields;
}

void write_matrix_csv(const Mat& m, const std::filesystem::path& path) {
  std::ofstream out = open_out(path);
  for (Index i = 0; i < m.rows(); ++i) {
    for (Index j = 0; j < m.cols(); ++j) {
      if (j) out << ',';
      out << format_double(m(i, j));
    }
    out << '\n';
  }
}

Mat read_matrix_csv(const std::filesystem::path& path) {
  std::ifstream in = open_in(path);
  std::vector<std::vector<double>> rows;
  std::string line;
  long lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    auto fields = split_csv_line(line);
    std::vector<double> row;
    row.reserve(fields.size());
    for (const auto& f : fields) {
      try {
        row.push_back(parse_double(f));
      } catch (const std::invalid_argument& e) {
        throw CsvError(lineno, e.what());
      }
    }
    if (!rows.empty() && row.size() != rows.front().size())
      throw CsvError(lineno, "ragged row");
    rows.push_back(std::move(row));
  }
  if (rows.empty()) throw CsvError(1, "empty matrix file: " + path.string());
  Mat m(static_cast<Index>(rows.size()), static_cast<Index>(rows.front().size()));
  for (Index i = 0; i < m.rows(); ++i)
    for (Index j = 0; j < m.cols(); ++j) m(i, j) = rows[i][j];
  return m;
}

void write_mask_csv(const Mask& mask, const std::filesystem::path& path) {
  std::ofstream out = open_out(path);
  for (Index i = 0; i < mask.rows; ++i) {
    for (Index j = 0; j < mask.cols; ++j) {
      if (j) out << ',';
      out << (mask.at(i, j) ? '1' : '0');
    }
    out << '\n';
  }
}

Mask read_mask_csv(const std::filesystem::path& path) {
  Mat m = read_matrix_csv(path);
  Mask mask(m.rows(), m.cols());
  for (Index i = 0; i < m.rows(); ++i)
    for (Index j = 0; j < m.cols(); ++j) {
      double v = m(i, j);
      if (v != 0.0 && v != 1.0)
        throw CsvError(i + 1, "mask entries must be 0 or 1");
      mask.set(i, j, v != 0.0);
    }
  return mask;
}

void write_table_csv(const CsvTable& table, const std::filesystem::path& path) {
  std::ofstream out = open_out(path);
  for (std::size_t j = 0; j < table.header.size(); ++j) {
    if (j) out << ',';
    out << table.header[j];
  }
  out << '\n';
  for (const auto& row : table.rows) {
    for (std::size_t j = 0; j < row.size(); ++j) {
      if (j) out << ',';
      out << row[j];
    }
    out << '\n';
  }
}

CsvTable read_table_csv(const std::filesystem::path& path) {
  std::ifstream in = open_in(path);
  CsvTable table;
  std::string line;
  long lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    auto fields = split_csv_line(line);
    if (lineno == 1) {
      table.header = std::move(fields);
    } else {
      if (fields.size() != table.header.size())
        throw CsvError(lineno, "expected " + std::to_string(table.header.size()) + " fields, got " +
                                   std::to_string(fields.size()));
      table.rows.push_back(std::move(fields));
    }
  }
  if (table.header.empty()) throw CsvError(1, "missing header row");
  return table;
}

}  // namespace dmf
