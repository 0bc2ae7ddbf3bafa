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

#pragma once

#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

#include "dmf/matrix.hpp"

namespace dmf {

/// Parse failure carrying the 1-based row where it happened.
struct CsvError : std::runtime_error {
  CsvError(long row, const std::string& message)
      : std::runtime_error("row " + std::to_string(row) + ": " + message), row(row) {}
  long row;
};

/// Round-trippable decimal rendering ('.' decimal point, no locale).
std::string format_double(double x);

/// Strict double parse of a whole field; throws std::invalid_argument.
double parse_double(const std::string& field);

/// Matrices serialize as plain rows of comma-separated decimals, no header,
/// newline-terminated.
void write_matrix_csv(const Mat& m, const std::filesystem::path& path);
Mat read_matrix_csv(const std::filesystem::path& path);

/// Masks serialize as 0/1 integers in the same layout.
void write_mask_csv(const Mask& mask, const std::filesystem::path& path);
Mask read_mask_csv(const std::filesystem::path& path);

/// Tabular files (trials.csv, trajectories) carry a header row.
struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
};
void write_table_csv(const CsvTable& table, const std::filesystem::path& path);
CsvTable read_table_csv(const std::filesystem::path& path);

std::vector<std::string> split_csv_line(const std::string& line);

}  // namespace dmf
