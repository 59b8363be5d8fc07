// Copyright 2026 The KPA Toolkit Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <cstddef>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

namespace kpa::io {

struct CsvRow {
  std::size_t line = 0;  // 1-based line where the record starts
  std::vector<std::string> fields;
};

struct CsvTable {
  std::vector<std::string> header;
  std::vector<CsvRow> rows;

  // Index of a header column, or -1.
  int column(std::string_view name) const;
};

// RFC 4180 CSV: quoted fields, doubled quotes, embedded newlines, CRLF and
// a leading UTF-8 BOM are accepted. The first record is the header.
CsvTable parse_csv(std::string_view text, const std::string& origin);
CsvTable read_csv(const std::filesystem::path& path);

struct JsonLine {
  std::size_t line = 0;
  nlohmann::json value;
};

// Blank lines are skipped; lines holding a "_manifest" object are skipped too.
std::vector<JsonLine> read_jsonl(const std::filesystem::path& path);

std::string read_file(const std::filesystem::path& path);

std::string_view trim(std::string_view s);

std::string csv_escape(std::string_view field);

// Writes to "<path>.partial"; commit() renames onto the final path.
class AtomicWriter {
 public:
  explicit AtomicWriter(std::filesystem::path path);
  void write(std::string_view content);
  void commit();
  const std::filesystem::path& partial_path() const { return partial_; }

 private:
  std::filesystem::path final_;
  std::filesystem::path partial_;
};

}  // namespace kpa::io
