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

#include "kpa/io.hpp"

#include <fstream>
#include <sstream>

#include "kpa/error.hpp"

namespace kpa::io {

int CsvTable::column(std::string_view name) const {
  for (std::size_t i = 0; i < header.size(); ++i) {
    if (header[i] == name) return static_cast<int>(i);
  }
  return -1;
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot open file '" + path.string() + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

std::string_view trim(std::string_view s) {
  const auto is_space = [](char c) {
    return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v';
  };
  while (!s.empty() && is_space(s.front())) s.remove_prefix(1);
  while (!s.empty() && is_space(s.back())) s.remove_suffix(1);
  return s;
}

CsvTable parse_csv(std::string_view text, const std::string& origin) {
  if (text.starts_with("\xEF\xBB\xBF")) text.remove_prefix(3);

  std::vector<CsvRow> records;
  CsvRow current;
  std::string field;
  std::size_t line = 1;
  std::size_t i = 0;
  bool in_quotes = false;
  bool field_was_quoted = false;
  bool record_open = false;
  current.line = line;

  const auto end_field = [&] {
    current.fields.push_back(std::move(field));
    field.clear();
    field_was_quoted = false;
  };
  const auto end_record = [&] {
    end_field();
    // A physically empty line is not a record.
    if (!(current.fields.size() == 1 && current.fields[0].empty())) {
      records.push_back(std::move(current));
    }
    current = CsvRow{};
    record_open = false;
  };

  while (i < text.size()) {
    const char c = text[i];
    if (!record_open) {
      current.line = line;
      record_open = true;
    }
    if (in_quotes) {
      if (c == '"') {
        if (i + 1 < text.size() && text[i + 1] == '"') {
          field.push_back('"');
          i += 2;
          continue;
        }
        in_quotes = false;
        ++i;
        continue;
      }
      if (c == '\n') ++line;
      field.push_back(c);
      ++i;
      continue;
    }
    if (c == '"') {
      if (!field.empty() || field_was_quoted) {
        throw InputError(origin + ":" + std::to_string(line) +
                         ": malformed row: stray quote inside unquoted field");
      }
      in_quotes = true;
      field_was_quoted = true;
      ++i;
      continue;
    }
    if (c == ',') {
      end_field();
      ++i;
      continue;
    }
    if (c == '\r' && i + 1 < text.size() && text[i + 1] == '\n') {
      ++i;
      continue;
    }
    if (c == '\n') {
      end_record();
      ++line;
      ++i;
      continue;
    }
    if (field_was_quoted) {
      throw InputError(origin + ":" + std::to_string(line) +
                       ": malformed row: text after closing quote");
    }
    field.push_back(c);
    ++i;
  }
  if (in_quotes) {
    throw InputError(origin + ":" + std::to_string(current.line) +
                     ": malformed row: unterminated quoted field");
  }
  if (record_open || !field.empty()) end_record();

  CsvTable table;
  if (records.empty()) return table;
  table.header = std::move(records.front().fields);
  for (auto& h : table.header) h = std::string(trim(h));
  table.rows.assign(std::make_move_iterator(records.begin() + 1),
                    std::make_move_iterator(records.end()));
  for (const auto& row : table.rows) {
    if (row.fields.size() != table.header.size()) {
      throw InputError(origin + ":" + std::to_string(row.line) + ": malformed row: expected " +
                       std::to_string(table.header.size()) + " fields, found " +
                       std::to_string(row.fields.size()));
    }
  }
  return table;
}

CsvTable read_csv(const std::filesystem::path& path) {
  return parse_csv(read_file(path), path.string());
}

std::vector<JsonLine> read_jsonl(const std::filesystem::path& path) {
  const std::string text = read_file(path);
  std::vector<JsonLine> out;
  std::size_t line = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    const std::size_t nl = text.find('\n', pos);
    const std::size_t stop = nl == std::string::npos ? text.size() : nl;
    ++line;
    const std::string_view raw = trim(std::string_view(text).substr(pos, stop - pos));
    if (!raw.empty()) {
      nlohmann::json value;
      try {
        value = nlohmann::json::parse(raw);
      } catch (const nlohmann::json::parse_error& e) {
        throw InputError(path.string() + ":" + std::to_string(line) +
                         ": malformed row: " + e.what());
      }
      if (!value.is_object()) {
        throw InputError(path.string() + ":" + std::to_string(line) +
                         ": malformed row: expected a JSON object");
      }
      if (!value.contains("_manifest")) out.push_back({line, std::move(value)});
    }
    if (nl == std::string::npos) break;
    pos = nl + 1;
  }
  return out;
}

std::string csv_escape(std::string_view field) {
  if (field.find_first_of(",\"\n\r") == std::string_view::npos) return std::string(field);
  std::string out = "\"";
  for (char c : field) {
    if (c == '"') out.push_back('"');
    out.push_back(c);
  }
  out.push_back('"');
  return out;
}

AtomicWriter::AtomicWriter(std::filesystem::path path)
    : final_(std::move(path)), partial_(final_.string() + ".partial") {
  std::ofstream out(partial_, std::ios::binary | std::ios::trunc);
  if (!out) throw InputError("cannot write '" + partial_.string() + "'");
}

void AtomicWriter::write(std::string_view content) {
  std::ofstream out(partial_, std::ios::binary | std::ios::app);
  out.write(content.data(), static_cast<std::streamsize>(content.size()));
  if (!out) throw StageError("write failed for '" + partial_.string() + "'");
}

void AtomicWriter::commit() {
  std::error_code ec;
  std::filesystem::rename(partial_, final_, ec);
  if (ec) throw StageError("cannot rename '" + partial_.string() + "': " + ec.message());
}

}  // namespace kpa::io
