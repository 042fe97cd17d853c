#pragma once

#include <charconv>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>
#include <string_view>
#include <system_error>
#include <vector>

#include "carinox/errors.hpp"

namespace carinox::csv {

// Shortest decimal string that round-trips the double exactly. Keeps report
// files byte-stable across runs of the same build.
inline std::string format_double(double v) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  if (ec != std::errc())
    throw numeric_error("format_double: conversion failed");
  return std::string(buf, ptr);
}

inline double parse_double(std::string_view s, std::size_t line_no) {
  double v = 0.0;
  const char* begin = s.data();
  const char* end = s.data() + s.size();
  auto [ptr, ec] = std::from_chars(begin, end, v);
  if (ec != std::errc() || ptr != end)
    throw parse_error("line " + std::to_string(line_no) +
                      ": not a number: '" + std::string(s) + "'");
  return v;
}

inline std::vector<std::string> split_fields(std::string_view line) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    const std::size_t pos = line.find(',', start);
    if (pos == std::string_view::npos) {
      out.emplace_back(line.substr(start));
      break;
    }
    out.emplace_back(line.substr(start, pos - start));
    start = pos + 1;
  }
  return out;
}

// Plain comma-separated fields; no quoting dialect, so fields that would
// need quoting are rejected instead of written ambiguously.
inline void check_field(const std::string& f) {
  if (f.find_first_of(",\"\n\r") != std::string::npos)
    throw contract_error("csv field needs quoting, refusing: '" + f + "'");
}

inline std::string join_row(const std::vector<std::string>& fields) {
  std::string row;
  for (std::size_t i = 0; i < fields.size(); ++i) {
    check_field(fields[i]);
    if (i) row += ',';
    row += fields[i];
  }
  row += '\n';
  return row;
}

inline std::vector<std::string> read_lines(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw parse_error("cannot open file: " + path);
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    lines.push_back(line);
  }
  return lines;
}

inline void write_text(const std::string& path, const std::string& body) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw error("cannot open file for writing: " + path);
  out << body;
  if (!out) throw error("write failed: " + path);
}

}  // namespace carinox::csv
