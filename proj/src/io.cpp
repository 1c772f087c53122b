#include "gcr/io.hpp"

#include <charconv>
#include <fstream>
#include <string_view>

#include "gcr/errors.hpp"

namespace gcr {

namespace {

std::vector<std::string_view> split_fields(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const std::size_t comma = line.find(',', start);
    if (comma == std::string_view::npos) {
      out.push_back(line.substr(start));
      return out;
    }
    out.push_back(line.substr(start, comma - start));
    start = comma + 1;
  }
}

std::vector<std::string_view> split_lines(std::string_view text) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (start < text.size()) {
    std::size_t nl = text.find('\n', start);
    if (nl == std::string_view::npos) nl = text.size();
    std::string_view line = text.substr(start, nl - start);
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (!line.empty()) out.push_back(line);
    start = nl + 1;
  }
  return out;
}

double parse_double_field(std::string_view s) {
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size())
    throw IoError("csv: bad numeric field '" + std::string(s) + "'");
  return v;
}

int parse_int_field(std::string_view s) {
  int v = 0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size())
    throw IoError("csv: bad integer field '" + std::string(s) + "'");
  return v;
}

}  // namespace

std::string format_double(double v) {
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  if (ec != std::errc()) throw IoError("format_double: conversion failed");
  return std::string(buf, ptr);
}

std::string dataset_to_csv(const Dataset& data) {
  if (data.count() < 1 || data.dim() < 1)
    throw EmptyInput("dataset_to_csv: empty dataset");
  if (data.has_labels() &&
      static_cast<int>(data.labels.size()) != data.count())
    throw LengthMismatch("dataset_to_csv: labels/sample mismatch");

  std::string out;
  for (int d = 0; d < data.dim(); ++d) {
    if (d > 0) out += ',';
    out += 'x';
    out += std::to_string(d);
  }
  if (data.has_labels()) out += ",label";
  out += '\n';

  for (int i = 0; i < data.count(); ++i) {
    for (int d = 0; d < data.dim(); ++d) {
      if (d > 0) out += ',';
      out += format_double(data.x(d, i));
    }
    if (data.has_labels()) {
      out += ',';
      out += std::to_string(data.labels[i]);
    }
    out += '\n';
  }
  return out;
}

Dataset dataset_from_csv(const std::string& text) {
  const auto lines = split_lines(text);
  if (lines.size() < 2) throw IoError("csv: need a header plus one sample");

  const auto header = split_fields(lines[0]);
  const bool has_labels = header.back() == "label";
  const int dim = static_cast<int>(header.size()) - (has_labels ? 1 : 0);
  if (dim < 1) throw IoError("csv: no feature columns");

  const int n = static_cast<int>(lines.size()) - 1;
  Dataset data;
  data.x.resize(dim, n);
  if (has_labels) data.labels.resize(n);
  for (int i = 0; i < n; ++i) {
    const auto fields = split_fields(lines[i + 1]);
    if (static_cast<int>(fields.size()) != dim + (has_labels ? 1 : 0))
      throw IoError("csv: row " + std::to_string(i) + " has " +
                    std::to_string(fields.size()) + " fields");
    for (int d = 0; d < dim; ++d) data.x(d, i) = parse_double_field(fields[d]);
    if (has_labels) data.labels[i] = parse_int_field(fields.back());
  }
  return data;
}

std::string labels_to_csv(const std::vector<int>& labels) {
  std::string out = "index,label\n";
  for (std::size_t i = 0; i < labels.size(); ++i) {
    out += std::to_string(i);
    out += ',';
    out += std::to_string(labels[i]);
    out += '\n';
  }
  return out;
}

std::string matrix_to_csv(const Eigen::MatrixXd& m) {
  std::string out;
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    for (Eigen::Index c = 0; c < m.cols(); ++c) {
      if (c > 0) out += ',';
      out += format_double(m(r, c));
    }
    out += '\n';
  }
  return out;
}

void write_file(const std::string& path, const std::string& contents) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot open for writing: " + path);
  f.write(contents.data(), static_cast<std::streamsize>(contents.size()));
  if (!f) throw IoError("write failed: " + path);
}

std::string read_file(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot open for reading: " + path);
  std::string out((std::istreambuf_iterator<char>(f)),
                  std::istreambuf_iterator<char>());
  if (f.bad()) throw IoError("read failed: " + path);
  return out;
}

}  // namespace gcr
