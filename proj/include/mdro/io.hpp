#pragma once

// Plain-text formats: numeric CSV datasets, model files (one number per
// line, intercept last) and flat key=value config files.

#include "mdro/model.hpp"

#include <charconv>
#include <fstream>
#include <istream>
#include <map>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <system_error>
#include <vector>

namespace mdro {

/// File could not be opened, read or parsed.
class io_error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Shortest text that parses back to exactly `v`.
inline std::string format_double(double v) {
  char buf[32];
  auto [end, ec] = std::to_chars(buf, buf + sizeof buf, v);
  if (ec != std::errc()) throw std::runtime_error("format_double: conversion failed");
  return std::string(buf, end);
}

inline double parse_double(std::string_view s, std::string_view what = "value") {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  if (!s.empty() && s.front() == '+') s.remove_prefix(1);
  double v = 0.0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size() || s.empty())
    throw io_error("cannot parse " + std::string(what) + " '" + std::string(s) + "' as a number");
  return v;
}

inline std::vector<std::string_view> split(std::string_view s, char sep) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  for (;;) {
    const auto pos = s.find(sep, start);
    out.push_back(s.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

inline std::string_view trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return s;
}

// ---- datasets ---------------------------------------------------------------

/// Header x0..x{d-1},y[,z][,c][,y_rep0..y_rep{m-1}], LF line endings.
inline void write_dataset_csv(std::ostream& os, const Dataset& data) {
  data.validate();
  const Index n = data.size(), d = data.dim();
  for (Index k = 0; k < d; ++k) os << 'x' << k << ',';
  os << 'y';
  if (data.group) os << ",z";
  if (data.confounder) os << ",c";
  if (data.replicates)
    for (Index j = 0; j < data.replicates->cols(); ++j) os << ",y_rep" << j;
  os << '\n';
  for (Index i = 0; i < n; ++i) {
    for (Index k = 0; k < d; ++k) os << format_double(data.features(i, k)) << ',';
    os << format_double(data.labels(i));
    if (data.group) os << ',' << format_double((*data.group)(i));
    if (data.confounder) os << ',' << format_double((*data.confounder)(i));
    if (data.replicates)
      for (Index j = 0; j < data.replicates->cols(); ++j) os << ',' << format_double((*data.replicates)(i, j));
    os << '\n';
  }
}

inline void write_dataset_csv(const std::string& path, const Dataset& data) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw io_error("cannot open '" + path + "' for writing");
  write_dataset_csv(f, data);
  if (!f) throw io_error("write to '" + path + "' failed");
}

namespace detail {

enum class ColumnRole { feature, label, group, confounder, replicate };

struct ColumnInfo {
  ColumnRole role;
  Index index;
};

inline bool indexed_name(std::string_view name, std::string_view prefix, Index& out) {
  if (name.size() <= prefix.size() || name.substr(0, prefix.size()) != prefix) return false;
  const auto digits = name.substr(prefix.size());
  long long v = 0;
  auto [ptr, ec] = std::from_chars(digits.data(), digits.data() + digits.size(), v);
  if (ec != std::errc() || ptr != digits.data() + digits.size() || v < 0) return false;
  out = static_cast<Index>(v);
  return true;
}

}  // namespace detail

/// Parses the layout written by write_dataset_csv. Columns may appear in any
/// order; x and y_rep indices must be contiguous from 0.
inline Dataset read_dataset_csv(std::istream& is, const std::string& source = "<stream>") {
  std::string line;
  if (!std::getline(is, line)) throw io_error(source + ": empty file");
  std::vector<detail::ColumnInfo> cols;
  Index d = 0, m = 0;
  bool has_y = false, has_z = false, has_c = false;
  for (auto raw : split(line, ',')) {
    const auto name = trim(raw);
    Index k = 0;
    if (name == "y") {
      if (has_y) throw io_error(source + ": duplicate column y");
      has_y = true;
      cols.push_back({detail::ColumnRole::label, 0});
    } else if (name == "z") {
      has_z = true;
      cols.push_back({detail::ColumnRole::group, 0});
    } else if (name == "c") {
      has_c = true;
      cols.push_back({detail::ColumnRole::confounder, 0});
    } else if (detail::indexed_name(name, "y_rep", k)) {
      cols.push_back({detail::ColumnRole::replicate, k});
      m = std::max(m, k + 1);
    } else if (detail::indexed_name(name, "x", k)) {
      cols.push_back({detail::ColumnRole::feature, k});
      d = std::max(d, k + 1);
    } else {
      throw io_error(source + ": unknown column '" + std::string(name) + "'");
    }
  }
  if (!has_y) throw io_error(source + ": missing label column y");
  if (d == 0) throw io_error(source + ": no feature columns x0..");
  {
    Index nx = 0, nr = 0;
    for (const auto& c : cols) {
      nx += c.role == detail::ColumnRole::feature;
      nr += c.role == detail::ColumnRole::replicate;
    }
    if (nx != d || nr != m) throw io_error(source + ": feature or replicate columns are not contiguous from 0");
  }

  std::vector<std::vector<double>> rows;
  Index lineno = 1;
  while (std::getline(is, line)) {
    ++lineno;
    if (trim(line).empty()) continue;
    const auto fields = split(line, ',');
    if (fields.size() != cols.size())
      throw io_error(source + ":" + std::to_string(lineno) + ": expected " + std::to_string(cols.size()) +
                     " fields, got " + std::to_string(fields.size()));
    std::vector<double> row(fields.size());
    for (std::size_t k = 0; k < fields.size(); ++k)
      row[k] = parse_double(fields[k], source + ":" + std::to_string(lineno) + " field");
    rows.push_back(std::move(row));
  }
  const Index n = static_cast<Index>(rows.size());
  if (n == 0) throw io_error(source + ": no data rows");

  Dataset data;
  data.features.resize(n, d);
  data.labels.resize(n);
  if (has_z) data.group = Vector(n);
  if (has_c) data.confounder = Vector(n);
  if (m > 0) data.replicates = RowMatrix(n, m);
  for (Index i = 0; i < n; ++i) {
    const auto& row = rows[static_cast<std::size_t>(i)];
    for (std::size_t k = 0; k < cols.size(); ++k) {
      const double v = row[k];
      switch (cols[k].role) {
        case detail::ColumnRole::feature: data.features(i, cols[k].index) = v; break;
        case detail::ColumnRole::label: data.labels(i) = v; break;
        case detail::ColumnRole::group: (*data.group)(i) = v; break;
        case detail::ColumnRole::confounder: (*data.confounder)(i) = v; break;
        case detail::ColumnRole::replicate: (*data.replicates)(i, cols[k].index) = v; break;
      }
    }
  }
  try {
    data.validate();
  } catch (const std::invalid_argument& e) {
    throw io_error(source + ": " + e.what());
  }
  return data;
}

inline Dataset read_dataset_csv(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw io_error("cannot open input file '" + path + "'");
  return read_dataset_csv(f, path);
}

/// Labels in {0, 1} become {-1, +1}; labels already in {-1, +1} pass through.
inline Vector to_signed_labels(const Vector& y) {
  Vector out(y.size());
  bool zero_one = true, signed_pm = true;
  for (Index i = 0; i < y.size(); ++i) {
    zero_one = zero_one && (y(i) == 0.0 || y(i) == 1.0);
    signed_pm = signed_pm && (y(i) == -1.0 || y(i) == 1.0);
  }
  if (!zero_one && !signed_pm) throw std::invalid_argument("classification labels must be {0,1} or {-1,+1}");
  for (Index i = 0; i < y.size(); ++i) out(i) = signed_pm ? y(i) : 2.0 * y(i) - 1.0;
  return out;
}

// ---- models -----------------------------------------------------------------

inline void write_model(std::ostream& os, const ParamVector& params) {
  for (Index k = 0; k < params.dim(); ++k) os << format_double(params.theta(k)) << '\n';
  os << format_double(params.intercept) << '\n';
}

inline void write_model(const std::string& path, const ParamVector& params) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw io_error("cannot open '" + path + "' for writing");
  write_model(f, params);
  if (!f) throw io_error("write to '" + path + "' failed");
}

inline ParamVector read_model(std::istream& is, const std::string& source = "<stream>") {
  std::vector<double> vals;
  std::string line;
  while (std::getline(is, line)) {
    const auto t = trim(line);
    if (!t.empty()) vals.push_back(parse_double(t, source + " model entry"));
  }
  if (vals.size() < 2) throw io_error(source + ": model file needs at least one weight and an intercept");
  ParamVector p(static_cast<Index>(vals.size() - 1));
  for (std::size_t k = 0; k + 1 < vals.size(); ++k) p.theta(static_cast<Index>(k)) = vals[k];
  p.intercept = vals.back();
  return p;
}

inline ParamVector read_model(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw io_error("cannot open model file '" + path + "'");
  return read_model(f, path);
}

// ---- config -----------------------------------------------------------------

using ConfigMap = std::map<std::string, std::string, std::less<>>;

/// One key=value per line; '#' starts a comment. Duplicate keys are errors.
inline ConfigMap parse_config(std::istream& is, const std::string& source = "<config>") {
  ConfigMap out;
  std::string line;
  int lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    std::string_view s = line;
    if (auto hash = s.find('#'); hash != std::string_view::npos) s = s.substr(0, hash);
    s = trim(s);
    if (s.empty()) continue;
    const auto eq = s.find('=');
    if (eq == std::string_view::npos)
      throw io_error(source + ":" + std::to_string(lineno) + ": expected key=value");
    const auto key = trim(s.substr(0, eq));
    const auto value = trim(s.substr(eq + 1));
    if (key.empty()) throw io_error(source + ":" + std::to_string(lineno) + ": empty key");
    if (!out.emplace(std::string(key), std::string(value)).second)
      throw io_error(source + ":" + std::to_string(lineno) + ": duplicate key '" + std::string(key) + "'");
  }
  return out;
}

inline ConfigMap read_config(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw io_error("cannot open config file '" + path + "'");
  return parse_config(f, path);
}

/// Comma-separated numbers, e.g. "0.05,0.1,1".
inline std::vector<double> parse_double_list(std::string_view s, std::string_view what = "list") {
  std::vector<double> out;
  for (auto part : split(s, ',')) {
    const auto t = trim(part);
    if (!t.empty()) out.push_back(parse_double(t, what));
  }
  if (out.empty()) throw io_error("empty " + std::string(what));
  return out;
}

}  // namespace mdro
