/*
Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
==============================================================================
*/
#ifndef ATE_DATA_HPP
#define ATE_DATA_HPP

#include <charconv>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <map>
#include <optional>
#include <span>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "ate/common.hpp"

namespace ate {

/// Observed sample of (covariates, treatment, outcome) triples. Row order
/// defines the unit index. Immutable once constructed.
class Dataset {
 public:
  Dataset() = default;

  /// `x` is row-major n x m.
  Dataset(std::size_t m, std::vector<double> x, std::vector<std::uint8_t> d, std::vector<double> y)
      : m_(m), x_(std::move(x)), d_(std::move(d)), y_(std::move(y)) {
    validate();
  }

  std::size_t n() const { return d_.size(); }
  std::size_t m() const { return m_; }
  std::span<const double> row(std::size_t i) const { return {x_.data() + i * m_, m_}; }
  double x(std::size_t i, std::size_t k) const { return x_[i * m_ + k]; }
  const std::vector<double>& x() const { return x_; }
  const std::vector<std::uint8_t>& d() const { return d_; }
  const std::vector<double>& y() const { return y_; }
  bool treated(std::size_t i) const { return d_[i] == 1; }

  std::size_t n1() const {
    std::size_t c = 0;
    for (auto v : d_) c += v;
    return c;
  }
  std::size_t n0() const { return n() - n1(); }

  /// Same units and treatments with replaced covariates (used for transformed
  /// coordinate spaces).
  Dataset with_covariates(std::size_t m, std::vector<double> x) const {
    return Dataset(m, std::move(x), d_, y_);
  }
  Dataset with_outcomes(std::vector<double> y) const { return Dataset(m_, x_, d_, std::move(y)); }
  Dataset with_treatments(std::vector<std::uint8_t> d) const {
    return Dataset(m_, x_, std::move(d), y_);
  }

 private:
  void validate() const {
    if (d_.empty()) throw Error("dataset must contain at least one unit");
    if (m_ == 0) throw Error("covariate dimension must be at least 1");
    if (x_.size() != d_.size() * m_) throw Error("covariate matrix size does not match n x m");
    if (y_.size() != d_.size()) throw Error("outcome vector length does not match n");
    for (std::size_t i = 0; i < d_.size(); ++i) {
      if (d_[i] > 1) throw Error("non-binary treatment at row " + std::to_string(i + 1));
      if (!std::isfinite(y_[i])) throw Error("non-finite outcome at row " + std::to_string(i + 1));
      for (std::size_t k = 0; k < m_; ++k) {
        if (!std::isfinite(x_[i * m_ + k])) {
          throw Error("non-finite value at row " + std::to_string(i + 1) + ", column x" +
                      std::to_string(k + 1));
        }
      }
    }
  }

  std::size_t m_ = 0;
  std::vector<double> x_;
  std::vector<std::uint8_t> d_;
  std::vector<double> y_;
};

struct TreatmentSplit {
  std::vector<std::size_t> treated_idx;
  std::vector<std::size_t> control_idx;
};

inline TreatmentSplit split(const Dataset& ds) {
  TreatmentSplit s;
  for (std::size_t i = 0; i < ds.n(); ++i) {
    (ds.treated(i) ? s.treated_idx : s.control_idx).push_back(i);
  }
  return s;
}

namespace detail {

inline std::vector<std::string_view> split_fields(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const std::size_t comma = line.find(',', start);
    if (comma == std::string_view::npos) {
      out.push_back(line.substr(start));
      break;
    }
    out.push_back(line.substr(start, comma - start));
    start = comma + 1;
  }
  for (auto& f : out) {
    while (!f.empty() && (f.front() == ' ' || f.front() == '\t')) f.remove_prefix(1);
    while (!f.empty() && (f.back() == ' ' || f.back() == '\t' || f.back() == '\r')) f.remove_suffix(1);
  }
  return out;
}

inline std::optional<double> parse_double(std::string_view s) {
  if (!s.empty() && s.front() == '+') s.remove_prefix(1);
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size() || s.empty()) return std::nullopt;
  return v;
}

}  // namespace detail

/// Parses CSV text with header `x1,...,xm,d,y` (any column order).
inline Dataset parse_csv(std::istream& in) {
  std::string line;
  std::optional<std::vector<std::string_view>> header;
  std::string header_line;
  while (std::getline(in, line)) {
    if (line.find_first_not_of(" \t\r") != std::string::npos) {
      header_line = line;
      break;
    }
  }
  if (header_line.empty()) throw Error("empty file: no header row");
  if (header_line.size() >= 3 && header_line.compare(0, 3, "\xEF\xBB\xBF") == 0) {
    header_line.erase(0, 3);
  }
  const auto names = detail::split_fields(header_line);

  std::optional<std::size_t> d_col, y_col;
  std::map<std::size_t, std::size_t> x_cols;  // covariate number (1-based) -> column
  for (std::size_t c = 0; c < names.size(); ++c) {
    const auto name = names[c];
    auto claim = [&](std::optional<std::size_t>& slot) {
      if (slot) throw Error("duplicate column '" + std::string(name) + "' in header (row 0)");
      slot = c;
    };
    if (name == "d") {
      claim(d_col);
    } else if (name == "y") {
      claim(y_col);
    } else if (name.size() > 1 && name[0] == 'x') {
      std::size_t k = 0;
      const auto [ptr, ec] = std::from_chars(name.data() + 1, name.data() + name.size(), k);
      if (ec != std::errc() || ptr != name.data() + name.size() || k == 0) {
        throw Error("unexpected column '" + std::string(name) + "' in header (row 0)");
      }
      if (!x_cols.emplace(k, c).second) {
        throw Error("duplicate column '" + std::string(name) + "' in header (row 0)");
      }
    } else {
      throw Error("unexpected column '" + std::string(name) + "' in header (row 0)");
    }
  }
  if (!d_col) throw Error("missing column 'd' (row 0, header)");
  if (!y_col) throw Error("missing column 'y' (row 0, header)");
  if (x_cols.empty()) throw Error("missing column 'x1' (row 0, header)");
  const std::size_t m = x_cols.size();
  for (std::size_t k = 1; k <= m; ++k) {
    if (!x_cols.count(k)) throw Error("missing column 'x" + std::to_string(k) + "' (row 0, header)");
  }

  std::vector<double> x, y;
  std::vector<std::uint8_t> d;
  std::size_t row = 0;
  while (std::getline(in, line)) {
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    ++row;
    const auto fields = detail::split_fields(line);
    if (fields.size() != names.size()) {
      throw Error("row " + std::to_string(row) + " has " + std::to_string(fields.size()) +
                  " fields, expected " + std::to_string(names.size()));
    }
    auto number = [&](std::size_t c) {
      const auto v = detail::parse_double(fields[c]);
      if (!v) {
        throw Error("invalid number '" + std::string(fields[c]) + "' at row " +
                    std::to_string(row) + ", column '" + std::string(names[c]) + "'");
      }
      if (!std::isfinite(*v)) {
        throw Error("non-finite value at row " + std::to_string(row) + ", column '" +
                    std::string(names[c]) + "'");
      }
      return *v;
    };
    for (std::size_t k = 1; k <= m; ++k) x.push_back(number(x_cols[k]));
    const double dv = number(*d_col);
    if (dv != 0.0 && dv != 1.0) {
      throw Error("non-binary treatment at row " + std::to_string(row) + ", column 'd'");
    }
    d.push_back(static_cast<std::uint8_t>(dv));
    y.push_back(number(*y_col));
  }
  if (row == 0) throw Error("empty file: no data rows after header (row 1)");
  return Dataset(m, std::move(x), std::move(d), std::move(y));
}

inline Dataset load_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open input file '" + path + "'");
  return parse_csv(in);
}

inline std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

inline void write_csv(std::ostream& out, const Dataset& ds) {
  for (std::size_t k = 0; k < ds.m(); ++k) out << 'x' << (k + 1) << ',';
  out << "d,y\n";
  for (std::size_t i = 0; i < ds.n(); ++i) {
    for (std::size_t k = 0; k < ds.m(); ++k) out << format_double(ds.x(i, k)) << ',';
    out << static_cast<int>(ds.d()[i]) << ',' << format_double(ds.y()[i]) << '\n';
  }
}

inline void write_csv(const std::string& path, const Dataset& ds) {
  std::ofstream out(path);
  if (!out) throw Error("cannot open output file '" + path + "'");
  write_csv(out, ds);
}

}  // namespace ate

#endif  // ATE_DATA_HPP
