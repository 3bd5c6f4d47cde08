#pragma once

// Sparse third-order tensors, dense matrices and the MTTKRP kernel.

#include <Eigen/Dense>

#include <algorithm>
#include <array>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <limits>
#include <optional>
#include <span>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "tlp/errors.hpp"

namespace tlp {

using DenseMatrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using Index = std::size_t;

struct Dims {
  Index rows = 0;   // M
  Index cols = 0;   // N
  Index steps = 0;  // T

  Index size() const { return rows * cols * steps; }
  Index extent(int mode) const { return mode == 1 ? rows : mode == 2 ? cols : steps; }
  friend bool operator==(const Dims&, const Dims&) = default;
};

/// One stored coordinate, 0-based.
struct TensorEntry {
  std::uint32_t i = 0;
  std::uint32_t j = 0;
  std::uint32_t t = 0;
  double value = 0.0;

  friend bool operator==(const TensorEntry&, const TensorEntry&) = default;
};

namespace detail {
inline bool entry_order(const TensorEntry& a, const TensorEntry& b) {
  if (a.t != b.t) return a.t < b.t;
  if (a.i != b.i) return a.i < b.i;
  return a.j < b.j;
}
inline bool same_coord(const TensorEntry& a, const TensorEntry& b) {
  return a.t == b.t && a.i == b.i && a.j == b.j;
}
}  // namespace detail

/// Coordinate-form M x N x T tensor. Entries are unique and sorted by (t, i, j).
class SparseTensor3 {
 public:
  SparseTensor3() = default;

  /// Validates indices and values, coalesces duplicates by summation and sorts.
  SparseTensor3(Dims dims, std::vector<TensorEntry> entries) : dims_(dims), entries_(std::move(entries)) {
    validate_dims();
    for (const auto& e : entries_) check_entry(e);
    std::stable_sort(entries_.begin(), entries_.end(), detail::entry_order);
    coalesce();
  }

  /// Adopts entries already sorted by (t, i, j) without duplicates; throws if they are not.
  static SparseTensor3 from_sorted(Dims dims, std::vector<TensorEntry> entries) {
    SparseTensor3 z;
    z.dims_ = dims;
    z.validate_dims();
    for (std::size_t n = 0; n < entries.size(); ++n) {
      z.check_entry(entries[n]);
      if (n > 0 && !detail::entry_order(entries[n - 1], entries[n]))
        throw DimensionError("from_sorted: entries not strictly ordered by (t, i, j)");
    }
    z.entries_ = std::move(entries);
    return z;
  }

  const Dims& dims() const { return dims_; }
  Index nnz() const { return entries_.size(); }
  std::span<const TensorEntry> entries() const { return entries_; }

  /// Value at a 0-based coordinate (zero when not stored). O(log nnz).
  double at(Index i, Index j, Index t) const {
    TensorEntry key{static_cast<std::uint32_t>(i), static_cast<std::uint32_t>(j), static_cast<std::uint32_t>(t), 0.0};
    auto it = std::lower_bound(entries_.begin(), entries_.end(), key, detail::entry_order);
    if (it != entries_.end() && detail::same_coord(*it, key)) return it->value;
    return 0.0;
  }

  /// Range of entries with time index t.
  std::span<const TensorEntry> slice(Index t) const {
    auto lo = std::lower_bound(entries_.begin(), entries_.end(), t,
                               [](const TensorEntry& e, Index v) { return e.t < v; });
    auto hi = std::lower_bound(lo, entries_.end(), t + 1,
                               [](const TensorEntry& e, Index v) { return e.t < v; });
    return {lo, hi};
  }

 private:
  void validate_dims() const {
    if (dims_.rows == 0 || dims_.cols == 0 || dims_.steps == 0)
      throw DimensionError("tensor dimensions must be positive");
    constexpr Index kMax = std::numeric_limits<std::uint32_t>::max();
    if (dims_.rows > kMax || dims_.cols > kMax || dims_.steps > kMax)
      throw DimensionError("tensor dimension exceeds 32-bit index range");
  }
  void check_entry(const TensorEntry& e) const {
    if (e.i >= dims_.rows || e.j >= dims_.cols || e.t >= dims_.steps)
      throw DimensionError("tensor entry index out of range");
    if (!std::isfinite(e.value)) throw DomainError("tensor entry value is not finite");
  }
  void coalesce() {
    std::size_t out = 0;
    for (std::size_t n = 0; n < entries_.size(); ++n) {
      if (out > 0 && detail::same_coord(entries_[out - 1], entries_[n])) {
        entries_[out - 1].value += entries_[n].value;
      } else {
        entries_[out++] = entries_[n];
      }
    }
    entries_.resize(out);
  }

  Dims dims_{};
  std::vector<TensorEntry> entries_;
};

/// Ordered finite values, one per time step.
class TimeSeries {
 public:
  explicit TimeSeries(std::vector<double> values) : values_(std::move(values)) {
    if (values_.empty()) throw DomainError("time series must have at least one value");
    for (double v : values_)
      if (!std::isfinite(v)) throw DomainError("time series value is not finite");
  }
  static TimeSeries from(const Eigen::Ref<const Vector>& v) {
    return TimeSeries(std::vector<double>(v.data(), v.data() + v.size()));
  }

  std::size_t size() const { return values_.size(); }
  double operator[](std::size_t t) const { return values_[t]; }
  std::span<const double> values() const { return values_; }

 private:
  std::vector<double> values_;
};

// ---------------------------------------------------------------------------
// COO text format: lines "i j t value", 1-based. Lines starting with '#' are
// comments; "# dims M N T" declares the extents when no dims are supplied.

namespace detail {

inline std::string_view trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

inline std::vector<std::string_view> split_ws(std::string_view s) {
  std::vector<std::string_view> out;
  std::size_t p = 0;
  while (p < s.size()) {
    while (p < s.size() && (s[p] == ' ' || s[p] == '\t' || s[p] == '\r')) ++p;
    if (p >= s.size()) break;
    std::size_t q = p;
    while (q < s.size() && s[q] != ' ' && s[q] != '\t' && s[q] != '\r') ++q;
    out.push_back(s.substr(p, q - p));
    p = q;
  }
  return out;
}

inline bool parse_index(std::string_view tok, std::uint64_t& out) {
  auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), out);
  return ec == std::errc() && ptr == tok.data() + tok.size();
}

inline bool parse_double(std::string_view tok, double& out) {
  // strtod accepts "inf"/"nan"; finiteness is checked by the caller.
  std::string buf(tok);
  char* end = nullptr;
  out = std::strtod(buf.c_str(), &end);
  return end == buf.c_str() + buf.size() && !buf.empty();
}

inline std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace detail

inline SparseTensor3 parse_coo(std::istream& in, std::optional<Dims> dims = std::nullopt) {
  std::vector<TensorEntry> entries;
  std::optional<Dims> declared;
  std::uint64_t max_i = 0, max_j = 0, max_t = 0;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    auto body = detail::trim(line);
    if (body.empty()) continue;
    if (body.front() == '#') {
      auto toks = detail::split_ws(body.substr(1));
      if (toks.size() == 4 && toks[0] == "dims") {
        std::uint64_t m, n, t;
        if (!detail::parse_index(toks[1], m) || !detail::parse_index(toks[2], n) || !detail::parse_index(toks[3], t))
          throw ParseError("malformed dims comment", lineno);
        declared = Dims{m, n, t};
      }
      continue;
    }
    auto toks = detail::split_ws(body);
    if (toks.size() != 4) throw ParseError("expected 4 fields 'i j t value'", lineno);
    std::uint64_t i, j, t;
    double v;
    if (!detail::parse_index(toks[0], i) || !detail::parse_index(toks[1], j) || !detail::parse_index(toks[2], t))
      throw ParseError("malformed index", lineno);
    if (i == 0 || j == 0 || t == 0) throw ParseError("indices are 1-based", lineno);
    if (!detail::parse_double(toks[3], v)) throw ParseError("malformed value", lineno);
    if (!std::isfinite(v)) throw ParseError("non-finite value", lineno);
    const Dims* bound = dims ? &*dims : nullptr;
    if (bound && (i > bound->rows || j > bound->cols || t > bound->steps))
      throw ParseError("index out of declared range", lineno);
    if (i > std::numeric_limits<std::uint32_t>::max() || j > std::numeric_limits<std::uint32_t>::max() ||
        t > std::numeric_limits<std::uint32_t>::max())
      throw ParseError("index exceeds 32-bit range", lineno);
    max_i = std::max(max_i, i);
    max_j = std::max(max_j, j);
    max_t = std::max(max_t, t);
    entries.push_back({static_cast<std::uint32_t>(i - 1), static_cast<std::uint32_t>(j - 1),
                       static_cast<std::uint32_t>(t - 1), v});
  }
  Dims d;
  if (dims) {
    d = *dims;
  } else if (declared) {
    d = *declared;
    if (max_i > d.rows || max_j > d.cols || max_t > d.steps) throw ParseError("index exceeds '# dims' header", 0);
  } else {
    if (entries.empty()) throw ParseError("cannot infer dimensions of an empty file", 0);
    d = Dims{max_i, max_j, max_t};
  }
  return SparseTensor3(d, std::move(entries));
}

inline SparseTensor3 load_coo(const std::string& path, std::optional<Dims> dims = std::nullopt) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path);
  return parse_coo(in, dims);
}

/// Writes entries sorted by (t, i, j) with %.17g values and LF line endings.
inline void write_coo(std::ostream& out, const SparseTensor3& z) {
  const auto& d = z.dims();
  out << "# dims " << d.rows << ' ' << d.cols << ' ' << d.steps << '\n';
  for (const auto& e : z.entries())
    out << (e.i + 1) << ' ' << (e.j + 1) << ' ' << (e.t + 1) << ' ' << detail::format_double(e.value) << '\n';
}

inline void save_coo(const std::string& path, const SparseTensor3& z) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path);
  write_coo(out, z);
  if (!out) throw IoError("write failed for " + path);
}

/// Replaces every stored count c by 1 + ln(c). Not idempotent: apply once.
inline SparseTensor3 log_preprocess(const SparseTensor3& counts) {
  std::vector<TensorEntry> out(counts.entries().begin(), counts.entries().end());
  for (auto& e : out) {
    if (!(e.value > 0.0)) throw DomainError("log_preprocess requires strictly positive nonzero counts");
    e.value = 1.0 + std::log(e.value);
  }
  return SparseTensor3::from_sorted(counts.dims(), std::move(out));
}

inline double frobenius_norm(const SparseTensor3& z) {
  double s = 0.0;
  for (const auto& e : z.entries()) s += e.value * e.value;
  return std::sqrt(s);
}

inline double frobenius_norm(const DenseMatrix& x) { return x.norm(); }

// ---------------------------------------------------------------------------
// MTTKRP

/// Dense column-major tensor (i fastest, then j, then t).
class DenseTensor3 {
 public:
  DenseTensor3() = default;
  explicit DenseTensor3(Dims dims) : dims_(dims), data_(dims.size(), 0.0) {}
  explicit DenseTensor3(const SparseTensor3& z) : DenseTensor3(z.dims()) {
    for (const auto& e : z.entries()) (*this)(e.i, e.j, e.t) = e.value;
  }

  const Dims& dims() const { return dims_; }
  double& operator()(Index i, Index j, Index t) { return data_[i + dims_.rows * (j + dims_.cols * t)]; }
  double operator()(Index i, Index j, Index t) const { return data_[i + dims_.rows * (j + dims_.cols * t)]; }
  std::span<double> data() { return data_; }
  std::span<const double> data() const { return data_; }

  SparseTensor3 to_sparse(double threshold = 0.0) const {
    std::vector<TensorEntry> out;
    for (Index t = 0; t < dims_.steps; ++t)
      for (Index i = 0; i < dims_.rows; ++i)
        for (Index j = 0; j < dims_.cols; ++j) {
          double v = (*this)(i, j, t);
          if (std::abs(v) > threshold)
            out.push_back({static_cast<std::uint32_t>(i), static_cast<std::uint32_t>(j), static_cast<std::uint32_t>(t), v});
        }
    return SparseTensor3::from_sorted(dims_, std::move(out));
  }

 private:
  Dims dims_{};
  std::vector<double> data_;
};

namespace detail {
inline void check_factors(const Dims& d, const DenseMatrix& a, const DenseMatrix& b, const DenseMatrix& c, int mode) {
  if (mode < 1 || mode > 3) throw ParameterError("mttkrp mode must be 1, 2 or 3");
  if (static_cast<Index>(a.rows()) != d.rows || static_cast<Index>(b.rows()) != d.cols ||
      static_cast<Index>(c.rows()) != d.steps)
    throw DimensionError("mttkrp: factor rows do not match tensor dimensions");
  if (a.cols() != b.cols() || a.cols() != c.cols()) throw DimensionError("mttkrp: factor ranks differ");
}
}  // namespace detail

/// Matricized tensor times Khatri-Rao product for `mode` in {1,2,3}; O(nnz * K).
inline DenseMatrix mttkrp(const SparseTensor3& z, const DenseMatrix& a, const DenseMatrix& b, const DenseMatrix& c,
                          int mode) {
  detail::check_factors(z.dims(), a, b, c, mode);
  const Eigen::Index k = a.cols();
  const DenseMatrix& target = mode == 1 ? a : mode == 2 ? b : c;
  DenseMatrix out = DenseMatrix::Zero(target.rows(), k);
  for (const auto& e : z.entries()) {
    switch (mode) {
      case 1:
        out.row(e.i) += e.value * b.row(e.j).cwiseProduct(c.row(e.t));
        break;
      case 2:
        out.row(e.j) += e.value * a.row(e.i).cwiseProduct(c.row(e.t));
        break;
      default:
        out.row(e.t) += e.value * a.row(e.i).cwiseProduct(b.row(e.j));
        break;
    }
  }
  return out;
}

/// Same contraction on a dense tensor, expressed as matrix products.
inline DenseMatrix mttkrp(const DenseTensor3& z, const DenseMatrix& a, const DenseMatrix& b, const DenseMatrix& c,
                          int mode) {
  const Dims& d = z.dims();
  detail::check_factors(d, a, b, c, mode);
  const Eigen::Index m = d.rows, n = d.cols, t = d.steps, k = a.cols();
  const double* raw = z.data().data();
  if (mode == 1) {
    // X_(1) is M x (N T) with column index j + N t.
    Eigen::Map<const DenseMatrix> x1(raw, m, n * t);
    DenseMatrix kr(n * t, k);
    for (Eigen::Index tt = 0; tt < t; ++tt)
      kr.middleRows(tt * n, n) = b.array().rowwise() * c.row(tt).array();
    return x1 * kr;
  }
  if (mode == 3) {
    // Viewed as (M N) x T with row index i + M j.
    Eigen::Map<const DenseMatrix> x3t(raw, m * n, t);
    DenseMatrix kr(m * n, k);
    for (Eigen::Index j = 0; j < n; ++j) kr.middleRows(j * m, m) = a.array().rowwise() * b.row(j).array();
    return x3t.transpose() * kr;
  }
  DenseMatrix out = DenseMatrix::Zero(n, k);
  DenseMatrix scaled(m, k);
  for (Eigen::Index tt = 0; tt < t; ++tt) {
    Eigen::Map<const DenseMatrix> slice(raw + tt * m * n, m, n);
    scaled = a.array().rowwise() * c.row(tt).array();
    out.noalias() += slice.transpose() * scaled;
  }
  return out;
}

}  // namespace tlp
