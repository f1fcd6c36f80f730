#pragma once
/*
 * Shared primitives for the cld library: the error type every module throws,
 * a small row-major matrix, and number formatting used by every file format.
 */

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <cstdio>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace cld {

enum class ErrorKind {
  MissingFile,
  MalformedRow,
  NonFiniteLoss,
  NegativeLoss,
  DuplicateSampleId,
  GridMismatch,
  EmptyGrid,
  UnknownIndex,
  LengthMismatch,
  TooShort,
  MissingClassValidation,
  IdMismatch,
  BudgetTooLarge,
  QuotaExceedsClass,
  SizeTooLarge,
  DivergedLoss,
  MissingSnapshots,
  AllStepsZero,
  MissingParam,
  UnknownId,
  ConstantVector,
  InvalidArgument,
  Io,
};

inline std::string_view to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::MissingFile: return "MissingFile";
    case ErrorKind::MalformedRow: return "MalformedRow";
    case ErrorKind::NonFiniteLoss: return "NonFiniteLoss";
    case ErrorKind::NegativeLoss: return "NegativeLoss";
    case ErrorKind::DuplicateSampleId: return "DuplicateSampleId";
    case ErrorKind::GridMismatch: return "GridMismatch";
    case ErrorKind::EmptyGrid: return "EmptyGrid";
    case ErrorKind::UnknownIndex: return "UnknownIndex";
    case ErrorKind::LengthMismatch: return "LengthMismatch";
    case ErrorKind::TooShort: return "TooShort";
    case ErrorKind::MissingClassValidation: return "MissingClassValidation";
    case ErrorKind::IdMismatch: return "IdMismatch";
    case ErrorKind::BudgetTooLarge: return "BudgetTooLarge";
    case ErrorKind::QuotaExceedsClass: return "QuotaExceedsClass";
    case ErrorKind::SizeTooLarge: return "SizeTooLarge";
    case ErrorKind::DivergedLoss: return "DivergedLoss";
    case ErrorKind::MissingSnapshots: return "MissingSnapshots";
    case ErrorKind::AllStepsZero: return "AllStepsZero";
    case ErrorKind::MissingParam: return "MissingParam";
    case ErrorKind::UnknownId: return "UnknownId";
    case ErrorKind::ConstantVector: return "ConstantVector";
    case ErrorKind::InvalidArgument: return "InvalidArgument";
    case ErrorKind::Io: return "Io";
  }
  return "Unknown";
}

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(std::string(to_string(kind)) + ": " + what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

/// Dense row-major matrix of doubles.
class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  bool empty() const noexcept { return data_.empty(); }

  double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

  std::span<double> row(std::size_t r) { return {data_.data() + r * cols_, cols_}; }
  std::span<const double> row(std::size_t r) const { return {data_.data() + r * cols_, cols_}; }

  std::span<double> data() noexcept { return data_; }
  std::span<const double> data() const noexcept { return data_; }

  void append_row(std::span<const double> values) {
    if (rows_ == 0 && cols_ == 0) cols_ = values.size();
    if (values.size() != cols_) {
      throw Error(ErrorKind::LengthMismatch, "row of length " + std::to_string(values.size()) +
                                                 " appended to matrix with " +
                                                 std::to_string(cols_) + " columns");
    }
    data_.insert(data_.end(), values.begin(), values.end());
    ++rows_;
  }

  friend bool operator==(const Matrix&, const Matrix&) = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

/// Shortest round-trippable text form used by every CSV we write (17 significant digits).
inline std::string format_real(double value) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", value);
  return buf;
}

inline double dot(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

inline double norm(std::span<const double> a) { return std::sqrt(dot(a, a)); }

}  // namespace cld
