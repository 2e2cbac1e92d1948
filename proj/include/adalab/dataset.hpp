#pragma once

#include <cstddef>
#include <optional>
#include <stdexcept>
#include <string>

#include <Eigen/Core>
#include <Eigen/SparseCore>

namespace adalab {

using SparseRows = Eigen::SparseMatrix<double, Eigen::RowMajor, int>;

/// Sparse design matrix (0-based columns) with labels in {-1, +1}.
struct Dataset {
  SparseRows rows;
  Eigen::VectorXd labels;

  Eigen::Index n() const { return rows.rows(); }
  Eigen::Index d() const { return rows.cols(); }
  bool empty() const { return rows.rows() == 0; }

  /// First `count` rows, in file order.
  Dataset head(Eigen::Index count) const;
};

class ParseError : public std::runtime_error {
 public:
  ParseError(std::size_t line, const std::string& what)
      : std::runtime_error("line " + std::to_string(line) + ": " + what), line_(line) {}
  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

/// Reads `<label> <idx>:<val> ...` lines with 1-based, strictly ascending indices.
/// Positive labels map to +1, everything else to -1. The dimension is the largest
/// index seen unless `dim` is given (indices beyond it are a parse error).
Dataset load_libsvm(const std::string& path, std::optional<Eigen::Index> dim = std::nullopt);

}  // namespace adalab
