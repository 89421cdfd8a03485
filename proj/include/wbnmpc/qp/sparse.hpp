#pragma once

#include <Eigen/SparseCore>

#include <iosfwd>

namespace wbnmpc::qp {

/// Compressed-column sparse matrix used throughout the solver stack.
using SpMat = Eigen::SparseMatrix<double>;

/// True when both matrices share dimensions and the exact nonzero pattern
/// (column pointers and row indices), independent of the stored values.
bool same_pattern(const SpMat& a, const SpMat& b);

/// Index into valuePtr() of entry (row, col), or -1 when the entry is not
/// part of the pattern. The matrix must be compressed.
Eigen::Index value_slot(const SpMat& m, Eigen::Index row, Eigen::Index col);

/// Writes "rows cols nnz" followed by one "row col value" line per entry,
/// with values at full double precision.
void dump_triplets(std::ostream& os, const SpMat& m);

/// Reads the format produced by dump_triplets.
SpMat load_triplets(std::istream& is);

}  // namespace wbnmpc::qp
