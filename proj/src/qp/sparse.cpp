#include "wbnmpc/qp/sparse.hpp"

#include <algorithm>
#include <cstdio>
#include <istream>
#include <ostream>
#include <stdexcept>
#include <string>
#include <vector>

namespace wbnmpc::qp {

bool same_pattern(const SpMat& a, const SpMat& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols() || a.nonZeros() != b.nonZeros()) return false;
  if (!a.isCompressed() || !b.isCompressed())
    throw std::invalid_argument("same_pattern: matrices must be compressed");
  if (!std::equal(a.outerIndexPtr(), a.outerIndexPtr() + a.outerSize() + 1, b.outerIndexPtr()))
    return false;
  return std::equal(a.innerIndexPtr(), a.innerIndexPtr() + a.nonZeros(), b.innerIndexPtr());
}

Eigen::Index value_slot(const SpMat& m, Eigen::Index row, Eigen::Index col) {
  if (!m.isCompressed()) throw std::invalid_argument("value_slot: matrix must be compressed");
  const auto* outer = m.outerIndexPtr();
  const auto* inner = m.innerIndexPtr();
  const auto* begin = inner + outer[col];
  const auto* end = inner + outer[col + 1];
  const auto* it = std::lower_bound(begin, end, static_cast<SpMat::StorageIndex>(row));
  if (it == end || *it != row) return -1;
  return it - inner;
}

void dump_triplets(std::ostream& os, const SpMat& m) {
  os << m.rows() << ' ' << m.cols() << ' ' << m.nonZeros() << '\n';
  char buf[40];
  for (int k = 0; k < m.outerSize(); ++k) {
    for (SpMat::InnerIterator it(m, k); it; ++it) {
      std::snprintf(buf, sizeof(buf), "%.17g", it.value());
      os << it.row() << ' ' << it.col() << ' ' << buf << '\n';
    }
  }
}

SpMat load_triplets(std::istream& is) {
  Eigen::Index rows = 0, cols = 0, nnz = 0;
  if (!(is >> rows >> cols >> nnz)) throw std::runtime_error("load_triplets: bad header");
  std::vector<Eigen::Triplet<double>> trips;
  trips.reserve(static_cast<size_t>(nnz));
  std::string tok;
  for (Eigen::Index k = 0; k < nnz; ++k) {
    Eigen::Index i = 0, j = 0;
    // value read via strtod so that "inf"/"-inf" round-trip
    if (!(is >> i >> j >> tok)) throw std::runtime_error("load_triplets: truncated entry list");
    const double v = std::stod(tok);
    if (i < 0 || i >= rows || j < 0 || j >= cols)
      throw std::runtime_error("load_triplets: index out of range");
    trips.emplace_back(i, j, v);
  }
  SpMat m(rows, cols);
  m.setFromTriplets(trips.begin(), trips.end());
  m.makeCompressed();
  return m;
}

}  // namespace wbnmpc::qp
