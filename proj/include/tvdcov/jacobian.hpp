#pragma once

#include <Eigen/Core>
#include <Eigen/Eigenvalues>
#include <Eigen/LU>

#include <algorithm>
#include <cmath>
#include <optional>
#include <vector>

#include "tvdcov/density.hpp"
#include "tvdcov/error.hpp"
#include "tvdcov/geometry.hpp"
#include "tvdcov/moments.hpp"
#include "tvdcov/quadrature.hpp"

namespace tvdcov {

using Block = Eigen::Matrix2d;

/// Sparse block matrix dc/dp. Row i holds blocks dc_i/dp_j for j = i and for
/// every j whose cell shares a face with cell i; all other blocks are zero.
/// Vectors are laid out (x_0, y_0, x_1, y_1, ...).
class CentroidJacobian {
 public:
  struct Entry {
    int col;
    Block block;
  };

  CentroidJacobian() = default;
  explicit CentroidJacobian(std::size_t n) : rows_(n) {}

  std::size_t size() const { return rows_.size(); }
  const std::vector<Entry>& row(std::size_t i) const { return rows_[i]; }

  std::optional<Block> block(int i, int j) const {
    for (const auto& e : rows_[static_cast<std::size_t>(i)])
      if (e.col == j) return e.block;
    return std::nullopt;
  }

  // Adds `b` to block (i, j), creating it if absent.
  void accumulate(int i, int j, const Block& b) {
    auto& r = rows_[static_cast<std::size_t>(i)];
    for (auto& e : r)
      if (e.col == j) {
        e.block += b;
        return;
      }
    r.push_back({j, b});
  }

  void sort_rows() {
    for (auto& r : rows_)
      std::sort(r.begin(), r.end(), [](const Entry& a, const Entry& b) { return a.col < b.col; });
  }

  Eigen::VectorXd multiply(const Eigen::VectorXd& v) const {
    Eigen::VectorXd out = Eigen::VectorXd::Zero(v.size());
    for (std::size_t i = 0; i < rows_.size(); ++i) {
      Eigen::Vector2d acc = Eigen::Vector2d::Zero();
      for (const auto& e : rows_[i]) acc.noalias() += e.block * v.segment<2>(2 * e.col);
      out.segment<2>(2 * static_cast<Eigen::Index>(i)) = acc;
    }
    return out;
  }

  Eigen::MatrixXd dense() const {
    const auto dim = static_cast<Eigen::Index>(2 * rows_.size());
    Eigen::MatrixXd m = Eigen::MatrixXd::Zero(dim, dim);
    for (std::size_t i = 0; i < rows_.size(); ++i)
      for (const auto& e : rows_[i]) m.block<2, 2>(2 * static_cast<Eigen::Index>(i), 2 * e.col) = e.block;
    return m;
  }

  bool all_finite() const {
    for (const auto& r : rows_)
      for (const auto& e : r)
        if (!e.block.allFinite()) return false;
    return true;
  }

  const std::optional<double>& cached_spectral_radius() const { return spectral_radius_; }
  void set_spectral_radius(double r) { spectral_radius_ = r; }

 private:
  std::vector<std::vector<Entry>> rows_;
  std::optional<double> spectral_radius_;
};

namespace detail {

// Face contributions for cell `self` across the face shared with `other`:
//   off  = (1 / (d m)) * integral of phi (q - c)(p_other - q)^T
//   diag = (1 / (d m)) * integral of phi (q - c)(q - p_self)^T
// with d = |p_other - p_self|. These are the Leibniz-rule boundary terms; the
// fixed outer boundary of the domain contributes nothing.
inline void face_blocks(const Point& p_self, const Point& p_other, const Point& c, double m,
                        std::span<const WeightedPoint> nodes, std::span<const double> phi, Block& off,
                        Block& diag) {
  off.setZero();
  diag.setZero();
  for (std::size_t k = 0; k < nodes.size(); ++k) {
    const Point& q = nodes[k].q;
    const Point u = (nodes[k].w * phi[k]) * (q - c);
    off.noalias() += u * (p_other - q).transpose();
    diag.noalias() += u * (q - p_self).transpose();
  }
  const double scale = 1.0 / ((p_other - p_self).norm() * m);
  off *= scale;
  diag *= scale;
}

}  // namespace detail

/// Block dc_i/dp_j from boundary integrals. Throws NotAdjacent when i != j and
/// the cells share no face (the block is then zero).
inline Block dc_dp_block(const Tessellation& tess, const DensitySnapshot& phi, int i, int j,
                         const MomentSet& ms, const Quadrature& quad) {
  const int n = static_cast<int>(tess.size());
  if (i < 0 || j < 0 || i >= n || j >= n) throw Error(ErrorCode::IndexOutOfRange, "dc_dp_block index");
  std::vector<WeightedPoint> nodes;
  std::vector<double> values;
  auto face = [&](int other, Block& off, Block& diag) {
    const Segment s = *tess.boundary_segment(i, other);
    quad.segment_nodes(s, nodes);
    values.resize(nodes.size());
    for (std::size_t k = 0; k < nodes.size(); ++k) values[k] = phi.value(nodes[k].q);
    const auto ii = static_cast<std::size_t>(i);
    detail::face_blocks(tess.positions[ii], tess.positions[static_cast<std::size_t>(other)],
                        ms.centroid[ii], ms.mass[ii], nodes, values, off, diag);
  };
  Block off, diag;
  if (i != j) {
    if (!tess.adjacent(i, j))
      throw Error(ErrorCode::NotAdjacent, "cells " + std::to_string(i) + " and " + std::to_string(j) +
                                              " share no face");
    face(j, off, diag);
    return off;
  }
  Block sum = Block::Zero();
  for (int other : tess.adjacency[static_cast<std::size_t>(i)]) {
    face(other, off, diag);
    sum += diag;
  }
  return sum;
}

/// Assembles every diagonal block and every face-neighbor block.
inline CentroidJacobian assemble(const Tessellation& tess, const DensitySnapshot& phi, const MomentSet& ms,
                                 const Quadrature& quad) {
  const std::size_t n = tess.size();
  CentroidJacobian jac(n);
  for (std::size_t i = 0; i < n; ++i) jac.accumulate(static_cast<int>(i), static_cast<int>(i), Block::Zero());

  std::vector<WeightedPoint> nodes;
  std::vector<double> values;
  for (const auto& [key, seg] : tess.faces) {
    const auto [i, j] = key;
    const auto ii = static_cast<std::size_t>(i);
    const auto jj = static_cast<std::size_t>(j);
    quad.segment_nodes(seg, nodes);
    values.resize(nodes.size());
    for (std::size_t k = 0; k < nodes.size(); ++k) values[k] = phi.value(nodes[k].q);
    Block off, diag;
    detail::face_blocks(tess.positions[ii], tess.positions[jj], ms.centroid[ii], ms.mass[ii], nodes, values,
                        off, diag);
    jac.accumulate(i, j, off);
    jac.accumulate(i, i, diag);
    detail::face_blocks(tess.positions[jj], tess.positions[ii], ms.centroid[jj], ms.mass[jj], nodes, values,
                        off, diag);
    jac.accumulate(j, i, off);
    jac.accumulate(j, j, diag);
  }
  jac.sort_rows();
  return jac;
}

inline CentroidJacobian assemble(const Tessellation& tess, const DensityField& field, double t,
                                 const MomentSet& ms, const Quadrature& quad) {
  return assemble(tess, field.at(t), ms, quad);
}

inline constexpr std::size_t kDenseEigenLimit = 100;

/// |lambda_max| of dc/dp. Dense general eigensolve up to kDenseEigenLimit
/// robots, power iteration beyond.
inline double spectral_radius(const CentroidJacobian& jac) {
  if (jac.size() == 0) return 0.0;
  if (jac.size() <= kDenseEigenLimit) {
    Eigen::EigenSolver<Eigen::MatrixXd> es(jac.dense(), /*computeEigenvectors=*/false);
    if (es.info() != Eigen::Success) throw Error(ErrorCode::EigensolveFailure, "eigensolve did not converge");
    return es.eigenvalues().cwiseAbs().maxCoeff();
  }
  // Norm growth of repeated products; averaged over a window so that complex
  // dominant pairs (rotating iterates) still give the modulus.
  const auto dim = static_cast<Eigen::Index>(2 * jac.size());
  Eigen::VectorXd v = Eigen::VectorXd::Ones(dim).normalized();
  constexpr int kBurnIn = 200;
  constexpr int kWindow = 200;
  double log_growth = 0.0;
  for (int it = 0; it < kBurnIn + kWindow; ++it) {
    Eigen::VectorXd w = jac.multiply(v);
    const double nrm = w.norm();
    if (nrm == 0.0) return 0.0;
    if (!std::isfinite(nrm)) throw Error(ErrorCode::EigensolveFailure, "power iteration diverged");
    if (it >= kBurnIn) log_growth += std::log(nrm);
    v = w / nrm;
  }
  return std::exp(log_growth / kWindow);
}

inline double cache_spectral_radius(CentroidJacobian& jac) {
  if (!jac.cached_spectral_radius()) jac.set_spectral_radius(spectral_radius(jac));
  return *jac.cached_spectral_radius();
}

/// sum_{l=0}^{hops} J^l v by repeated sparse products.
inline Eigen::VectorXd neumann_apply(const CentroidJacobian& jac, int hops, const Eigen::VectorXd& v) {
  Eigen::VectorXd acc = v;
  Eigen::VectorXd term = v;
  for (int l = 1; l <= hops; ++l) {
    term = jac.multiply(term);
    acc += term;
  }
  return acc;
}

struct LinearSolve {
  Eigen::VectorXd x;
  double condition = 1.0;  // estimate of cond_1(I - J)
};

inline constexpr double kMinPivot = 1e-12;
inline constexpr double kMaxCondition = 1e12;

/// Solves (I - J) x = v with partial-pivot LU.
inline LinearSolve solve_exact(const CentroidJacobian& jac, const Eigen::VectorXd& v) {
  const auto dim = static_cast<Eigen::Index>(2 * jac.size());
  const Eigen::MatrixXd a = Eigen::MatrixXd::Identity(dim, dim) - jac.dense();
  const Eigen::PartialPivLU<Eigen::MatrixXd> lu(a);
  const double min_pivot = dim == 0 ? 1.0 : lu.matrixLU().diagonal().cwiseAbs().minCoeff();
  const double rcond = dim == 0 ? 1.0 : lu.rcond();
  const double condition = rcond > 0.0 ? 1.0 / rcond : std::numeric_limits<double>::infinity();
  if (!(min_pivot >= kMinPivot) || !(condition <= kMaxCondition))
    throw Error(ErrorCode::SingularSystem,
                "I - dc/dp is numerically singular (condition estimate " + std::to_string(condition) + ")");
  return {lu.solve(v), condition};
}

}  // namespace tvdcov
