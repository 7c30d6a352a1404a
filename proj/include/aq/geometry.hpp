#pragma once

#include <Eigen/Dense>

#include <stdexcept>
#include <vector>

namespace aq {

using Eigen::MatrixXd;
using Eigen::VectorXd;

/// Axis-aligned box { x : lower[i] <= x[i] <= lower[i] + widths[i] }.
struct Box {
  VectorXd lower;
  VectorXd widths;

  Box() = default;
  Box(VectorXd lo, VectorXd w) : lower(std::move(lo)), widths(std::move(w)) {
    if (lower.size() != widths.size())
      throw std::invalid_argument("Box: lower/widths dimension mismatch");
    if ((widths.array() <= 0.0).any())
      throw std::invalid_argument("Box: widths must be strictly positive");
  }

  int dim() const { return static_cast<int>(lower.size()); }
  double volume() const { return widths.prod(); }
  VectorXd centroid() const { return lower + 0.5 * widths; }

  /// Map reference coordinates in [0,1]^d to physical coordinates.
  VectorXd map(const VectorXd& ref) const {
    return lower + widths.cwiseProduct(ref);
  }

  bool contains(const VectorXd& x, double pad = 0.0) const {
    return (x.array() >= lower.array() - pad).all() &&
           (x.array() <= (lower + widths).array() + pad).all();
  }
};

/// Unit cube [0,1]^d.
inline Box unit_box(int dim) {
  return Box(VectorXd::Zero(dim), VectorXd::Ones(dim));
}

/// A 1D interval as a Box.
inline Box interval(double a, double b) {
  VectorXd lo(1), w(1);
  lo << a;
  w << b - a;
  return Box(lo, w);
}

/// Halve `cell` along `axis`; children tile the parent exactly
/// (split point = lower + widths/2, so volumes sum bit-exactly).
inline std::pair<Box, Box> bisect(const Box& cell, int axis) {
  if (axis < 0 || axis >= cell.dim())
    throw std::invalid_argument("bisect: axis out of range");
  VectorXd half = cell.widths;
  half[axis] *= 0.5;
  Box left(cell.lower, half);
  VectorXd lo = cell.lower;
  lo[axis] += half[axis];
  Box right(lo, half);
  return {left, right};
}

/// One face of a d-dimensional box: a (d-1)-dimensional box plus the
/// embedding into physical space. For d = 1 the face is a single point.
struct Face {
  int axis = 0;    // the axis the face is orthogonal to
  int side = 0;    // 0 = lower face, 1 = upper face
  double coord = 0.0;   // fixed physical coordinate along `axis`
  Box tangent;     // (d-1)-dimensional box spanning the face (empty for d=1)
  int parent_dim = 1;

  int dim() const { return parent_dim - 1; }

  /// Embed (d-1)-dim face points (one column each) into d-dim space.
  MatrixXd embed(const MatrixXd& pts) const {
    MatrixXd out(parent_dim, pts.cols() > 0 ? pts.cols() : 1);
    if (parent_dim == 1) {
      out.resize(1, 1);
      out(0, 0) = coord;
      return out;
    }
    out.resize(parent_dim, pts.cols());
    int k = 0;
    for (int i = 0; i < parent_dim; ++i) {
      if (i == axis) {
        out.row(i).setConstant(coord);
      } else {
        out.row(i) = pts.row(k++);
      }
    }
    return out;
  }
};

/// All 2d faces of a box, ordered (axis 0 low, axis 0 high, axis 1 low, ...).
inline std::vector<Face> faces_of(const Box& box) {
  const int d = box.dim();
  std::vector<Face> out;
  out.reserve(2 * d);
  for (int a = 0; a < d; ++a) {
    for (int s = 0; s < 2; ++s) {
      Face f;
      f.axis = a;
      f.side = s;
      f.coord = s == 0 ? box.lower[a] : box.lower[a] + box.widths[a];
      f.parent_dim = d;
      if (d > 1) {
        VectorXd lo(d - 1), w(d - 1);
        int k = 0;
        for (int i = 0; i < d; ++i) {
          if (i == a) continue;
          lo[k] = box.lower[i];
          w[k] = box.widths[i];
          ++k;
        }
        f.tangent = Box(lo, w);
      }
      out.push_back(std::move(f));
    }
  }
  return out;
}

}  // namespace aq
