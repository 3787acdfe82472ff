#pragma once

#include <cmath>
#include <complex>
#include <string>
#include <utility>

#include <Eigen/Dense>

#include "qtraj/errors.hpp"
#include "qtraj/params.hpp"

namespace qtraj {

using Complex = std::complex<double>;
using Vector = Eigen::VectorXcd;
using Matrix = Eigen::MatrixXcd;

// Two-level atom tensored with a Fock ladder truncated at fock_dim levels.
// Joint index layout is atom-major: index(s, n) = s * fock_dim + n, with
// s = 0 the ground state and s = 1 the excited state.
class SpaceDescriptor {
 public:
  explicit SpaceDescriptor(int fock_dim) : fock_dim_(fock_dim) {
    if (fock_dim < 2)
      throw InvalidParams("fock_dim must be >= 2, got " +
                          std::to_string(fock_dim));
  }

  int fock_dim() const { return fock_dim_; }
  int joint_dim() const { return 2 * fock_dim_; }
  int index(int atom, int n) const { return atom * fock_dim_ + n; }

  friend bool operator==(const SpaceDescriptor&,
                         const SpaceDescriptor&) = default;

 private:
  int fock_dim_;
};

// Pure state of the joint system.  Value type; treated as immutable after
// construction.  Unit norm is required wherever a state is handed across a
// module boundary; transient unnormalized states occur only inside the
// stepping kernels.
class JointState {
 public:
  JointState(Vector amplitudes, SpaceDescriptor space)
      : amplitudes_(std::move(amplitudes)), space_(space) {
    if (amplitudes_.size() != space_.joint_dim())
      throw DimensionMismatch(
          "state vector has " + std::to_string(amplitudes_.size()) +
          " entries, space needs " + std::to_string(space_.joint_dim()));
  }

  const Vector& amplitudes() const { return amplitudes_; }
  const SpaceDescriptor& space() const { return space_; }

  Complex amplitude(int atom, int n) const {
    return amplitudes_(space_.index(atom, n));
  }

  double norm() const { return amplitudes_.norm(); }

  JointState normalized() const {
    const double n = norm();
    if (n < 1e-300) throw ZeroNormJump("cannot normalize a zero state");
    return JointState(amplitudes_ / n, space_);
  }

 private:
  Vector amplitudes_;
  SpaceDescriptor space_;
};

enum class Subsystem { joint, atom, field };

inline const char* to_string(Subsystem s) {
  switch (s) {
    case Subsystem::joint: return "joint";
    case Subsystem::atom: return "atom";
    case Subsystem::field: return "field";
  }
  return "?";
}

// Density operator tagged with the subsystem it describes.  Construction
// enforces hermiticity and unit trace; positivity is checked on demand
// because it needs a full eigendecomposition.
class DensityMatrix {
 public:
  DensityMatrix(Matrix matrix, Subsystem label)
      : matrix_(std::move(matrix)), label_(label) {
    if (matrix_.rows() != matrix_.cols())
      throw DimensionMismatch("density matrix must be square");
    const double herm_defect = (matrix_ - matrix_.adjoint()).cwiseAbs().maxCoeff();
    if (herm_defect > 1e-10)
      throw InvalidParams("density matrix not hermitian (defect " +
                          std::to_string(herm_defect) + ")");
    const double trace_defect = std::abs(matrix_.trace() - Complex(1.0, 0.0));
    if (trace_defect > 1e-10)
      throw InvalidParams("density matrix trace deviates from 1 by " +
                          std::to_string(trace_defect));
  }

  const Matrix& matrix() const { return matrix_; }
  Subsystem label() const { return label_; }
  Eigen::Index dim() const { return matrix_.rows(); }

  // Most negative eigenvalue; >= -1e-10 for a physical state.
  double min_eigenvalue() const {
    Eigen::SelfAdjointEigenSolver<Matrix> es(matrix_,
                                             Eigen::EigenvaluesOnly);
    return es.eigenvalues().minCoeff();
  }

 private:
  Matrix matrix_;
  Subsystem label_;
};

// Truncated coherent state |alpha> on a fock_dim-level ladder, renormalized
// after truncation.  Amplitudes follow the stable upward recursion
// c_{n+1} = c_n * alpha / sqrt(n+1) seeded with c_0 = exp(-|alpha|^2 / 2).
//
// Truncation safety: |alpha|^2 must not exceed fock_dim / 4, and the weight
// beyond the ladder must stay below 1e-8, else the ladder is too short for
// this amplitude.
inline Vector coherent_state(Complex alpha, const SpaceDescriptor& space) {
  const int d = space.fock_dim();
  const double nbar = std::norm(alpha);
  if (nbar > d / 4.0)
    throw TruncationError("coherent amplitude |alpha|^2 = " +
                          std::to_string(nbar) + " needs fock_dim >= " +
                          std::to_string(4.0 * nbar));
  Vector c(d);
  c(0) = std::exp(-nbar / 2.0);
  for (int n = 1; n < d; ++n) c(n) = c(n - 1) * alpha / std::sqrt(double(n));
  const double kept = c.squaredNorm();
  if (1.0 - kept > 1e-8)
    throw TruncationError("coherent state leaks " + std::to_string(1.0 - kept) +
                          " of its weight past the Fock ladder");
  return c / std::sqrt(kept);
}

// Dense matrix acting on the joint space, carrying its space so dimension
// mismatches fail loudly instead of silently broadcasting.
struct Operator {
  Matrix matrix;
  SpaceDescriptor space;

  Operator(Matrix m, SpaceDescriptor s) : matrix(std::move(m)), space(s) {
    if (matrix.rows() != space.joint_dim() ||
        matrix.cols() != space.joint_dim())
      throw DimensionMismatch("operator is " + std::to_string(matrix.rows()) +
                              "x" + std::to_string(matrix.cols()) +
                              ", space needs " +
                              std::to_string(space.joint_dim()));
  }
};

// The operator algebra on the joint space, all as dense matrices.
struct OperatorSet {
  Operator a;            // photon annihilation
  Operator a_dag;        // photon creation
  Operator sigma_plus;   // |e><g|
  Operator sigma_minus;  // |g><e|
  Operator sigma_x;
  Operator sigma_y;
  Operator sigma_z;      // |e><e| - |g><g|
};

namespace detail {

// kron(A, B) with A acting on the atom index and B on the Fock index,
// matching the atom-major joint layout.
inline Matrix kron2(const Eigen::Matrix2cd& atom_op, const Matrix& field_op) {
  const Eigen::Index d = field_op.rows();
  Matrix out = Matrix::Zero(2 * d, 2 * d);
  for (int r = 0; r < 2; ++r)
    for (int c = 0; c < 2; ++c)
      if (atom_op(r, c) != Complex(0.0, 0.0))
        out.block(r * d, c * d, d, d) = atom_op(r, c) * field_op;
  return out;
}

inline Matrix ladder_down(int d) {
  Matrix a = Matrix::Zero(d, d);
  for (int n = 1; n < d; ++n) a(n - 1, n) = std::sqrt(double(n));
  return a;
}

}  // namespace detail

inline OperatorSet build_operators(const SpaceDescriptor& space) {
  const int d = space.fock_dim();
  const Matrix eye_f = Matrix::Identity(d, d);
  const Matrix a_f = detail::ladder_down(d);

  // Atom matrices in the (g, e) basis ordering.  sigma_y = -i(s+ - s-) keeps
  // the algebra right-handed: sigma_x sigma_y = i sigma_z with
  // sigma_z = diag(-1, +1).
  Eigen::Matrix2cd sp, sm, sx, sy, sz, eye_a;
  eye_a.setIdentity();
  sp << 0, 0, 1, 0;   // |e><g|
  sm << 0, 1, 0, 0;
  sx << 0, 1, 1, 0;
  sy << 0, Complex(0, 1), Complex(0, -1), 0;
  sz << -1, 0, 0, 1;

  return OperatorSet{
      Operator(detail::kron2(eye_a, a_f), space),
      Operator(detail::kron2(eye_a, a_f.adjoint()), space),
      Operator(detail::kron2(sp, eye_f), space),
      Operator(detail::kron2(sm, eye_f), space),
      Operator(detail::kron2(sx, eye_f), space),
      Operator(detail::kron2(sy, eye_f), space),
      Operator(detail::kron2(sz, eye_f), space),
  };
}

// Atom in the ground state, field in the coherent state 2F/(i gamma) unless
// alpha_override says otherwise.
inline JointState initial_state(const SimParams& params) {
  const SpaceDescriptor space(params.fock_dim);
  const Vector field = coherent_state(params.steady_alpha(), space);
  Vector psi = Vector::Zero(space.joint_dim());
  psi.head(space.fock_dim()) = field;  // atom index 0 is |g>
  return JointState(std::move(psi), space);
}

// Reduce a joint density matrix to one subsystem.  The joint matrix is a
// 2 x 2 grid of fock_dim x fock_dim blocks; tracing the field sums block
// diagonals, tracing the atom sums the two diagonal blocks.
inline DensityMatrix partial_trace(const DensityMatrix& rho, Subsystem keep) {
  if (rho.label() != Subsystem::joint)
    throw DimensionMismatch("partial_trace needs a joint density matrix, got " +
                            std::string(to_string(rho.label())));
  if (keep == Subsystem::joint)
    throw InvalidParams("partial_trace target must be atom or field");
  const Eigen::Index jd = rho.dim();
  if (jd % 2 != 0 || jd < 4)
    throw DimensionMismatch("joint density matrix has invalid dimension " +
                            std::to_string(jd));
  const Eigen::Index d = jd / 2;
  const Matrix& m = rho.matrix();
  if (keep == Subsystem::atom) {
    Matrix r(2, 2);
    for (int s = 0; s < 2; ++s)
      for (int t = 0; t < 2; ++t)
        r(s, t) = m.block(s * d, t * d, d, d).trace();
    return DensityMatrix(std::move(r), Subsystem::atom);
  }
  Matrix r = m.block(0, 0, d, d) + m.block(d, d, d, d);
  return DensityMatrix(std::move(r), Subsystem::field);
}

}  // namespace qtraj
