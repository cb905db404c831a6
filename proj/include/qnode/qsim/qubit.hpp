#pragma once

#include <Eigen/Core>
#include <complex>
#include <cstdint>
#include <random>
#include <span>
#include <vector>

#include "qnode/trajectory.hpp"

namespace qnode::qsim {

using Complex = std::complex<double>;
using ComplexMat2 = Eigen::Matrix2cd;

// |0> = (1,0)^T is the +1 eigenstate of sigma_z. sigma_minus = [[0,0],[1,0]]
// maps |0> to |1>, so amplitude damping relaxes <sz> toward -1.
enum class Pauli { X, Y, Z, Plus, Minus, Identity };

ComplexMat2 pauli(Pauli kind);

inline ComplexMat2 commutator(const ComplexMat2& a, const ComplexMat2& b) {
  return a * b - b * a;
}
inline ComplexMat2 anticommutator(const ComplexMat2& a, const ComplexMat2& b) {
  return a * b + b * a;
}

/// Noise operators. SigmaX is the alternative reading of the "bit-flip"
/// channel and is never used by default.
enum class ChannelKind { SigmaMinus, SigmaZ, SigmaX };

struct NoiseChannel {
  ChannelKind kind = ChannelKind::SigmaMinus;
  double gamma = 0.0;
};

ComplexMat2 channel_operator(ChannelKind kind);

struct SystemSpec {
  double omega = 0.0;  // energy splitting
  double delta = 0.0;  // detuning
  std::vector<NoiseChannel> channels;

  bool closed() const { return channels.empty(); }
  void validate() const;
};

/// H = (omega * sz + delta * sx) / 2
ComplexMat2 hamiltonian(const SystemSpec& spec);

class DensityMatrix {
 public:
  DensityMatrix() : mat_(ComplexMat2::Identity() / 2.0) {}
  explicit DensityMatrix(const ComplexMat2& mat) : mat_(mat) {}

  static DensityMatrix maximally_mixed() { return DensityMatrix(); }
  static DensityMatrix from_bloch(const BlochPoint& p);
  /// |psi><psi| for a (not necessarily normalized) state vector.
  static DensityMatrix pure(const Eigen::Vector2cd& psi);

  const ComplexMat2& mat() const { return mat_; }

  Complex trace() const { return mat_.trace(); }
  double purity() const { return (mat_ * mat_).trace().real(); }
  double hermiticity_residual() const { return (mat_ - mat_.adjoint()).cwiseAbs().maxCoeff(); }
  /// Smaller eigenvalue of the Hermitian part.
  double min_eigenvalue() const;
  bool is_physical(double tol = 1e-9) const;

 private:
  ComplexMat2 mat_;
};

BlochPoint bloch(const DensityMatrix& rho);

/// -i[H, rho]
ComplexMat2 von_neumann_rhs(const DensityMatrix& rho, const ComplexMat2& h);

/// -i[H, rho] + sum_v gamma_v (A rho A^dag - {A^dag A, rho} / 2)
ComplexMat2 lindblad_rhs(const DensityMatrix& rho, const SystemSpec& spec);

/// Classical RK4 step of the master equation, no renormalization. Throws
/// PositivityViolation when the result has an eigenvalue below -1e-9.
DensityMatrix rk4_step(const DensityMatrix& rho, double dt, const SystemSpec& spec);

constexpr int kDefaultSubsteps = 4;

/// Density matrices at every grid time; times must start at 0 and increase.
std::vector<DensityMatrix> evolve_states(const SystemSpec& spec, const DensityMatrix& rho0,
                                         std::span<const double> times,
                                         int substeps = kDefaultSubsteps);

Trajectory evolve(const SystemSpec& spec, const DensityMatrix& rho0,
                  std::span<const double> times, int substeps = kDefaultSubsteps);

/// Haar-distributed 2x2 unitary via Gram-Schmidt on a complex Ginibre matrix
/// (positive diagonal R, so no extra phase fix is needed).
ComplexMat2 haar_unitary(std::mt19937_64& rng);

/// var(x) + var(z) with var(s) = 1 - <s>^2.
inline double hup_sum(const BlochPoint& p) { return 2.0 - p.x * p.x - p.z * p.z; }

}  // namespace qnode::qsim
