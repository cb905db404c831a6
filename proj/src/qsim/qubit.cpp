#include "qnode/qsim/qubit.hpp"

#include <cmath>
#include <sstream>

#include "qnode/error.hpp"

namespace qnode::qsim {

namespace {
constexpr Complex kI{0.0, 1.0};
constexpr double kPositivityTol = 1e-9;
}  // namespace

ComplexMat2 pauli(Pauli kind) {
  ComplexMat2 m = ComplexMat2::Zero();
  switch (kind) {
    case Pauli::X:
      m(0, 1) = 1.0;
      m(1, 0) = 1.0;
      break;
    case Pauli::Y:
      m(0, 1) = -kI;
      m(1, 0) = kI;
      break;
    case Pauli::Z:
      m(0, 0) = 1.0;
      m(1, 1) = -1.0;
      break;
    case Pauli::Plus:
      m(0, 1) = 1.0;
      break;
    case Pauli::Minus:
      m(1, 0) = 1.0;
      break;
    case Pauli::Identity:
      m = ComplexMat2::Identity();
      break;
  }
  return m;
}

ComplexMat2 channel_operator(ChannelKind kind) {
  switch (kind) {
    case ChannelKind::SigmaMinus: return pauli(Pauli::Minus);
    case ChannelKind::SigmaZ: return pauli(Pauli::Z);
    case ChannelKind::SigmaX: return pauli(Pauli::X);
  }
  return ComplexMat2::Zero();
}

void SystemSpec::validate() const {
  if (!std::isfinite(omega) || !std::isfinite(delta)) {
    fail(ErrorKind::InvalidArgument, "system spec: omega and delta must be finite");
  }
  for (const auto& ch : channels) {
    if (!(ch.gamma >= 0.0) || !std::isfinite(ch.gamma)) {
      fail(ErrorKind::InvalidArgument, "system spec: channel rates must be finite and >= 0");
    }
  }
}

ComplexMat2 hamiltonian(const SystemSpec& spec) {
  return (spec.omega * pauli(Pauli::Z) + spec.delta * pauli(Pauli::X)) / 2.0;
}

DensityMatrix DensityMatrix::from_bloch(const BlochPoint& p) {
  ComplexMat2 m = pauli(Pauli::Identity) + p.x * pauli(Pauli::X) + p.y * pauli(Pauli::Y) +
                  p.z * pauli(Pauli::Z);
  return DensityMatrix(m / 2.0);
}

DensityMatrix DensityMatrix::pure(const Eigen::Vector2cd& psi) {
  Eigen::Vector2cd v = psi.normalized();
  return DensityMatrix(v * v.adjoint());
}

double DensityMatrix::min_eigenvalue() const {
  const double a = mat_(0, 0).real();
  const double d = mat_(1, 1).real();
  const Complex b = 0.5 * (mat_(0, 1) + std::conj(mat_(1, 0)));
  const double half_gap = std::hypot(0.5 * (a - d), std::abs(b));
  return 0.5 * (a + d) - half_gap;
}

bool DensityMatrix::is_physical(double tol) const {
  return hermiticity_residual() <= tol && std::abs(trace() - 1.0) <= tol &&
         min_eigenvalue() >= -tol;
}

BlochPoint bloch(const DensityMatrix& rho) {
  const ComplexMat2& m = rho.mat();
  // Tr(rho sx) = rho01 + rho10, Tr(rho sy) = i(rho01 - rho10), Tr(rho sz) = rho00 - rho11
  return {(m(0, 1) + m(1, 0)).real(), (kI * (m(0, 1) - m(1, 0))).real(),
          (m(0, 0) - m(1, 1)).real()};
}

ComplexMat2 von_neumann_rhs(const DensityMatrix& rho, const ComplexMat2& h) {
  return -kI * commutator(h, rho.mat());
}

ComplexMat2 lindblad_rhs(const DensityMatrix& rho, const SystemSpec& spec) {
  ComplexMat2 out = von_neumann_rhs(rho, hamiltonian(spec));
  const ComplexMat2& r = rho.mat();
  for (const auto& ch : spec.channels) {
    if (ch.gamma == 0.0) continue;
    const ComplexMat2 a = channel_operator(ch.kind);
    const ComplexMat2 ad = a.adjoint();
    out += ch.gamma * (a * r * ad - 0.5 * anticommutator(ad * a, r));
  }
  return out;
}

DensityMatrix rk4_step(const DensityMatrix& rho, double dt, const SystemSpec& spec) {
  if (!(dt > 0.0)) fail(ErrorKind::InvalidArgument, "rk4_step: dt must be positive");
  const ComplexMat2& r = rho.mat();
  const ComplexMat2 k1 = lindblad_rhs(rho, spec);
  const ComplexMat2 k2 = lindblad_rhs(DensityMatrix(r + 0.5 * dt * k1), spec);
  const ComplexMat2 k3 = lindblad_rhs(DensityMatrix(r + 0.5 * dt * k2), spec);
  const ComplexMat2 k4 = lindblad_rhs(DensityMatrix(r + dt * k3), spec);
  DensityMatrix next(r + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4));
  if (!next.mat().allFinite()) fail(ErrorKind::NonFinite, "rk4_step: non-finite state");
  const double lmin = next.min_eigenvalue();
  if (lmin < -kPositivityTol) {
    std::ostringstream msg;
    msg << "rk4_step: eigenvalue " << lmin << " < -1e-9 after step dt=" << dt;
    fail(ErrorKind::PositivityViolation, msg.str());
  }
  return next;
}

std::vector<DensityMatrix> evolve_states(const SystemSpec& spec, const DensityMatrix& rho0,
                                         std::span<const double> times, int substeps) {
  if (times.empty() || times.front() != 0.0) {
    fail(ErrorKind::InvalidArgument, "evolve: time grid must start at 0");
  }
  if (substeps < 1) fail(ErrorKind::InvalidArgument, "evolve: substeps must be >= 1");
  std::vector<DensityMatrix> out;
  out.reserve(times.size());
  DensityMatrix rho = rho0;
  out.push_back(rho);
  for (std::size_t i = 1; i < times.size(); ++i) {
    const double interval = times[i] - times[i - 1];
    if (!(interval > 0.0)) fail(ErrorKind::InvalidArgument, "evolve: times must increase");
    const double dt = interval / substeps;
    for (int s = 0; s < substeps; ++s) rho = rk4_step(rho, dt, spec);
    out.push_back(rho);
  }
  return out;
}

Trajectory evolve(const SystemSpec& spec, const DensityMatrix& rho0,
                  std::span<const double> times, int substeps) {
  const auto states = evolve_states(spec, rho0, times, substeps);
  Trajectory traj;
  traj.times.assign(times.begin(), times.end());
  traj.points.reserve(states.size());
  for (const auto& s : states) traj.points.push_back(bloch(s));
  return traj;
}

ComplexMat2 haar_unitary(std::mt19937_64& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  Eigen::Vector2cd c0, c1;
  for (int i = 0; i < 2; ++i) c0(i) = Complex(normal(rng), normal(rng));
  for (int i = 0; i < 2; ++i) c1(i) = Complex(normal(rng), normal(rng));
  const Eigen::Vector2cd q0 = c0.normalized();
  const Eigen::Vector2cd q1 = (c1 - q0.dot(c1) * q0).normalized();
  ComplexMat2 u;
  u.col(0) = q0;
  u.col(1) = q1;
  return u;
}

}  // namespace qnode::qsim
