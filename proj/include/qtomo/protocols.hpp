#pragma once

#include <cstdio>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "qtomo/core.hpp"
#include "qtomo/states.hpp"

namespace qtomo {

/**
 * A measurement protocol: m x s instrumental matrix X whose row j gives the
 * projection amplitude M_j = X_j c, plus per-row exposure times t_j.
 *
 * Freshly built protocols carry placeholder exposures t_j = 1 and report
 * exposures_assigned() == false until assign_exposures() is applied.
 */
class Protocol {
 public:
  Protocol(std::string name, CMatrix instrument)
      : Protocol(std::move(name), std::move(instrument), RVector(), false) {}

  Protocol(std::string name, CMatrix instrument, RVector exposures, bool assigned)
      : name_(std::move(name)), x_(std::move(instrument)), t_(std::move(exposures)), assigned_(assigned) {
    if (x_.rows() < 1 || x_.cols() < 1) throw std::invalid_argument("protocol matrix must be non-empty");
    if (t_.size() == 0) t_ = RVector::Ones(x_.rows());
    if (t_.size() != x_.rows()) throw std::invalid_argument("exposure count must match row count");
    if (!(t_.array() > 0.0).all()) throw std::invalid_argument("exposures must be positive");
    trace_factor_ = compute_trace_factor(x_);
  }

  const std::string& name() const { return name_; }
  int rows() const { return static_cast<int>(x_.rows()); }
  int dim() const { return static_cast<int>(x_.cols()); }
  const CMatrix& instrument() const { return x_; }
  const RVector& exposures() const { return t_; }
  bool exposures_assigned() const { return assigned_; }
  bool complete() const { return trace_factor_.has_value(); }

  /// a such that sum_j X_j^dagger X_j = a I; throws IncompleteProtocol otherwise.
  double trace_factor() const {
    if (!trace_factor_) throw IncompleteProtocol("incomplete protocol '" + name_ + "': sum of intensity operators is not proportional to identity");
    return *trace_factor_;
  }

  Protocol with_exposures(RVector exposures) const { return Protocol(name_, x_, std::move(exposures), true); }
  Protocol renamed(std::string name) const { return Protocol(std::move(name), x_, t_, assigned_); }

  static std::optional<double> compute_trace_factor(const CMatrix& x) {
    const CMatrix sum = x.adjoint() * x;
    const double a = sum.trace().real() / static_cast<double>(x.cols());
    if (!(a > 0.0)) return std::nullopt;
    const double deviation = (sum - a * CMatrix::Identity(x.cols(), x.cols())).cwiseAbs().maxCoeff();
    if (deviation > 1e-8 * a) return std::nullopt;
    return a;
  }

 private:
  std::string name_;
  CMatrix x_;
  RVector t_;
  bool assigned_ = false;
  std::optional<double> trace_factor_;
};

inline double completeness_factor(const Protocol& p) { return p.trace_factor(); }

namespace detail {

inline Complex phase_eighth(int k) {
  const double angle = k * std::numbers::pi / 4.0;
  return {std::cos(angle), std::sin(angle)};
}

// Amplitudes of the tetrahedron/octahedron rows: sqrt(sqrt3 +- 1) / 12^(1/4).
inline double major_amplitude() { return std::sqrt(std::sqrt(3.0) + 1.0) / std::pow(12.0, 0.25); }
inline double minor_amplitude() { return std::sqrt(std::sqrt(3.0) - 1.0) / std::pow(12.0, 0.25); }

}  // namespace detail

/// Four rows pointing at the faces of a tetrahedron inscribed in the Bloch sphere.
inline Protocol tetrahedron() {
  const double hi = detail::major_amplitude();
  const double lo = detail::minor_amplitude();
  CMatrix x(4, 2);
  x << hi, detail::phase_eighth(1) * lo,
       hi, detail::phase_eighth(5) * lo,
       lo, detail::phase_eighth(3) * hi,
       lo, detail::phase_eighth(7) * hi;
  return Protocol("tetrahedron", std::move(x));
}

/// The six eigenstates of the Pauli operators (cube faces).
inline Protocol cube() {
  const double r = 1.0 / std::sqrt(2.0);
  const Complex i(0.0, 1.0);
  CMatrix x(6, 2);
  x << 1.0, 0.0,
       0.0, 1.0,
       r, r,
       r, -r,
       r, r * i,
       r, -r * i;
  return Protocol("cube", std::move(x));
}

inline Protocol octahedron() {
  const double hi = detail::major_amplitude();
  const double lo = detail::minor_amplitude();
  CMatrix x(8, 2);
  for (int k = 0; k < 4; ++k) {
    x(k, 0) = hi;
    x(k, 1) = detail::phase_eighth(2 * k + 1) * lo;
    x(k + 4, 0) = lo;
    x(k + 4, 1) = detail::phase_eighth(2 * k + 1) * hi;
  }
  return Protocol("octahedron", std::move(x));
}

/// Built-in one-qubit protocol by name: tetrahedron, cube or octahedron.
inline Protocol named_protocol(const std::string& name) {
  if (name == "tetrahedron") return tetrahedron();
  if (name == "cube") return cube();
  if (name == "octahedron") return octahedron();
  throw std::invalid_argument("unknown protocol '" + name + "'");
}

/**
 * Kronecker product of protocols. Row order is lexicographic with the first
 * part varying slowest. Exposures are multiplied row-wise, so placeholder
 * parts give a placeholder product.
 */
inline Protocol tensor_protocol(std::span<const Protocol> parts, int max_dim = 64) {
  if (parts.empty()) throw std::invalid_argument("tensor_protocol needs at least one part");
  if (parts.size() == 1) return parts.front();
  long long dim = 1;
  for (const auto& p : parts) {
    dim *= p.dim();
    if (dim > max_dim) throw std::invalid_argument("tensor protocol exceeds dimension cap " + std::to_string(max_dim));
  }
  CMatrix x = parts.front().instrument();
  RVector t = parts.front().exposures();
  bool assigned = parts.front().exposures_assigned();
  std::string name = parts.front().name();
  for (std::size_t k = 1; k < parts.size(); ++k) {
    const CMatrix& y = parts[k].instrument();
    const RVector& ty = parts[k].exposures();
    CMatrix next(x.rows() * y.rows(), x.cols() * y.cols());
    RVector tn(next.rows());
    for (Eigen::Index i = 0; i < x.rows(); ++i) {
      for (Eigen::Index j = 0; j < y.rows(); ++j) {
        const Eigen::Index row = i * y.rows() + j;
        tn(row) = t(i) * ty(j);
        for (Eigen::Index a = 0; a < x.cols(); ++a)
          next.block(row, a * y.cols(), 1, y.cols()) = x(i, a) * y.row(j);
      }
    }
    x = std::move(next);
    t = std::move(tn);
    assigned = assigned && parts[k].exposures_assigned();
    name += "*" + parts[k].name();
  }
  return Protocol(std::move(name), std::move(x), std::move(t), assigned);
}

/// The same one-qubit protocol on every one of `qubits` qubits.
inline Protocol tensor_power(const Protocol& single, int qubits, int max_dim = 64) {
  if (qubits < 1) throw std::invalid_argument("qubit count must be positive");
  std::vector<Protocol> parts(static_cast<std::size_t>(qubits), single);
  return tensor_protocol(parts, max_dim);
}

/// Lambda_j = X_j^dagger X_j (0-based row index).
inline CMatrix intensity_operator(const Protocol& p, int j) {
  if (j < 0 || j >= p.rows()) throw std::out_of_range("protocol row index out of range");
  const CVector row = p.instrument().row(j).transpose();
  return row.conjugate() * row.transpose();
}

/// lambda_j = sum_k |X_j c_k|^2, i.e. Tr(Lambda_j c c^dagger).
inline RVector intensities(const Protocol& p, const PurifiedAmplitude& c) {
  if (c.dim() != p.dim()) throw std::invalid_argument("intensities: dimension mismatch");
  return (p.instrument() * c.matrix()).rowwise().squaredNorm();
}

/// lambda_j = Tr(Lambda_j rho) = X_j rho X_j^dagger.
inline RVector intensities(const Protocol& p, const DensityMatrix& rho) {
  if (rho.dim() != p.dim()) throw std::invalid_argument("intensities: dimension mismatch");
  const CMatrix xr = p.instrument() * rho.matrix();
  return xr.cwiseProduct(p.instrument().conjugate()).rowwise().sum().real().cwiseMax(0.0);
}

/// Uniform exposures t_j = n / a so that the expected total count is n for every state.
inline Protocol assign_exposures(const Protocol& p, double n) {
  if (!(n > 0.0)) throw std::invalid_argument("sample size must be positive");
  const double a = completeness_factor(p);
  return p.with_exposures(RVector::Constant(p.rows(), n / a));
}

namespace detail {

inline std::string format_complex(Complex z) {
  char buf[96];
  std::snprintf(buf, sizeof buf, "%.17g%c%.17gi", z.real(), std::signbit(z.imag()) ? '-' : '+', std::abs(z.imag()));
  return buf;
}

}  // namespace detail

/**
 * Text export: a header line "name m s a" followed by one line per row with
 * space-separated entries written as re+imi at 17 significant digits.
 * The trace factor is written as "incomplete" when the protocol has none.
 */
inline void write_protocol(std::ostream& os, const Protocol& p) {
  char buf[64];
  if (p.complete())
    std::snprintf(buf, sizeof buf, "%.17g", p.trace_factor());
  else
    std::snprintf(buf, sizeof buf, "incomplete");
  os << p.name() << ' ' << p.rows() << ' ' << p.dim() << ' ' << buf << '\n';
  for (int j = 0; j < p.rows(); ++j) {
    for (int l = 0; l < p.dim(); ++l) {
      if (l) os << ' ';
      os << detail::format_complex(p.instrument()(j, l));
    }
    os << '\n';
  }
}

}  // namespace qtomo
