#pragma once

// Constellations, delay-Doppler grid parameters, Doppler resource allocation
// and per-user frame generation.

#include <cmath>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "dfts_otfs/common.hpp"

namespace dfts_otfs {

namespace detail {

inline int integer_sqrt(int value) {
  int root = static_cast<int>(std::lround(std::sqrt(static_cast<double>(value))));
  while (root * root > value) --root;
  while ((root + 1) * (root + 1) <= value) ++root;
  return root;
}

inline int log2_exact(int value) {
  int bits = 0;
  while ((1 << bits) < value) ++bits;
  return (1 << bits) == value ? bits : -1;
}

inline unsigned gray_encode(unsigned v) { return v ^ (v >> 1); }

inline unsigned gray_decode(unsigned g) {
  unsigned v = g;
  for (unsigned shift = 1; shift < 32; shift <<= 1) v ^= v >> shift;
  return v;
}

}  // namespace detail

/// Peak symbol power of unit-average-power square M-QAM: 3(sqrt(M)-1)^2/(M-1).
inline double max_symbol_power(int order) {
  if (order < 4) throw DomainError("QAM order must be >= 4, got " + std::to_string(order));
  const int side = detail::integer_sqrt(order);
  if (side * side != order) {
    throw DomainError("QAM order must be a perfect square, got " + std::to_string(order));
  }
  const double s = side - 1.0;
  return 3.0 * s * s / (order - 1.0);
}

/// Square M-QAM alphabet normalized to unit average power.
///
/// Bit labelling: each symbol carries log2(M) bits, most significant first.
/// The first half of the label selects the in-phase level, the second half
/// the quadrature level. Each half is a reflected Gray code over the axis
/// levels ordered from most positive to most negative, so for 4-QAM the
/// label 00 maps to (1+j)/sqrt(2) and 11 to (-1-j)/sqrt(2).
class QamConstellation {
 public:
  explicit QamConstellation(int order) : order_(order) {
    max_symbol_power(order);  // validates square and >= 4
    side_ = detail::integer_sqrt(order);
    axis_bits_ = detail::log2_exact(side_);
    if (axis_bits_ < 1) {
      throw DomainError("QAM order must be a power of 4, got " + std::to_string(order));
    }
    scale_ = std::sqrt(3.0 / (2.0 * (order - 1.0)));
    levels_.resize(side_);
    for (int k = 0; k < side_; ++k) levels_[k] = (side_ - 1 - 2 * k) * scale_;
    points_.resize(order);
    for (int label = 0; label < order; ++label) {
      const unsigned i_code = static_cast<unsigned>(label) >> axis_bits_;
      const unsigned q_code = static_cast<unsigned>(label) & ((1u << axis_bits_) - 1u);
      points_[label] = Complex(levels_[detail::gray_decode(i_code)],
                               levels_[detail::gray_decode(q_code)]);
    }
  }

  int order() const { return order_; }
  int bits_per_symbol() const { return 2 * axis_bits_; }
  const std::vector<Complex>& points() const { return points_; }
  /// Symbol for a label in [0, M).
  Complex point(unsigned label) const { return points_.at(label); }
  double max_power() const { return max_symbol_power(order_); }
  /// Half the distance between adjacent points.
  double half_spacing() const { return scale_; }

  /// Nearest constellation label by per-axis slicing. Exact ties resolve to
  /// the smaller Gray code on each axis, which is the lexicographically
  /// smallest full label.
  unsigned nearest_label(Complex s) const {
    const unsigned i_code = detail::gray_encode(slice(s.real()));
    const unsigned q_code = detail::gray_encode(slice(s.imag()));
    return (i_code << axis_bits_) | q_code;
  }

 private:
  unsigned slice(double v) const {
    // Level index k has amplitude (side-1-2k)*scale.
    const double pos = ((side_ - 1) - v / scale_) / 2.0;
    double k = std::floor(pos);
    const double frac = pos - k;
    if (frac > 0.5) {
      k += 1.0;
    } else if (frac == 0.5) {
      const auto lo = static_cast<unsigned>(std::clamp(k, 0.0, side_ - 1.0));
      const auto hi = static_cast<unsigned>(std::clamp(k + 1.0, 0.0, side_ - 1.0));
      return detail::gray_encode(hi) < detail::gray_encode(lo) ? hi : lo;
    }
    return static_cast<unsigned>(std::clamp(k, 0.0, side_ - 1.0));
  }

  int order_;
  int side_ = 0;
  int axis_bits_ = 0;
  double scale_ = 0.0;
  std::vector<double> levels_;
  std::vector<Complex> points_;
};

inline std::vector<Complex> qam_modulate(std::span<const std::uint8_t> bits,
                                         const QamConstellation& qam) {
  const auto bps = static_cast<std::size_t>(qam.bits_per_symbol());
  if (bits.size() % bps != 0) {
    throw ShapeError("bit count " + std::to_string(bits.size()) +
                     " is not a multiple of " + std::to_string(bps));
  }
  std::vector<Complex> out(bits.size() / bps);
  for (std::size_t s = 0; s < out.size(); ++s) {
    unsigned label = 0;
    for (std::size_t b = 0; b < bps; ++b) label = (label << 1) | (bits[s * bps + b] & 1u);
    out[s] = qam.point(label);
  }
  return out;
}

inline Bits qam_demodulate(std::span<const Complex> symbols, const QamConstellation& qam) {
  const int bps = qam.bits_per_symbol();
  Bits out(symbols.size() * bps);
  for (std::size_t s = 0; s < symbols.size(); ++s) {
    const unsigned label = qam.nearest_label(symbols[s]);
    for (int b = 0; b < bps; ++b) {
      out[s * bps + b] = static_cast<std::uint8_t>((label >> (bps - 1 - b)) & 1u);
    }
  }
  return out;
}

/// Delay-Doppler grid: M delay bins, N Doppler bins shared by Q users with
/// K = N/Q Doppler bins each. Frame duration T = M*N*delta_tau.
class GridConfig {
 public:
  GridConfig(int M, int N, int Q, double delta_tau = 1.0 / 7.68e6)
      : M_(M), N_(N), Q_(Q), delta_tau_(delta_tau) {
    if (M < 1 || N < 1 || Q < 1) throw DomainError("grid dimensions must be positive");
    if (N % Q != 0) {
      throw DomainError("Q=" + std::to_string(Q) + " does not divide N=" + std::to_string(N));
    }
    if (!(delta_tau > 0.0)) throw DomainError("delta_tau must be positive");
  }

  int M() const { return M_; }
  int N() const { return N_; }
  int Q() const { return Q_; }
  int K() const { return N_ / Q_; }
  int size() const { return M_ * N_; }
  double delta_tau() const { return delta_tau_; }
  double frame_duration() const { return M_ * N_ * delta_tau_; }
  double delta_nu() const { return 1.0 / frame_duration(); }

  bool operator==(const GridConfig&) const = default;

 private:
  int M_, N_, Q_;
  double delta_tau_;
};

enum class Scheme { interleaved, block };

inline std::string to_string(Scheme s) {
  return s == Scheme::interleaved ? "interleaved" : "block";
}

/// Doppler bins occupied by one user. Interleaved: n = Q*k + q.
/// Block: n = K*q + k (K contiguous bins per user).
class AllocationPlan {
 public:
  AllocationPlan(Scheme scheme, int user, GridConfig grid)
      : scheme_(scheme), user_(user), grid_(grid) {
    if (user < 0 || user >= grid.Q()) {
      throw DomainError("user index " + std::to_string(user) + " outside 0.." +
                        std::to_string(grid.Q() - 1));
    }
  }

  Scheme scheme() const { return scheme_; }
  int user() const { return user_; }
  const GridConfig& grid() const { return grid_; }

  /// Doppler bin holding the k-th spread sample.
  int bin(int k) const {
    return scheme_ == Scheme::interleaved ? grid_.Q() * k + user_ : grid_.K() * user_ + k;
  }

  std::vector<int> occupied_bins() const {
    std::vector<int> bins(grid_.K());
    for (int k = 0; k < grid_.K(); ++k) bins[k] = bin(k);
    return bins;
  }

  /// First occupied bin; the block phase offset in the delay-time domain.
  int first_bin() const { return bin(0); }

 private:
  Scheme scheme_;
  int user_;
  GridConfig grid_;
};

/// All Q users' plans for one scheme.
inline std::vector<AllocationPlan> all_user_plans(Scheme scheme, const GridConfig& grid) {
  std::vector<AllocationPlan> plans;
  plans.reserve(grid.Q());
  for (int q = 0; q < grid.Q(); ++q) plans.emplace_back(scheme, q, grid);
  return plans;
}

/// One user's M x K delay-Doppler QAM symbols and the bits they carry.
struct UserFrame {
  CMatrix symbols;
  Bits bits;
  AllocationPlan plan;
};

/// Symbols are filled row by row (delay-major): bits for X[m, k] start at
/// (m*K + k) * bits_per_symbol.
inline UserFrame make_user_frame(Bits bits, const QamConstellation& qam,
                                 const AllocationPlan& plan) {
  const int M = plan.grid().M();
  const int K = plan.grid().K();
  auto syms = qam_modulate(bits, qam);
  if (static_cast<int>(syms.size()) != M * K) {
    throw ShapeError("expected " + std::to_string(M * K) + " symbols, got " +
                     std::to_string(syms.size()));
  }
  CMatrix grid(M, K);
  for (int m = 0; m < M; ++m)
    for (int k = 0; k < K; ++k) grid(m, k) = syms[static_cast<std::size_t>(m) * K + k];
  return UserFrame{std::move(grid), std::move(bits), plan};
}

template <typename Rng>
UserFrame draw_user_frame(const AllocationPlan& plan, const QamConstellation& qam, Rng& rng) {
  const std::size_t n_bits = static_cast<std::size_t>(plan.grid().M()) * plan.grid().K() *
                             qam.bits_per_symbol();
  Bits bits(n_bits);
  // One 64-bit draw feeds 64 bits.
  std::uint64_t word = 0;
  for (std::size_t i = 0; i < n_bits; ++i) {
    if (i % 64 == 0) word = rng();
    bits[i] = static_cast<std::uint8_t>((word >> (i % 64)) & 1u);
  }
  return make_user_frame(std::move(bits), qam, plan);
}

/// Delay-major flattening of an M x K symbol grid, matching make_user_frame.
inline std::vector<Complex> flatten_symbols(const CMatrix& grid) {
  std::vector<Complex> out;
  out.reserve(static_cast<std::size_t>(grid.size()));
  for (Eigen::Index m = 0; m < grid.rows(); ++m)
    for (Eigen::Index k = 0; k < grid.cols(); ++k) out.push_back(grid(m, k));
  return out;
}

}  // namespace dfts_otfs
