#pragma once

// DFT-s-OTFS transmitter: K-point DFT spreading along Doppler, Doppler-division
// mapping, N-point IDFT to the delay-time domain, serialization with a cyclic
// prefix. Also the transform-free interleaved fast path.

#include <unsupported/Eigen/FFT>

#include "dfts_otfs/grid_core.hpp"

namespace dfts_otfs {

/// Unitary transforms scale by 1/sqrt(n). `none` leaves the raw sum and
/// exists so self-checks can demonstrate that energy checks catch it.
enum class Normalization { unitary, none };

enum class Direction { forward, inverse };

namespace detail {

inline Eigen::FFT<double>& fft_engine() {
  thread_local Eigen::FFT<double> engine = [] {
    Eigen::FFT<double> e;
    e.SetFlag(Eigen::FFT<double>::Unscaled);
    return e;
  }();
  return engine;
}

/// Transforms every row of `grid` in place. Forward uses e^{-j2pi kn/n}.
inline void transform_rows(CMatrix& grid, Direction dir,
                           Normalization norm = Normalization::unitary) {
  const auto n = static_cast<std::size_t>(grid.cols());
  if (n == 0) return;
  const double scale = norm == Normalization::unitary ? 1.0 / std::sqrt(double(n)) : 1.0;
  std::vector<Complex> in(n), out(n);
  auto& fft = fft_engine();
  for (Eigen::Index r = 0; r < grid.rows(); ++r) {
    for (std::size_t c = 0; c < n; ++c) in[c] = grid(r, static_cast<Eigen::Index>(c));
    if (n == 1) {
      out[0] = in[0];
    } else if (dir == Direction::forward) {
      fft.fwd(out, in);
    } else {
      fft.inv(out, in);
    }
    for (std::size_t c = 0; c < n; ++c) grid(r, static_cast<Eigen::Index>(c)) = out[c] * scale;
  }
}

}  // namespace detail

/// M x N delay-time samples X_DT[m, l] of one frame.
struct DelayTimeFrame {
  CMatrix samples;
  GridConfig grid;
};

/// Serial stream x[m + l*M] = X_DT[m, l] preceded by cp_len cyclic-prefix
/// samples copied from the end of the body.
struct SerialFrame {
  std::vector<Complex> samples;
  int cp_len = 0;
  GridConfig grid;

  std::span<const Complex> body() const {
    return std::span<const Complex>(samples).subspan(static_cast<std::size_t>(cp_len));
  }
};

/// Per-row K-point unitary DFT: out[m, n'] = K^-1/2 sum_k in[m, k] e^{-j2pi k n'/K}.
inline CMatrix dft_spread(const CMatrix& symbols) {
  CMatrix out = symbols;
  detail::transform_rows(out, Direction::forward);
  return out;
}

inline CMatrix dft_spread(const UserFrame& frame) {
  const auto& g = frame.plan.grid();
  if (frame.symbols.rows() != g.M() || frame.symbols.cols() != g.K()) {
    throw ShapeError("user frame must be M x K");
  }
  return dft_spread(frame.symbols);
}

/// Inverse of dft_spread.
inline CMatrix dft_despread(const CMatrix& spread) {
  CMatrix out = spread;
  detail::transform_rows(out, Direction::inverse);
  return out;
}

/// Places the M x K columns on the plan's Doppler bins of an M x N grid.
inline CMatrix map_dodma(const CMatrix& spread, const AllocationPlan& plan) {
  const auto& g = plan.grid();
  if (spread.rows() != g.M() || spread.cols() != g.K()) {
    throw ShapeError("spread grid must be M x K");
  }
  CMatrix out = CMatrix::Zero(g.M(), g.N());
  for (int k = 0; k < g.K(); ++k) out.col(plan.bin(k)) = spread.col(k);
  return out;
}

/// Pulls the plan's Doppler columns out of an M x N grid.
inline CMatrix extract_dodma(const CMatrix& grid, const AllocationPlan& plan) {
  const auto& g = plan.grid();
  if (grid.rows() != g.M() || grid.cols() != g.N()) throw ShapeError("grid must be M x N");
  CMatrix out(g.M(), g.K());
  for (int k = 0; k < g.K(); ++k) out.col(k) = grid.col(plan.bin(k));
  return out;
}

/// X_DT[m, l] = N^-1/2 sum_n X[m, n] e^{j2pi n l/N}.
inline DelayTimeFrame idft_doppler(const CMatrix& mapped, const GridConfig& grid,
                                   Normalization norm = Normalization::unitary) {
  if (mapped.rows() != grid.M() || mapped.cols() != grid.N()) {
    throw ShapeError("mapped grid must be M x N");
  }
  CMatrix out = mapped;
  detail::transform_rows(out, Direction::inverse, norm);
  return DelayTimeFrame{std::move(out), grid};
}

/// Delay-time back to delay-Doppler.
inline CMatrix dft_doppler(const CMatrix& delay_time) {
  CMatrix out = delay_time;
  detail::transform_rows(out, Direction::forward);
  return out;
}

inline SerialFrame serialize_with_cp(const DelayTimeFrame& frame, int cp_len) {
  const int M = frame.grid.M();
  const int N = frame.grid.N();
  const int body = M * N;
  if (cp_len < 0 || cp_len > body) {
    throw DomainError("cp_len " + std::to_string(cp_len) + " outside [0, " +
                      std::to_string(body) + "]");
  }
  SerialFrame out{std::vector<Complex>(static_cast<std::size_t>(cp_len + body)), cp_len,
                  frame.grid};
  for (int l = 0; l < N; ++l)
    for (int m = 0; m < M; ++m) out.samples[cp_len + m + l * M] = frame.samples(m, l);
  for (int i = 0; i < cp_len; ++i) out.samples[i] = out.samples[body + i];
  return out;
}

/// Drops the cyclic prefix and restores the M x N layout.
inline DelayTimeFrame deserialize(std::span<const Complex> body, const GridConfig& grid) {
  const int M = grid.M();
  const int N = grid.N();
  if (static_cast<int>(body.size()) != M * N) throw ShapeError("serial body must hold M*N samples");
  CMatrix out(M, N);
  for (int l = 0; l < N; ++l)
    for (int m = 0; m < M; ++m) out(m, l) = body[m + l * M];
  return DelayTimeFrame{std::move(out), grid};
}

inline DelayTimeFrame deserialize(const SerialFrame& serial) {
  return deserialize(serial.body(), serial.grid);
}

/// Delay-Doppler grid a user puts on air before the Doppler IDFT. Without
/// spreading the raw QAM symbols sit on the allocated bins (plain OTFS).
inline CMatrix mapped_grid(const UserFrame& frame, bool spreading) {
  return map_dodma(spreading ? dft_spread(frame) : frame.symbols, frame.plan);
}

inline DelayTimeFrame modulate_user(const UserFrame& frame, bool spreading,
                                    Normalization norm = Normalization::unitary) {
  return idft_doppler(mapped_grid(frame, spreading), frame.plan.grid(), norm);
}

enum class PhaseRamp { keep, strip };

/// Interleaved DFT-s-OTFS without transforms: each delay row is the user's K
/// symbols repeated Q times, scaled by Q^-1/2 and rotated by e^{j2pi q l/N}.
/// PhaseRamp::strip drops the rotation, leaving it to the RF stage.
inline DelayTimeFrame interleaved_fast_path(const UserFrame& frame,
                                            PhaseRamp ramp = PhaseRamp::keep) {
  const auto& plan = frame.plan;
  if (plan.scheme() != Scheme::interleaved) {
    throw DomainError("interleaved fast path requires an interleaved allocation");
  }
  const auto& g = plan.grid();
  if (frame.symbols.rows() != g.M() || frame.symbols.cols() != g.K()) {
    throw ShapeError("user frame must be M x K");
  }
  const double scale = 1.0 / std::sqrt(static_cast<double>(g.Q()));
  CMatrix out(g.M(), g.N());
  for (int l = 0; l < g.N(); ++l) {
    const Complex rot =
        ramp == PhaseRamp::keep
            ? std::polar(scale, 2.0 * kPi * plan.user() * l / static_cast<double>(g.N()))
            : Complex(scale, 0.0);
    out.col(l) = frame.symbols.col(l % g.K()) * rot;
  }
  return DelayTimeFrame{std::move(out), g};
}

}  // namespace dfts_otfs
