#pragma once

// Transmit pulses (rectangular, root raised cosine), oversampled pulse
// shaping, the RRC frequency response and the peak factor g0, the maximum
// over t of sum_i |g(t - i*delta_tau)|.

#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include "dfts_otfs/tx_chain.hpp"

namespace dfts_otfs {

enum class PulseKind { rect, rrc };

inline std::string to_string(PulseKind k) { return k == PulseKind::rect ? "rect" : "rrc"; }

/// Transmit filter description. Times are in units of delta_tau throughout.
/// The RRC pulse is truncated to |t| <= span; rect ignores beta and span.
struct PulseSpec {
  PulseKind kind = PulseKind::rect;
  double beta = 0.0;
  int span = 10;
  int oversample = 1;

  static PulseSpec rect(int oversample = 1) { return {PulseKind::rect, 0.0, 10, oversample}; }
  static PulseSpec rrc(double beta, int span = 10, int oversample = 16) {
    return {PulseKind::rrc, beta, span, oversample};
  }

  void validate() const {
    if (oversample < 1) throw DomainError("oversample must be >= 1");
    if (kind == PulseKind::rrc) {
      if (!(beta >= 0.0 && beta <= 1.0)) throw DomainError("roll-off must lie in [0, 1]");
      if (span < 1) throw DomainError("pulse span must be >= 1");
    }
  }
};

namespace detail {

inline double rrc_at_zero(double beta) { return 1.0 - beta + 4.0 * beta / kPi; }

inline double rrc_at_quarter_inverse(double beta) {
  const double a = kPi / (4.0 * beta);
  return beta / std::sqrt(2.0) *
         ((1.0 + 2.0 / kPi) * std::sin(a) + (1.0 - 2.0 / kPi) * std::cos(a));
}

}  // namespace detail

/// Root-raised-cosine impulse response at t (units of delta_tau), with the
/// removable singularities at t = 0 and |t| = 1/(4 beta) filled by their limits.
inline double rrc_pulse(double beta, double t) {
  constexpr double kSingularWindow = 1e-7;
  if (std::abs(t) < kSingularWindow) return detail::rrc_at_zero(beta);
  if (beta == 0.0) return std::sin(kPi * t) / (kPi * t);
  const double x = 4.0 * beta * t;
  if (std::abs(std::abs(x) - 1.0) < 4.0 * beta * kSingularWindow) {
    return detail::rrc_at_quarter_inverse(beta);
  }
  return (std::sin(kPi * t * (1.0 - beta)) + x * std::cos(kPi * t * (1.0 + beta))) /
         (kPi * t * (1.0 - x * x));
}

/// Untruncated pulse value; rect is 1 on [0, 1).
inline double eval_pulse(const PulseSpec& spec, double t) {
  if (spec.kind == PulseKind::rect) return (t >= 0.0 && t < 1.0) ? 1.0 : 0.0;
  return rrc_pulse(spec.beta, t);
}

/// RRC spectrum G(f) for a pulse of symbol spacing delta_tau (seconds).
inline double rrc_freq_response(double beta, double f, double delta_tau) {
  if (!(beta >= 0.0 && beta <= 1.0)) throw DomainError("roll-off must lie in [0, 1]");
  const double af = std::abs(f);
  const double inner = (1.0 - beta) / (2.0 * delta_tau);
  const double outer = (1.0 + beta) / (2.0 * delta_tau);
  if (af <= inner) return delta_tau;
  if (af > outer) return 0.0;
  const double c = std::cos(kPi * delta_tau / beta * (af - inner));
  return delta_tau / std::sqrt(2.0) * std::sqrt(std::max(0.0, 1.0 + c));
}

/// Sampled, truncated pulse. taps[k] = g((first + k) / oversample).
struct PulseTaps {
  std::vector<double> taps;
  int first = 0;
};

inline PulseTaps pulse_taps(const PulseSpec& spec) {
  spec.validate();
  const int L = spec.oversample;
  PulseTaps out;
  if (spec.kind == PulseKind::rect) {
    out.first = 0;
    out.taps.assign(static_cast<std::size_t>(L), 1.0);
    return out;
  }
  out.first = -spec.span * L;
  out.taps.resize(static_cast<std::size_t>(2 * spec.span * L + 1));
  for (std::size_t k = 0; k < out.taps.size(); ++k) {
    out.taps[k] = rrc_pulse(spec.beta, (out.first + static_cast<int>(k)) / double(L));
  }
  return out;
}

/// Oversampled complex baseband signal. Sample n sits at time
/// (n - origin) * delta_tau / oversample, where t = 0 is the first serial
/// sample (the first cyclic-prefix sample when a CP is present). The frame
/// window [frame_begin, frame_end) covers the M*N body samples, 0 <= t < T.
struct Waveform {
  std::vector<Complex> samples;
  int oversample = 1;
  double delta_tau = 1.0;
  int origin = 0;
  int cp_len = 0;
  int body_len = 0;

  double sample_rate() const { return oversample / delta_tau; }
  double sample_period() const { return delta_tau / oversample; }
  std::size_t frame_begin() const {
    return static_cast<std::size_t>(origin + cp_len * oversample);
  }
  std::size_t frame_end() const { return frame_begin() + frame_length(); }
  std::size_t frame_length() const { return static_cast<std::size_t>(body_len) * oversample; }
  /// Window used for PAPR. Including the CP starts the window at t = 0.
  std::span<const Complex> frame_window(bool include_cp = false) const {
    const std::size_t begin = include_cp ? static_cast<std::size_t>(origin) : frame_begin();
    return std::span<const Complex>(samples).subspan(begin, frame_end() - begin);
  }
};

/// Linear convolution of a symbol-rate stream with the sampled pulse:
/// x(n) = sum_i s[i] g(n/L - i). Zero symbols are skipped.
inline Waveform shape_samples(std::span<const Complex> serial, const PulseSpec& spec,
                              const PulseTaps& taps) {
  if (serial.empty()) throw DomainError("cannot shape an empty serial stream");
  const int L = spec.oversample;
  Waveform out;
  out.oversample = L;
  out.origin = -taps.first;
  out.samples.assign((serial.size() - 1) * L + taps.taps.size(), Complex{});
  const std::size_t n_taps = taps.taps.size();
  for (std::size_t i = 0; i < serial.size(); ++i) {
    const Complex s = serial[i];
    if (s == Complex{}) continue;
    Complex* dst = out.samples.data() + i * L;
    for (std::size_t k = 0; k < n_taps; ++k) dst[k] += s * taps.taps[k];
  }
  return out;
}

inline Waveform shape_waveform(const SerialFrame& serial, const PulseSpec& spec,
                               const PulseTaps& taps) {
  Waveform out = shape_samples(serial.samples, spec, taps);
  out.delta_tau = serial.grid.delta_tau();
  out.cp_len = serial.cp_len;
  out.body_len = serial.grid.size();
  return out;
}

inline Waveform shape_waveform(const SerialFrame& serial, const PulseSpec& spec) {
  return shape_waveform(serial, spec, pulse_taps(spec));
}

/// Result of the dense-grid peak-factor search.
struct G0Numeric {
  double value = 0.0;
  double argmax = 0.0;  ///< in [0, 1), units of delta_tau
  double grid_step = 0.0;
};

/// sum_i |g(t - i)| over all shifts with |t - i| <= span.
inline double shifted_abs_sum(double beta, int span, double t) {
  double sum = 0.0;
  const auto lo = static_cast<int>(std::ceil(t - span - 1e-12));
  const auto hi = static_cast<int>(std::floor(t + span + 1e-12));
  for (int i = lo; i <= hi; ++i) sum += std::abs(rrc_pulse(beta, t - i));
  return sum;
}

/// max over t in [0, 1) of sum_i |g(t - i)|, evaluated on grid_points
/// equally spaced instants. The sum is 1-periodic in t, so one interval
/// covers every frame position.
inline G0Numeric g0_numeric(double beta, int span, int grid_points = 4000) {
  if (grid_points < 1000) throw DomainError("g0 search needs at least 1000 grid points");
  if (span < 1) throw DomainError("pulse span must be >= 1");
  G0Numeric best;
  best.grid_step = 1.0 / grid_points;
  for (int k = 0; k < grid_points; ++k) {
    const double t = static_cast<double>(k) / grid_points;
    const double v = shifted_abs_sum(beta, span, t);
    if (v > best.value) {
      best.value = v;
      best.argmax = t;
    }
  }
  return best;
}

/// g0 for any pulse. Rect supports never overlap, so g0 = 1.
inline double g0_for(const PulseSpec& spec, int grid_points = 4000) {
  if (spec.kind == PulseKind::rect) return 1.0;
  return g0_numeric(spec.beta, spec.span, grid_points).value;
}

struct G0Analytic {
  double value = 0.0;
  double peak_time = 0.0;  ///< 0.5 for beta <= 0.4, 0 otherwise
  bool numeric_fallback = false;
};

/// Closed-form series for g0, assuming the peak of the shifted-pulse sum sits
/// midway between symbols when beta <= 0.4 and on a symbol instant when
/// beta > 0.4. Each term is |g| at a half-integer or integer offset written
/// out through its sine/cosine values; both sides of the peak contribute.
/// beta = 0 has no series and falls back to the numeric search.
inline G0Analytic g0_analytic(double beta, int span) {
  if (!(beta >= 0.0 && beta <= 1.0)) throw DomainError("roll-off must lie in [0, 1]");
  if (span < 1) throw DomainError("pulse span must be >= 1");
  if (beta == 0.0) return {g0_numeric(0.0, span).value, 0.5, true};

  double sum = 0.0;
  if (beta <= 0.4) {
    // t = i + 1/2: sin and cos of pi*(2i+1)/2 collapse to +-1 and 0.
    for (int i = 0; i < span; ++i) {
      const double odd = 1.0 + 2.0 * i;
      const double a = beta * kPi / 2.0 * odd;
      const double sign = (i % 2 == 0) ? 1.0 : -1.0;
      const double x = 2.0 * beta * odd;
      double term;
      if (std::abs(x - 1.0) < 1e-12) {
        term = detail::rrc_at_quarter_inverse(beta);
      } else {
        const double num = -sign * std::cos(a) + 2.0 * beta * odd * sign * std::sin(a);
        term = num / (-kPi / 2.0 * odd * (1.0 - x * x));
      }
      sum += 2.0 * std::abs(term);
    }
    return {sum, 0.5, false};
  }

  // t = i + 1, plus the centre tap g(0).
  sum = detail::rrc_at_zero(beta);
  for (int i = 0; i < span; ++i) {
    const double n = i + 1.0;
    const double sign = (i % 2 == 0) ? 1.0 : -1.0;
    const double x = 4.0 * beta * n;
    double term;
    if (std::abs(x - 1.0) < 1e-12) {
      term = detail::rrc_at_quarter_inverse(beta);
    } else {
      const double num = sign * std::sin(beta * n * kPi) - x * sign * std::cos(beta * n * kPi);
      term = num / (kPi * n * (1.0 - x * x));
    }
    sum += 2.0 * std::abs(term);
  }
  return {sum, 0.0, false};
}

}  // namespace dfts_otfs
