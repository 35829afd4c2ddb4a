#pragma once

// PAPR measurement, Monte Carlo CCDF estimation, the closed-form PAPR upper
// bounds and the roll-off / spreading-size sweeps.

#include <algorithm>
#include <cstdio>
#include <limits>
#include <random>
#include <string>
#include <vector>

#include "dfts_otfs/pulse_shaping.hpp"

namespace dfts_otfs {

struct UndefinedPaprError : DomainError {
  using DomainError::DomainError;
};

/// Peak-to-average power ratio in dB of the given samples.
inline double papr_db(std::span<const Complex> window) {
  if (window.empty()) throw UndefinedPaprError("PAPR of an empty window is undefined");
  double peak = 0.0;
  double total = 0.0;
  for (const auto& s : window) {
    const double p = std::norm(s);
    peak = std::max(peak, p);
    total += p;
  }
  if (total <= 0.0) throw UndefinedPaprError("PAPR of an all-zero waveform is undefined");
  return to_db(peak / (total / static_cast<double>(window.size())));
}

/// PAPR over the frame window, average taken over the same window.
inline double papr_db(const Waveform& wf, bool include_cp = false) {
  return papr_db(wf.frame_window(include_cp));
}

/// PAPR against a fixed reference average power (for example the statistical
/// mean power 1/Q) instead of the realized window mean.
inline double papr_db(const Waveform& wf, double reference_power, bool include_cp = false) {
  if (!(reference_power > 0.0)) throw UndefinedPaprError("reference power must be positive");
  const auto window = wf.frame_window(include_cp);
  if (window.empty()) throw UndefinedPaprError("PAPR of an empty window is undefined");
  double peak = 0.0;
  for (const auto& s : window) peak = std::max(peak, std::norm(s));
  if (peak <= 0.0) throw UndefinedPaprError("PAPR of an all-zero waveform is undefined");
  return to_db(peak / reference_power);
}

/// Mean |x|^2 over the frame window.
inline double mean_power(const Waveform& wf, bool include_cp = false) {
  const auto window = wf.frame_window(include_cp);
  double total = 0.0;
  for (const auto& s : window) total += std::norm(s);
  return window.empty() ? 0.0 : total / static_cast<double>(window.size());
}

/// Full per-user transmit chain: symbols -> (spread) -> map -> IDFT -> serial + CP -> pulse.
inline Waveform transmit_waveform(const UserFrame& frame, bool spreading, const PulseSpec& pulse,
                                  const PulseTaps& taps, int cp_len) {
  return shape_waveform(serialize_with_cp(modulate_user(frame, spreading), cp_len), pulse, taps);
}

/// How the PAPR denominator is formed.
///  expected:  statistical mean power 1/Q of a user's signal (unit-power
///             QAM, unitary transforms, unit-energy pulse).
///  empirical: mean power of the realized frame window.
enum class PaprNormalization { expected, empirical };

inline std::string to_string(PaprNormalization n) {
  return n == PaprNormalization::expected ? "expected" : "empirical";
}

/// Empirical exceedance curve Pr{PAPR > x}.
class CcdfCurve {
 public:
  CcdfCurve() = default;
  CcdfCurve(std::vector<double> papr_samples_db, std::string fingerprint)
      : sorted_(std::move(papr_samples_db)), fingerprint_(std::move(fingerprint)) {
    std::sort(sorted_.begin(), sorted_.end());
    const double n = static_cast<double>(sorted_.size());
    for (std::size_t i = 0; i < sorted_.size(); ++i) {
      if (i + 1 < sorted_.size() && sorted_[i + 1] == sorted_[i]) continue;
      thresholds_db_.push_back(sorted_[i]);
      probabilities_.push_back(static_cast<double>(sorted_.size() - i - 1) / n);
    }
  }

  const std::vector<double>& thresholds_db() const { return thresholds_db_; }
  const std::vector<double>& probabilities() const { return probabilities_; }
  const std::vector<double>& samples_db() const { return sorted_; }
  std::size_t n_frames() const { return sorted_.size(); }
  const std::string& fingerprint() const { return fingerprint_; }
  double max_db() const { return sorted_.empty() ? -INFINITY : sorted_.back(); }

  /// Pr{PAPR > threshold_db}.
  double exceedance(double threshold_db) const {
    if (sorted_.empty()) return 0.0;
    const auto above = sorted_.end() - std::upper_bound(sorted_.begin(), sorted_.end(), threshold_db);
    return static_cast<double>(above) / static_cast<double>(sorted_.size());
  }

  /// Smallest sampled PAPR x with Pr{PAPR > x} <= probability.
  double papr_at(double probability) const {
    if (sorted_.empty()) throw DomainError("empty CCDF");
    for (std::size_t i = 0; i < thresholds_db_.size(); ++i) {
      if (probabilities_[i] <= probability) return thresholds_db_[i];
    }
    return sorted_.back();
  }

 private:
  std::vector<double> sorted_;
  std::vector<double> thresholds_db_;
  std::vector<double> probabilities_;
  std::string fingerprint_;
};

struct CcdfRequest {
  GridConfig grid{128, 32, 4};
  Scheme scheme = Scheme::interleaved;
  PulseSpec pulse = PulseSpec::rect();
  bool spreading = true;
  int qam_order = 16;
  int n_frames = 10000;
  std::uint64_t seed = 1;
  int user = 0;
  int cp_len = 0;
  PaprNormalization normalization = PaprNormalization::expected;
  bool include_cp = false;
  int threads = 0;

  std::string fingerprint() const {
    char buf[256];
    std::snprintf(buf, sizeof buf,
                  "M=%d N=%d Q=%d scheme=%s spreading=%d qam=%d pulse=%s beta=%g span=%d L=%d "
                  "cp=%d user=%d frames=%d seed=%llu norm=%s",
                  grid.M(), grid.N(), grid.Q(), to_string(scheme).c_str(), spreading ? 1 : 0,
                  qam_order, to_string(pulse.kind).c_str(), pulse.beta, pulse.span,
                  pulse.oversample, cp_len, user, n_frames,
                  static_cast<unsigned long long>(seed), to_string(normalization).c_str());
    return buf;
  }
};

/// Per-frame PAPR samples in frame order. Frame f draws its symbols from
/// derive_seed(seed, f), so the result is independent of the thread count.
inline std::vector<double> simulate_papr(const CcdfRequest& req) {
  req.pulse.validate();
  const QamConstellation qam(req.qam_order);
  const AllocationPlan plan(req.scheme, req.user, req.grid);
  const PulseTaps taps = pulse_taps(req.pulse);
  const double reference = 1.0 / req.grid.Q();
  std::vector<double> out(static_cast<std::size_t>(std::max(req.n_frames, 0)));
  parallel_for(out.size(), req.threads, [&](std::size_t f) {
    std::mt19937_64 rng(derive_seed(req.seed, f));
    const auto frame = draw_user_frame(plan, qam, rng);
    const auto wf = transmit_waveform(frame, req.spreading, req.pulse, taps, req.cp_len);
    out[f] = req.normalization == PaprNormalization::expected
                 ? papr_db(wf, reference, req.include_cp)
                 : papr_db(wf, req.include_cp);
  });
  return out;
}

inline CcdfCurve ccdf_estimate(const CcdfRequest& req) {
  if (req.n_frames < 100) throw DomainError("CCDF estimation needs at least 100 frames");
  return CcdfCurve(simulate_papr(req), req.fingerprint());
}

struct BoundQuery {
  Scheme scheme = Scheme::interleaved;
  PulseSpec pulse = PulseSpec::rect();
  int qam_order = 16;
  int K = 8;
};

struct BoundValue {
  double db = 0.0;
  double linear = 0.0;
  double g0 = 1.0;
};

/// Worst-case PAPR: peak QAM power, times K for block allocation, times g0^2
/// for a pulse whose shifted copies overlap.
inline BoundValue papr_upper_bound(const BoundQuery& q) {
  if (q.K < 1) throw DomainError("spreading size K must be >= 1");
  double g0 = 1.0;
  switch (q.pulse.kind) {
    case PulseKind::rect:
      break;
    case PulseKind::rrc:
      q.pulse.validate();
      g0 = g0_for(q.pulse);
      break;
    default:
      throw DomainError("unsupported pulse kind");
  }
  double linear = max_symbol_power(q.qam_order) * g0 * g0;
  if (q.scheme == Scheme::block) linear *= q.K;
  return {to_db(linear), linear, g0};
}

struct RolloffRequest {
  GridConfig grid{128, 32, 4};
  Scheme scheme = Scheme::interleaved;
  int qam_order = 4;
  std::vector<double> betas;
  int n_frames = 1000;
  std::uint64_t seed = 1;
  int span = 10;
  int oversample = 16;
  int threads = 0;
};

struct RolloffPoint {
  double beta = 0.0;
  double simulated_max_db = 0.0;
  double bound_db = 0.0;
  double g0 = 0.0;
};

/// Max simulated PAPR and the bound for each roll-off. Every roll-off shapes
/// the same delay-time frames, so the curves differ only through the pulse.
inline std::vector<RolloffPoint> rolloff_sweep(const RolloffRequest& req) {
  for (double b : req.betas) {
    if (!(b > 0.0 && b <= 1.0)) throw DomainError("roll-off sweep values must lie in (0, 1]");
  }
  const QamConstellation qam(req.qam_order);
  const AllocationPlan plan(req.scheme, 0, req.grid);
  const double reference = 1.0 / req.grid.Q();
  const std::size_t nb = req.betas.size();
  std::vector<PulseSpec> specs;
  std::vector<PulseTaps> taps;
  for (double b : req.betas) {
    specs.push_back(PulseSpec::rrc(b, req.span, req.oversample));
    taps.push_back(pulse_taps(specs.back()));
  }
  const auto n = static_cast<std::size_t>(req.n_frames);
  std::vector<double> per_frame(n * nb);
  parallel_for(n, req.threads, [&](std::size_t f) {
    std::mt19937_64 rng(derive_seed(req.seed, f));
    const auto frame = draw_user_frame(plan, qam, rng);
    const auto serial = serialize_with_cp(modulate_user(frame, true), 0);
    for (std::size_t b = 0; b < nb; ++b) {
      per_frame[f * nb + b] = papr_db(shape_waveform(serial, specs[b], taps[b]), reference);
    }
  });
  std::vector<RolloffPoint> out;
  for (std::size_t b = 0; b < nb; ++b) {
    double mx = -INFINITY;
    for (std::size_t f = 0; f < n; ++f) mx = std::max(mx, per_frame[f * nb + b]);
    const auto bound = papr_upper_bound({req.scheme, specs[b], req.qam_order, req.grid.K()});
    out.push_back({req.betas[b], mx, bound.db, bound.g0});
  }
  return out;
}

struct KSweepRequest {
  int M = 128;
  int N = 32;
  std::vector<int> Ks;
  Scheme scheme = Scheme::interleaved;
  PulseSpec pulse = PulseSpec::rect();
  int qam_order = 16;
  int n_frames = 10000;
  std::uint64_t seed = 1;
  double delta_tau = 1.0 / 7.68e6;
  PaprNormalization normalization = PaprNormalization::expected;
  int threads = 0;
};

struct KSweepPoint {
  int K = 0;
  CcdfCurve curve;
};

inline std::vector<KSweepPoint> k_sweep(const KSweepRequest& req) {
  std::vector<KSweepPoint> out;
  for (int K : req.Ks) {
    if (K < 1 || req.N % K != 0) {
      throw DomainError("K=" + std::to_string(K) + " does not divide N=" + std::to_string(req.N));
    }
    CcdfRequest c;
    c.grid = GridConfig(req.M, req.N, req.N / K, req.delta_tau);
    c.scheme = req.scheme;
    c.pulse = req.pulse;
    c.qam_order = req.qam_order;
    c.n_frames = req.n_frames;
    c.seed = req.seed;
    c.normalization = req.normalization;
    c.threads = req.threads;
    out.push_back({K, ccdf_estimate(c)});
  }
  return out;
}

}  // namespace dfts_otfs
