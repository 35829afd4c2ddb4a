#pragma once

// Doubly dispersive tapped-delay-line channel, receive front end (matched
// filter, CP removal, Doppler DFT), effective delay-Doppler channel matrix,
// MMSE equalization, despreading and Monte Carlo BER.

#include <fstream>
#include <istream>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "dfts_otfs/papr_analysis.hpp"

namespace dfts_otfs {

struct DelayProfileEntry {
  double delay_ns = 0.0;
  double power_db = 0.0;
};

struct DelayProfile {
  std::string name;
  std::vector<DelayProfileEntry> taps;
  /// Rayleigh tap gains when true; deterministic gains sqrt(power) otherwise.
  bool fading = true;

  double max_delay_s() const {
    double mx = 0.0;
    for (const auto& t : taps) mx = std::max(mx, t.delay_ns * 1e-9);
    return mx;
  }
};

/// Extended Vehicular A power-delay profile (3GPP TS 36.104, Annex B.2).
inline DelayProfile eva_profile() {
  return {"EVA",
          {{0, 0.0},
           {30, -1.5},
           {150, -1.4},
           {310, -3.6},
           {370, -0.6},
           {710, -9.1},
           {1090, -7.0},
           {1730, -12.0},
           {2510, -16.9}}};
}

/// Single non-fading unit tap; with zero velocity this is the identity channel.
inline DelayProfile identity_profile() { return {"identity", {{0, 0.0}}, false}; }

/// Reads `delay_ns power_db` lines. `#` starts a comment; blank lines are skipped.
inline DelayProfile parse_delay_profile(std::istream& in, std::string name) {
  DelayProfile profile{std::move(name), {}};
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    std::istringstream fields(line);
    DelayProfileEntry e;
    if (!(fields >> e.delay_ns)) {
      if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
      throw ConfigError("profile " + profile.name + " line " + std::to_string(line_no) +
                        ": expected `delay_ns power_db`");
    }
    std::string extra;
    if (!(fields >> e.power_db) || (fields >> extra)) {
      throw ConfigError("profile " + profile.name + " line " + std::to_string(line_no) +
                        ": expected `delay_ns power_db`");
    }
    if (e.delay_ns < 0.0) {
      throw ConfigError("profile " + profile.name + " line " + std::to_string(line_no) +
                        ": negative delay");
    }
    profile.taps.push_back(e);
  }
  if (profile.taps.empty()) throw ConfigError("profile " + profile.name + " has no taps");
  return profile;
}

inline DelayProfile load_delay_profile(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw FileError("cannot open channel profile file: " + path);
  return parse_delay_profile(in, path);
}

struct ChannelTap {
  double delay_s = 0.0;
  double power = 0.0;  ///< normalized linear tap variance
  double doppler_hz = 0.0;
  Complex gain{1.0, 0.0};
};

struct ChannelRealization {
  std::vector<ChannelTap> taps;
  double max_doppler_hz = 0.0;
  double carrier_hz = 0.0;
  std::uint64_t seed = 0;

  /// Largest tap delay on a grid of the given sample period (rounded).
  int max_delay_samples(double sample_period) const {
    int mx = 0;
    for (const auto& t : taps) mx = std::max(mx, delay_samples(t, sample_period));
    return mx;
  }

  static int delay_samples(const ChannelTap& t, double sample_period) {
    return static_cast<int>(std::lround(t.delay_s / sample_period));
  }
};

inline double max_doppler_hz(double carrier_hz, double velocity_mps) {
  return velocity_mps * carrier_hz / kSpeedOfLight;
}

/// Quasi-static realization: complex Gaussian tap gains with the profile's
/// normalized powers (fixed gains for a non-fading profile), each tap with a
/// fixed Doppler f_max*cos(theta), theta uniform on [0, 2pi).
inline ChannelRealization sample_channel(const DelayProfile& profile, double carrier_hz,
                                         double velocity_mps, std::uint64_t seed) {
  if (velocity_mps < 0.0) throw DomainError("velocity must be >= 0");
  if (profile.taps.empty()) throw DomainError("delay profile has no taps");
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_real_distribution<double> angle(0.0, 2.0 * kPi);
  ChannelRealization ch;
  ch.max_doppler_hz = max_doppler_hz(carrier_hz, velocity_mps);
  ch.carrier_hz = carrier_hz;
  ch.seed = seed;
  double total = 0.0;
  for (const auto& e : profile.taps) total += from_db(e.power_db);
  for (const auto& e : profile.taps) {
    ChannelTap tap;
    tap.delay_s = e.delay_ns * 1e-9;
    tap.power = from_db(e.power_db) / total;
    const double sigma = std::sqrt(tap.power / 2.0);
    const double re = normal(rng);
    const double im = normal(rng);
    tap.gain = profile.fading ? Complex(sigma * re, sigma * im) : Complex(std::sqrt(tap.power), 0.0);
    tap.doppler_hz = ch.max_doppler_hz * std::cos(angle(rng));
    ch.taps.push_back(tap);
  }
  return ch;
}

inline ChannelRealization sample_eva_channel(double carrier_hz, double velocity_mps,
                                             std::uint64_t seed) {
  return sample_channel(eva_profile(), carrier_hz, velocity_mps, seed);
}

/// Unit-gain, zero-delay, zero-Doppler channel.
inline ChannelRealization identity_channel() {
  ChannelRealization ch;
  ch.taps.push_back(ChannelTap{0.0, 1.0, 0.0, Complex(1.0, 0.0)});
  return ch;
}

/// y[n] = sum_p h_p e^{j2pi nu_p t_n} x[n - d_p], t_n measured from the
/// waveform's t = 0. The output is longer than the input by the largest
/// tap delay. Throws ConfigError when the CP does not cover the delay spread.
inline Waveform propagate(const Waveform& in, const ChannelRealization& ch) {
  const double ts = in.sample_period();
  const int max_delay = ch.max_delay_samples(ts);
  if (max_delay > in.cp_len * in.oversample) {
    throw ConfigError("cyclic prefix of " + std::to_string(in.cp_len) +
                      " samples is shorter than the channel delay spread (" +
                      std::to_string(max_delay) + " samples at rate " +
                      std::to_string(in.oversample) + "/delta_tau)");
  }
  Waveform out = in;
  const std::size_t n_in = in.samples.size();
  out.samples.assign(n_in + static_cast<std::size_t>(max_delay), Complex{});
  for (const auto& tap : ch.taps) {
    const auto d = static_cast<std::size_t>(ChannelRealization::delay_samples(tap, ts));
    const double w = 2.0 * kPi * tap.doppler_hz * ts;
    for (std::size_t k = 0; k < n_in; ++k) {
      const std::size_t n = k + d;
      const double phase = w * (static_cast<double>(n) - in.origin);
      out.samples[n] += tap.gain * std::polar(1.0, phase) * in.samples[k];
    }
  }
  return out;
}

/// Unit-variance circularly symmetric complex Gaussian samples.
inline std::vector<Complex> complex_gaussian(std::size_t n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, std::sqrt(0.5));
  std::vector<Complex> out(n);
  for (auto& s : out) {
    const double re = normal(rng);
    const double im = normal(rng);
    s = Complex(re, im);
  }
  return out;
}

/// Per-sample noise variance that puts the in-band (1/delta_tau wide) noise
/// power at signal_power / SNR. Oversampling spreads white noise over L times
/// the symbol bandwidth, hence the factor L.
inline double sample_noise_variance(double signal_power, double snr_db, int oversample) {
  return oversample * signal_power / from_db(snr_db);
}

/// Adds white Gaussian noise at snr_db relative to signal_power.
inline void add_awgn(Waveform& wf, double snr_db, double signal_power, std::uint64_t seed) {
  const double sigma = std::sqrt(sample_noise_variance(signal_power, snr_db, wf.oversample));
  const auto noise = complex_gaussian(wf.samples.size(), seed);
  for (std::size_t i = 0; i < noise.size(); ++i) wf.samples[i] += sigma * noise[i];
}

/// Channel plus noise. The SNR references the noiseless received power over
/// the frame window; std::nullopt means no noise.
inline Waveform apply_ltv_channel(const Waveform& in, const ChannelRealization& ch,
                                  std::optional<double> snr_db, std::uint64_t seed) {
  Waveform out = propagate(in, ch);
  if (snr_db) add_awgn(out, *snr_db, mean_power(out), seed);
  return out;
}

inline Waveform as_waveform(const SerialFrame& serial) {
  Waveform wf;
  wf.samples = serial.samples;
  wf.oversample = 1;
  wf.delta_tau = serial.grid.delta_tau();
  wf.cp_len = serial.cp_len;
  wf.body_len = serial.grid.size();
  return wf;
}

inline Waveform apply_ltv_channel(const SerialFrame& serial, const ChannelRealization& ch,
                                  std::optional<double> snr_db, std::uint64_t seed) {
  return apply_ltv_channel(as_waveform(serial), ch, snr_db, seed);
}

/// Matched filter g(-t), sampling at the body symbol instants, CP removal,
/// de-serialization and the unitary Doppler DFT. Returns the M x N
/// delay-Doppler grid. The matched filter is scaled by 1/L so a unit-energy
/// pulse passes a symbol with unit gain.
inline CMatrix receive_frontend(const Waveform& rx, const GridConfig& grid, const PulseSpec& pulse,
                                const PulseTaps& taps) {
  if (rx.body_len != grid.size()) throw ShapeError("received body length does not match M*N");
  if (rx.oversample != pulse.oversample) {
    throw ShapeError("received oversampling does not match the pulse");
  }
  const int L = rx.oversample;
  const auto n_samples = static_cast<long>(rx.samples.size());
  const double inv_l = 1.0 / L;
  std::vector<Complex> body(static_cast<std::size_t>(grid.size()));
  for (int i = 0; i < grid.size(); ++i) {
    const long centre = rx.origin + static_cast<long>(rx.cp_len + i) * L;
    Complex acc{};
    for (std::size_t k = 0; k < taps.taps.size(); ++k) {
      const long n = centre + taps.first + static_cast<long>(k);
      if (n < 0 || n >= n_samples) continue;
      acc += rx.samples[static_cast<std::size_t>(n)] * taps.taps[k];
    }
    body[static_cast<std::size_t>(i)] = acc * inv_l;
  }
  return dft_doppler(deserialize(body, grid).samples);
}

inline CMatrix receive_frontend(const Waveform& rx, const GridConfig& grid,
                                const PulseSpec& pulse) {
  return receive_frontend(rx, grid, pulse, pulse_taps(pulse));
}

/// Column-major vectorization: index m + n*M.
inline CVector vectorize(const CMatrix& grid) {
  return Eigen::Map<const CVector>(grid.data(), grid.size());
}

inline CMatrix unvectorize(const CVector& v, int rows, int cols) {
  if (v.size() != static_cast<Eigen::Index>(rows) * cols) throw ShapeError("vector size mismatch");
  return Eigen::Map<const CMatrix>(v.data(), rows, cols);
}

/// Linear map from transmitted delay-Doppler grid (after spreading and
/// mapping, vectorized) to the received delay-Doppler grid.
struct EffectiveChannel {
  CMatrix h;
  double noise_var = 0.0;
};

/// Column j = response to a unit impulse at delay-Doppler index j sent by the
/// user that owns its Doppler bin, through that user's channel. `channels`
/// holds one realization per plan, or a single one shared by all plans.
/// Bins owned by no plan give zero columns.
inline EffectiveChannel build_effective_channel(const GridConfig& grid,
                                                const std::vector<AllocationPlan>& plans,
                                                const PulseSpec& pulse,
                                                const std::vector<ChannelRealization>& channels,
                                                int cp_len, int threads = 1) {
  if (channels.empty() || (channels.size() != 1 && channels.size() != plans.size())) {
    throw ShapeError("need one channel per plan or a single shared channel");
  }
  const int M = grid.M();
  const int N = grid.N();
  std::vector<int> owner(static_cast<std::size_t>(N), -1);
  for (std::size_t p = 0; p < plans.size(); ++p) {
    for (int bin : plans[p].occupied_bins()) {
      if (owner[bin] >= 0) throw DomainError("allocation plans overlap");
      owner[bin] = static_cast<int>(p);
    }
  }
  const PulseTaps taps = pulse_taps(pulse);
  EffectiveChannel eff{CMatrix::Zero(grid.size(), grid.size()), 0.0};
  parallel_for(static_cast<std::size_t>(grid.size()), threads, [&](std::size_t j) {
    const int m = static_cast<int>(j) % M;
    const int n = static_cast<int>(j) / M;
    if (owner[n] < 0) return;
    const auto& ch = channels.size() == 1 ? channels[0] : channels[owner[n]];
    CMatrix impulse = CMatrix::Zero(M, N);
    impulse(m, n) = 1.0;
    const auto wf = shape_waveform(serialize_with_cp(idft_doppler(impulse, grid), cp_len), pulse,
                                   taps);
    eff.h.col(static_cast<Eigen::Index>(j)) =
        vectorize(receive_frontend(propagate(wf, ch), grid, pulse, taps));
  });
  return eff;
}

inline EffectiveChannel build_effective_channel(const GridConfig& grid, const AllocationPlan& plan,
                                                const PulseSpec& pulse,
                                                const ChannelRealization& channel, int cp_len) {
  return build_effective_channel(grid, std::vector<AllocationPlan>{plan}, pulse,
                                 std::vector<ChannelRealization>{channel}, cp_len);
}

/// Linear MMSE x = (H^H H + s2 I)^-1 H^H y. With s2 = 0 it solves H x = y
/// directly and rejects a numerically singular H.
class MmseEqualizer {
 public:
  explicit MmseEqualizer(CMatrix h) : h_(std::move(h)) {
    if (h_.rows() != h_.cols()) throw ShapeError("effective channel must be square");
  }

  CVector solve(const CVector& y, double noise_var) const {
    if (noise_var < 0.0) throw DomainError("noise variance must be >= 0");
    if (y.size() != h_.rows()) throw ShapeError("received vector size mismatch");
    if (noise_var == 0.0) {
      Eigen::PartialPivLU<CMatrix> lu(h_);
      // rcond() alone misses exact zero pivots, so check the pivot spread too.
      const auto pivots = lu.matrixLU().diagonal().cwiseAbs();
      if (!(pivots.minCoeff() > 1e-13 * pivots.maxCoeff()) || !(lu.rcond() > 1e-13)) {
        throw NumericalError("effective channel is singular; zero-forcing is undefined");
      }
      return lu.solve(y);
    }
    if (gram_.size() == 0) gram_.noalias() = h_.adjoint() * h_;
    CMatrix a = gram_;
    a.diagonal().array() += noise_var;
    Eigen::LLT<CMatrix> llt(a);
    if (llt.info() != Eigen::Success) throw NumericalError("MMSE system is not positive definite");
    return llt.solve(h_.adjoint() * y);
  }

  const CMatrix& matrix() const { return h_; }

 private:
  CMatrix h_;
  mutable CMatrix gram_;
};

inline CMatrix mmse_equalize(const CMatrix& rx_grid, const CMatrix& h, double noise_var) {
  MmseEqualizer eq(h);
  return unvectorize(eq.solve(vectorize(rx_grid), noise_var), static_cast<int>(rx_grid.rows()),
                     static_cast<int>(rx_grid.cols()));
}

/// One user's bits from an equalized M x N grid: pull the allocated
/// columns, undo the spreading DFT (if any), hard-decide.
inline Bits despread_and_detect(const CMatrix& equalized, const AllocationPlan& plan,
                                const QamConstellation& qam, bool spreading = true) {
  CMatrix user = extract_dodma(equalized, plan);
  if (spreading) user = dft_despread(user);
  const auto symbols = flatten_symbols(user);
  return qam_demodulate(symbols, qam);
}

/// Default CP: one sample beyond the largest channel delay on the symbol grid.
inline int default_cp_len(const DelayProfile& profile, double delta_tau) {
  return static_cast<int>(std::ceil(profile.max_delay_s() / delta_tau - 1e-9)) + 1;
}

struct BerRequest {
  GridConfig grid{32, 16, 4};
  Scheme scheme = Scheme::interleaved;
  bool spreading = true;
  PulseSpec pulse = PulseSpec::rrc(0.5, 10, 4);
  int qam_order = 16;
  std::vector<double> snr_db;  ///< +inf means noiseless
  int n_frames = 20;
  std::uint64_t seed = 1;
  DelayProfile profile = eva_profile();
  double carrier_hz = 4e9;
  double velocity_mps = 500.0 / 3.6;
  int cp_len = -1;  ///< negative: default_cp_len
  int threads = 0;
};

struct BerPoint {
  double snr_db = 0.0;
  double ber = 0.0;
  std::uint64_t n_bits = 0;
  std::uint64_t n_errors = 0;
};

/// Uplink BER with all Q users active. Each frame draws fresh data and an
/// independent channel per user; the receiver knows the effective channel
/// exactly. Frame f uses seeds derived from (seed, f) only, so runs that
/// differ in scheme or spreading see the same data bits, channels and noise.
inline std::vector<BerPoint> ber_simulate(const BerRequest& req) {
  if (req.n_frames < 1) throw DomainError("BER simulation needs at least one frame");
  req.pulse.validate();
  const auto& grid = req.grid;
  const QamConstellation qam(req.qam_order);
  const auto plans = all_user_plans(req.scheme, grid);
  const int cp_len = req.cp_len >= 0 ? req.cp_len : default_cp_len(req.profile, grid.delta_tau());
  const PulseTaps taps = pulse_taps(req.pulse);
  const std::size_t n_snr = req.snr_db.size();
  const auto n_frames = static_cast<std::size_t>(req.n_frames);
  std::vector<std::uint64_t> errors(n_frames * n_snr, 0);
  std::uint64_t bits_per_frame = 0;

  parallel_for(n_frames, req.threads, [&](std::size_t f) {
    std::vector<UserFrame> frames;
    std::vector<ChannelRealization> channels;
    Waveform rx;
    for (int q = 0; q < grid.Q(); ++q) {
      std::mt19937_64 data_rng(derive_seed(req.seed, f, 0, static_cast<std::uint64_t>(q)));
      frames.push_back(draw_user_frame(plans[q], qam, data_rng));
      channels.push_back(sample_channel(req.profile, req.carrier_hz, req.velocity_mps,
                                        derive_seed(req.seed, f, 1, static_cast<std::uint64_t>(q))));
      const auto tx = transmit_waveform(frames.back(), req.spreading, req.pulse, taps, cp_len);
      const auto part = propagate(tx, channels.back());
      if (q == 0) {
        rx = part;
      } else {
        if (part.samples.size() > rx.samples.size()) rx.samples.resize(part.samples.size());
        for (std::size_t i = 0; i < part.samples.size(); ++i) rx.samples[i] += part.samples[i];
      }
    }
    const double signal_power = mean_power(rx);
    const CVector y_clean = vectorize(receive_frontend(rx, grid, req.pulse, taps));
    Waveform noise = rx;
    noise.samples = complex_gaussian(rx.samples.size(), derive_seed(req.seed, f, 2));
    const CVector y_noise = vectorize(receive_frontend(noise, grid, req.pulse, taps));

    const MmseEqualizer eq(
        build_effective_channel(grid, plans, req.pulse, channels, cp_len, 1).h);
    for (std::size_t s = 0; s < n_snr; ++s) {
      const double snr = req.snr_db[s];
      CVector y = y_clean;
      double noise_var = 0.0;
      if (std::isfinite(snr)) {
        y += std::sqrt(sample_noise_variance(signal_power, snr, req.pulse.oversample)) * y_noise;
        noise_var = signal_power / from_db(snr);
      }
      const CMatrix est = unvectorize(eq.solve(y, noise_var), grid.M(), grid.N());
      std::uint64_t err = 0;
      for (int q = 0; q < grid.Q(); ++q) {
        const auto bits = despread_and_detect(est, plans[q], qam, req.spreading);
        for (std::size_t b = 0; b < bits.size(); ++b) err += bits[b] != frames[q].bits[b];
      }
      errors[f * n_snr + s] = err;
    }
  });

  bits_per_frame = static_cast<std::uint64_t>(grid.size()) * qam.bits_per_symbol();
  std::vector<BerPoint> out;
  for (std::size_t s = 0; s < n_snr; ++s) {
    BerPoint p;
    p.snr_db = req.snr_db[s];
    p.n_bits = bits_per_frame * n_frames;
    for (std::size_t f = 0; f < n_frames; ++f) p.n_errors += errors[f * n_snr + s];
    p.ber = static_cast<double>(p.n_errors) / static_cast<double>(p.n_bits);
    out.push_back(p);
  }
  return out;
}

/// SNR (dB) at which the BER curve crosses `target`, interpolating log10(BER)
/// linearly between bracketing points. Empty when the curve never crosses.
inline std::optional<double> snr_at_ber(const std::vector<BerPoint>& curve, double target) {
  for (std::size_t i = 0; i + 1 < curve.size(); ++i) {
    const auto& a = curve[i];
    const auto& b = curve[i + 1];
    if (a.ber >= target && b.ber < target) {
      if (b.ber <= 0.0) return b.snr_db;
      const double la = std::log10(a.ber);
      const double lb = std::log10(b.ber);
      const double lt = std::log10(target);
      return a.snr_db + (la - lt) / (la - lb) * (b.snr_db - a.snr_db);
    }
  }
  return std::nullopt;
}

}  // namespace dfts_otfs
