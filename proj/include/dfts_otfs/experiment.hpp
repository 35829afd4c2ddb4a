#pragma once

// Experiment drivers behind the command-line tool. Each run_* returns the
// CSV text; the first lines are `#` comments echoing the resolved settings so
// a result file is enough to regenerate it.

#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "dfts_otfs/config.hpp"

namespace dfts_otfs {

struct RunResult {
  std::string csv;
  std::string summary;  ///< human-readable, for stderr
};

namespace detail {

inline std::string csv_header(const ResolvedConfig& cfg, const char* command) {
  std::string out = std::string("# dfts-otfs ") + command + "\n";
  for (const auto& [k, v] : cfg.echo()) out += "# " + k + " = " + v + "\n";
  return out;
}

inline std::string fmt(const char* spec, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, spec, v);
  return buf;
}

}  // namespace detail

inline CcdfRequest ccdf_request(const ResolvedConfig& cfg) {
  CcdfRequest req;
  req.grid = cfg.grid();
  req.scheme = cfg.scheme;
  req.pulse = cfg.pulse;
  req.spreading = cfg.spreading;
  req.qam_order = cfg.qam_order;
  req.n_frames = cfg.frames;
  req.seed = cfg.seed;
  req.user = cfg.user;
  req.cp_len = cfg.cp_len;
  req.normalization = cfg.normalization;
  req.include_cp = cfg.include_cp;
  req.threads = cfg.threads;
  return req;
}

/// CSV `papr_db,ccdf`, ascending in papr_db.
inline RunResult run_ccdf(const ResolvedConfig& cfg) {
  const auto curve = ccdf_estimate(ccdf_request(cfg));
  std::string csv = detail::csv_header(cfg, "ccdf");
  csv += "papr_db,ccdf\n";
  const auto& th = curve.thresholds_db();
  const auto& pr = curve.probabilities();
  for (std::size_t i = 0; i < th.size(); ++i) {
    csv += detail::fmt("%.6f", th[i]) + "," + detail::fmt("%.8g", pr[i]) + "\n";
  }
  const auto bound =
      papr_upper_bound({cfg.scheme, cfg.pulse, cfg.qam_order, cfg.grid().K()});
  std::ostringstream s;
  s << "frames=" << curve.n_frames() << " max_papr_db=" << detail::fmt("%.4f", curve.max_db())
    << " papr_at_1e-2_db=" << detail::fmt("%.4f", curve.papr_at(1e-2))
    << " analytic_bound_db=" << detail::fmt("%.4f", bound.db);
  if (!cfg.spreading) s << " (bound applies to DFT-spread transmission only)";
  s << "\n";
  return {std::move(csv), s.str()};
}

/// CSV `scheme,pulse,beta,M,K,g0,bound_db` for both schemes, the rect pulse
/// and an RRC pulse per configured roll-off. M is the QAM order.
inline RunResult run_bounds(const ResolvedConfig& cfg) {
  std::string csv = detail::csv_header(cfg, "bounds");
  csv += "scheme,pulse,beta,M,K,g0,bound_db\n";
  const int K = cfg.grid().K();
  for (Scheme scheme : {Scheme::interleaved, Scheme::block}) {
    std::vector<PulseSpec> pulses{PulseSpec::rect()};
    for (double b : cfg.betas) pulses.push_back(PulseSpec::rrc(b, cfg.pulse.span, cfg.pulse.oversample));
    for (const auto& p : pulses) {
      const auto bound = papr_upper_bound({scheme, p, cfg.qam_order, K});
      csv += to_string(scheme) + "," + to_string(p.kind) + "," +
             (p.kind == PulseKind::rect ? std::string() : detail::fmt("%.4g", p.beta)) + "," +
             std::to_string(cfg.qam_order) + "," + std::to_string(K) + "," +
             detail::fmt("%.6f", bound.g0) + "," + detail::fmt("%.4f", bound.db) + "\n";
    }
  }
  return {std::move(csv), {}};
}

inline BerRequest ber_request(const ResolvedConfig& cfg) {
  BerRequest req;
  req.grid = cfg.grid();
  req.scheme = cfg.scheme;
  req.spreading = cfg.spreading;
  req.pulse = cfg.pulse;
  req.qam_order = cfg.qam_order;
  req.snr_db = cfg.snr_db;
  req.n_frames = cfg.frames;
  req.seed = cfg.seed;
  req.profile = cfg.profile();
  req.carrier_hz = cfg.carrier_hz;
  req.velocity_mps = cfg.velocity_kmh / 3.6;
  req.cp_len = cfg.cp_len;
  req.threads = cfg.threads;
  return req;
}

/// CSV `snr_db,ber,n_bits`.
inline RunResult run_ber(const ResolvedConfig& cfg) {
  const auto points = ber_simulate(ber_request(cfg));
  std::string csv = detail::csv_header(cfg, "ber");
  csv += "snr_db,ber,n_bits\n";
  for (const auto& p : points) {
    csv += detail::format_double(p.snr_db) + "," + detail::fmt("%.8g", p.ber) + "," +
           std::to_string(p.n_bits) + "\n";
  }
  std::string summary;
  if (const auto at = snr_at_ber(points, 1e-2)) {
    summary = "snr_at_ber_1e-2_db=" + detail::fmt("%.3f", *at) + "\n";
  }
  return {std::move(csv), summary};
}

/// CSV `beta,span,g0_numeric,argmax,g0_analytic,analytic_peak,rel_diff`.
inline RunResult run_g0(const ResolvedConfig& cfg) {
  std::string csv = detail::csv_header(cfg, "g0");
  csv += "beta,span,g0_numeric,argmax,g0_analytic,analytic_peak,rel_diff\n";
  for (double b : cfg.betas) {
    const auto num = g0_numeric(b, cfg.pulse.span, cfg.g0_grid_points);
    const auto ana = g0_analytic(b, cfg.pulse.span);
    csv += detail::fmt("%.4g", b) + "," + std::to_string(cfg.pulse.span) + "," +
           detail::fmt("%.8f", num.value) + "," + detail::fmt("%.6f", num.argmax) + "," +
           detail::fmt("%.8f", ana.value) + "," + detail::fmt("%.1f", ana.peak_time) + "," +
           detail::fmt("%.3e", std::abs(ana.value - num.value) / num.value) + "\n";
  }
  return {std::move(csv), {}};
}

struct SelftestOptions {
  /// Negative control: transmit with an unnormalized Doppler IDFT.
  bool corrupt_dft_normalization = false;
};

struct SelftestCheck {
  std::string name;
  bool passed = false;
  std::string detail;
};

namespace detail {

inline double max_abs_diff(const CMatrix& a, const CMatrix& b) {
  return (a - b).cwiseAbs().maxCoeff();
}

/// Direct O(N^2) evaluation of spreading, mapping and the Doppler IDFT.
inline CMatrix naive_delay_time(const UserFrame& frame) {
  const auto& plan = frame.plan;
  const auto& g = plan.grid();
  const int K = g.K();
  const int N = g.N();
  CMatrix spread = CMatrix::Zero(g.M(), K);
  for (int m = 0; m < g.M(); ++m)
    for (int np = 0; np < K; ++np)
      for (int k = 0; k < K; ++k)
        spread(m, np) += frame.symbols(m, k) * std::polar(1.0, -2.0 * kPi * k * np / K);
  spread /= std::sqrt(double(K));
  CMatrix out = CMatrix::Zero(g.M(), N);
  for (int m = 0; m < g.M(); ++m)
    for (int l = 0; l < N; ++l)
      for (int k = 0; k < K; ++k)
        out(m, l) += spread(m, k) * std::polar(1.0, 2.0 * kPi * plan.bin(k) * l / N);
  return out / std::sqrt(double(N));
}

}  // namespace detail

/// Fast invariant suite. Every check runs; the result lists each outcome.
inline std::vector<SelftestCheck> run_selftest(const SelftestOptions& opt = {}) {
  using detail::fmt;
  using detail::max_abs_diff;
  using detail::naive_delay_time;
  std::vector<SelftestCheck> checks;
  const auto record = [&](std::string name, bool ok, std::string detail) {
    checks.push_back({std::move(name), ok, std::move(detail)});
  };
  const auto guarded = [&](const std::string& name, auto&& body) {
    try {
      body();
    } catch (const std::exception& e) {
      record(name, false, std::string("exception: ") + e.what());
    }
  };
  std::mt19937_64 rng(20240901);

  guarded("qam_round_trip", [&] {
    bool ok = true;
    for (int order : {4, 16, 64}) {
      const QamConstellation qam(order);
      Bits bits(static_cast<std::size_t>(qam.bits_per_symbol()) * 1000);
      for (auto& b : bits) b = static_cast<std::uint8_t>(rng() & 1u);
      ok = ok && qam_demodulate(qam_modulate(bits, qam), qam) == bits;
    }
    record("qam_round_trip", ok, "4/16/64-QAM, 1000 symbols each");
  });

  guarded("qam_peak_power", [&] {
    double worst = 0.0;
    for (int order : {4, 16, 64, 256}) {
      const QamConstellation qam(order);
      double mx = 0.0, mean = 0.0;
      for (const auto& p : qam.points()) {
        mx = std::max(mx, std::norm(p));
        mean += std::norm(p) / order;
      }
      worst = std::max({worst, std::abs(mx - max_symbol_power(order)), std::abs(mean - 1.0)});
    }
    record("qam_peak_power", worst < 1e-12, "max deviation " + fmt("%.3e", worst));
  });

  const auto norm = opt.corrupt_dft_normalization ? Normalization::none : Normalization::unitary;
  guarded("parseval", [&] {
    const GridConfig grid(16, 8, 2);
    const QamConstellation qam(16);
    double worst = 0.0;
    for (Scheme s : {Scheme::interleaved, Scheme::block}) {
      for (int q = 0; q < grid.Q(); ++q) {
        const auto frame = draw_user_frame(AllocationPlan(s, q, grid), qam, rng);
        const double e_in = frame.symbols.squaredNorm();
        const double e_out = modulate_user(frame, true, norm).samples.squaredNorm();
        worst = std::max(worst, std::abs(e_out - e_in) / e_in);
      }
    }
    record("parseval", worst < 1e-10, "max relative energy error " + fmt("%.3e", worst));
  });

  guarded("transform_vs_direct_sum", [&] {
    const QamConstellation qam(16);
    double worst = 0.0;
    for (int M : {1, 2})
      for (int N : {2, 4})
        for (int Q : {1, 2})
          for (Scheme s : {Scheme::interleaved, Scheme::block})
            for (int q = 0; q < Q; ++q) {
              const auto frame = draw_user_frame(AllocationPlan(s, q, GridConfig(M, N, Q)), qam, rng);
              worst = std::max(worst, max_abs_diff(modulate_user(frame, true).samples,
                                                   naive_delay_time(frame)));
            }
    record("transform_vs_direct_sum", worst < 1e-10, "max abs error " + fmt("%.3e", worst));
  });

  guarded("interleaved_closed_form", [&] {
    const GridConfig grid(16, 32, 4);
    const QamConstellation qam(16);
    double worst = 0.0;
    for (int q = 0; q < grid.Q(); ++q) {
      const auto frame = draw_user_frame(AllocationPlan(Scheme::interleaved, q, grid), qam, rng);
      worst = std::max(worst, max_abs_diff(interleaved_fast_path(frame).samples,
                                           modulate_user(frame, true).samples));
    }
    record("interleaved_closed_form", worst < 1e-10, "max abs error " + fmt("%.3e", worst));
  });

  guarded("block_closed_form", [&] {
    const GridConfig grid(8, 32, 4);
    const QamConstellation qam(16);
    double worst = 0.0;
    for (int q = 0; q < grid.Q(); ++q) {
      const AllocationPlan plan(Scheme::block, q, grid);
      const auto frame = draw_user_frame(plan, qam, rng);
      const auto dt = modulate_user(frame, true).samples;
      for (int m = 0; m < grid.M(); ++m)
        for (int k = 0; k < grid.K(); ++k) {
          const int l = grid.Q() * k;
          const Complex expect = frame.symbols(m, k) / std::sqrt(double(grid.Q())) *
                                 std::polar(1.0, 2.0 * kPi * plan.first_bin() * l / grid.N());
          worst = std::max(worst, std::abs(dt(m, l) - expect));
        }
    }
    record("block_closed_form", worst < 1e-10, "max abs error " + fmt("%.3e", worst));
  });

  guarded("g0_analytic_vs_numeric", [&] {
    bool ok = true;
    std::string detail;
    for (double b : {0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9}) {
      const double num = g0_numeric(b, 10).value;
      const double ana = g0_analytic(b, 10).value;
      const double rel = std::abs(ana - num) / num;
      if (rel > 1e-3) {
        ok = false;
        detail += "beta=" + fmt("%.1f", b) + " numeric=" + fmt("%.6f", num) +
                  " analytic=" + fmt("%.6f", ana) + "; ";
      }
    }
    record("g0_analytic_vs_numeric", ok, ok ? "beta 0.1..0.9 within 1e-3" : detail);
  });

  guarded("bound_dominance", [&] {
    bool ok = true;
    double worst_margin = INFINITY;
    int frames = 0;
    for (Scheme s : {Scheme::interleaved, Scheme::block}) {
      for (const auto& pulse : {PulseSpec::rect(), PulseSpec::rrc(0.5)}) {
        CcdfRequest req;
        req.scheme = s;
        req.pulse = pulse;
        req.n_frames = pulse.kind == PulseKind::rect ? 400 : 100;
        req.seed = 7;
        req.threads = 1;
        const auto bound = papr_upper_bound({s, pulse, req.qam_order, req.grid.K()}).db;
        for (double p : simulate_papr(req)) {
          worst_margin = std::min(worst_margin, bound + 0.01 - p);
          ok = ok && p <= bound + 0.01;
        }
        frames += req.n_frames;
      }
    }
    record("bound_dominance", ok,
           std::to_string(frames) + " frames, smallest margin " + fmt("%.4f", worst_margin) + " dB");
  });

  guarded("effective_channel_model", [&] {
    const GridConfig grid(8, 4, 2, 1.0 / 7.68e6);
    const auto pulse = PulseSpec::rrc(0.5, 6, 4);
    const auto plans = all_user_plans(Scheme::interleaved, grid);
    const int cp = default_cp_len(eva_profile(), grid.delta_tau());
    std::vector<ChannelRealization> chans;
    for (int q = 0; q < grid.Q(); ++q) chans.push_back(sample_eva_channel(4e9, 500 / 3.6, 11 + q));
    const auto eff = build_effective_channel(grid, plans, pulse, chans, cp);
    const QamConstellation qam(4);
    const auto taps = pulse_taps(pulse);
    CMatrix tx_grid = CMatrix::Zero(grid.M(), grid.N());
    Waveform rx;
    for (int q = 0; q < grid.Q(); ++q) {
      const auto frame = draw_user_frame(plans[q], qam, rng);
      tx_grid += mapped_grid(frame, true);
      const auto part = propagate(transmit_waveform(frame, true, pulse, taps, cp), chans[q]);
      if (q == 0) {
        rx = part;
      } else {
        if (part.samples.size() > rx.samples.size()) rx.samples.resize(part.samples.size());
        for (std::size_t i = 0; i < part.samples.size(); ++i) rx.samples[i] += part.samples[i];
      }
    }
    const CVector direct = vectorize(receive_frontend(rx, grid, pulse, taps));
    const CVector model = eff.h * vectorize(tx_grid);
    const double rel = (direct - model).norm() / model.norm();
    record("effective_channel_model", rel < 1e-8, "relative mismatch " + fmt("%.3e", rel));
  });

  guarded("noiseless_loopback", [&] {
    BerRequest req;
    req.grid = GridConfig(8, 8, 2);
    req.profile = identity_profile();
    req.velocity_mps = 0.0;
    req.snr_db = {INFINITY};
    req.n_frames = 2;
    req.threads = 1;
    bool ok = true;
    for (Scheme s : {Scheme::interleaved, Scheme::block})
      for (const auto& pulse : {PulseSpec::rect(), PulseSpec::rrc(0.5, 10, 4)}) {
        req.scheme = s;
        req.pulse = pulse;
        ok = ok && ber_simulate(req).front().n_errors == 0;
      }
    record("noiseless_loopback", ok, "identity channel, both schemes and pulses");
  });

  return checks;
}

}  // namespace dfts_otfs
