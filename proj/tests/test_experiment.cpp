#include <gtest/gtest.h>

#include <sstream>

#include "dfts_otfs/experiment.hpp"

using namespace dfts_otfs;

namespace {

std::vector<std::string> lines(const std::string& s) {
  std::vector<std::string> out;
  std::istringstream in(s);
  for (std::string l; std::getline(in, l);) out.push_back(l);
  return out;
}

std::string expect_config_error(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const ConfigError& e) {
    return e.what();
  }
  ADD_FAILURE() << "no ConfigError";
  return {};
}

}  // namespace

TEST(Config, ParseSectionsCommentsAndDefaults) {
  const auto cfg = ExperimentConfig::parse(
      "scheme = block  # trailing comment\n"
      "qam.order = 4\n"
      "\n"
      "[grid]\n"
      "M = 16\n"
      "N = 8\n"
      "Q = 2\n"
      "[montecarlo]\n"
      "frames = 150\n");
  const auto r = resolve(cfg, Command::ccdf);
  EXPECT_EQ(r.M, 16);
  EXPECT_EQ(r.N, 8);
  EXPECT_EQ(r.Q, 2);
  EXPECT_EQ(r.scheme, Scheme::block);
  EXPECT_EQ(r.qam_order, 4);
  EXPECT_EQ(r.frames, 150);
  EXPECT_EQ(r.pulse.kind, PulseKind::rect);
  EXPECT_EQ(r.pulse.oversample, 1);
  EXPECT_EQ(r.cp_len, 0);
  EXPECT_EQ(r.normalization, PaprNormalization::expected);
}

TEST(Config, CommandDependentDefaults) {
  const ExperimentConfig empty;
  const auto ccdf = resolve(empty, Command::ccdf);
  EXPECT_EQ(ccdf.M, 128);
  EXPECT_EQ(ccdf.N, 32);
  EXPECT_EQ(ccdf.frames, 10000);
  const auto ber = resolve(empty, Command::ber);
  EXPECT_EQ(ber.M, 32);
  EXPECT_EQ(ber.N, 16);
  EXPECT_EQ(ber.pulse.kind, PulseKind::rrc);
  EXPECT_EQ(ber.pulse.oversample, 4);
  EXPECT_EQ(ber.cp_len, default_cp_len(eva_profile(), ber.delta_tau));
  ASSERT_FALSE(ber.snr_db.empty());
  EXPECT_EQ(ber.snr_db.front(), 0.0);
  EXPECT_EQ(ber.snr_db.back(), 30.0);

  ExperimentConfig rrc;
  rrc.set("pulse.kind", "rrc");
  EXPECT_EQ(resolve(rrc, Command::ccdf).pulse.oversample, 16);
}

TEST(Config, ListSyntax) {
  ExperimentConfig c;
  c.set("snr_db", "0:5:20");
  EXPECT_EQ(resolve(c, Command::ber).snr_db, (std::vector<double>{0, 5, 10, 15, 20}));
  c.set("snr_db", "3, 7.5, inf");
  const auto v = resolve(c, Command::ber).snr_db;
  ASSERT_EQ(v.size(), 3u);
  EXPECT_EQ(v[1], 7.5);
  EXPECT_TRUE(std::isinf(v[2]));
  c.set("sweep.betas", "0.25,0.75");
  EXPECT_EQ(resolve(c, Command::bounds).betas, (std::vector<double>{0.25, 0.75}));
}

TEST(Config, ErrorsNameTheKey) {
  EXPECT_NE(expect_config_error([] { ExperimentConfig().set("bogus", "1"); }).find("bogus"),
            std::string::npos);
  EXPECT_NE(expect_config_error([] { ExperimentConfig::parse("[grid]\nP = 3\n"); }).find("grid.P"),
            std::string::npos);
  EXPECT_NE(expect_config_error([] { ExperimentConfig::parse("scheme = block\nscheme = block\n"); })
                .find("scheme"),
            std::string::npos);
  EXPECT_NE(expect_config_error([] { ExperimentConfig::parse("no equals sign\n"); }).find("line 1"),
            std::string::npos);
  for (const auto& [key, value] : std::vector<std::pair<std::string, std::string>>{
           {"grid.M", "abc"},
           {"grid.Q", "3"},
           {"scheme", "diagonal"},
           {"qam.order", "8"},
           {"pulse.kind", "gaussian"},
           {"pulse.beta", "1.5"},
           {"spreading", "maybe"},
           {"montecarlo.frames", "-1"},
           {"papr.normalization", "peak"},
           {"papr.user", "9"},
       }) {
    ExperimentConfig c;
    c.set(key, value);
    const auto msg = expect_config_error([&] { resolve(c, Command::ccdf); });
    EXPECT_NE(msg.find(key), std::string::npos) << key << ": " << msg;
  }
}

TEST(Config, CpTooShortForProfileIsConfigError) {
  ExperimentConfig c;
  c.set("cp_len", "3");
  EXPECT_THROW(
      {
        auto r = resolve(c, Command::ber);
        r.frames = 1;
        r.snr_db = {10};
        run_ber(r);
      },
      ConfigError);
}

TEST(Config, MissingProfileFileNamesPath) {
  ExperimentConfig c;
  c.set("channel.profile", "/no/such/profile.txt");
  try {
    auto r = resolve(c, Command::ber);
    r.frames = 1;
    run_ber(r);
    FAIL();
  } catch (const FileError& e) {
    EXPECT_NE(std::string(e.what()).find("/no/such/profile.txt"), std::string::npos);
  }
}

TEST(Runner, CcdfCsvShapeAndDeterminism) {
  ExperimentConfig c;
  c.set("grid.M", "32");
  c.set("grid.N", "16");
  c.set("montecarlo.frames", "200");
  c.set("montecarlo.seed", "5");
  auto r = resolve(c, Command::ccdf);
  const auto a = run_ccdf(r);
  r.threads = 3;  // execution-only: must not change the bytes
  EXPECT_EQ(run_ccdf(r).csv, a.csv);

  const auto ls = lines(a.csv);
  ASSERT_GT(ls.size(), 3u);
  EXPECT_EQ(ls[0], "# dfts-otfs ccdf");
  EXPECT_NE(a.csv.find("# montecarlo.seed = 5\n"), std::string::npos);
  EXPECT_EQ(a.csv.find("threads"), std::string::npos);
  std::size_t i = 0;
  while (ls[i][0] == '#') ++i;
  EXPECT_EQ(ls[i], "papr_db,ccdf");
  double prev_x = -INFINITY, prev_p = 2.0;
  for (++i; i < ls.size(); ++i) {
    const auto comma = ls[i].find(',');
    const double x = std::stod(ls[i].substr(0, comma));
    const double p = std::stod(ls[i].substr(comma + 1));
    EXPECT_GT(x, prev_x);
    EXPECT_LE(p, prev_p);
    EXPECT_LE(x, 10 * std::log10(1.8) + 1e-6);
    prev_x = x;
    prev_p = p;
  }
  EXPECT_NE(a.summary.find("analytic_bound_db=2.5527"), std::string::npos);
}

TEST(Runner, CcdfSingleUser) {
  ExperimentConfig c;
  c.set("grid.M", "16");
  c.set("grid.N", "4");
  c.set("grid.Q", "1");
  c.set("montecarlo.frames", "100");
  EXPECT_NO_THROW(run_ccdf(resolve(c, Command::ccdf)));
}

TEST(Runner, BoundsTable) {
  ExperimentConfig c;
  c.set("sweep.betas", "0.5");
  const auto csv = run_bounds(resolve(c, Command::bounds)).csv;
  EXPECT_NE(csv.find("scheme,pulse,beta,M,K,g0,bound_db\n"), std::string::npos);
  EXPECT_NE(csv.find("interleaved,rect,,16,8,1.000000,2.5527\n"), std::string::npos);
  EXPECT_NE(csv.find("block,rect,,16,8,1.000000,11.5836\n"), std::string::npos);
  EXPECT_NE(csv.find("interleaved,rrc,0.5,16,8,1.479042,5.9523\n"), std::string::npos);
  EXPECT_NE(csv.find("block,rrc,0.5,16,8,1.479042,14.9832\n"), std::string::npos);
}

TEST(Runner, G0Table) {
  ExperimentConfig c;
  c.set("sweep.betas", "0.3,0.7");
  const auto csv = run_g0(resolve(c, Command::g0)).csv;
  EXPECT_NE(csv.find("beta,span,g0_numeric,argmax,g0_analytic,analytic_peak,rel_diff\n"),
            std::string::npos);
  EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n') - std::count(csv.begin(), csv.end(), '#'), 3);
}

TEST(Runner, BerSmokeIsErrorFree) {
  ExperimentConfig c;
  c.set("grid.M", "16");
  c.set("grid.N", "8");
  c.set("grid.Q", "2");
  c.set("channel.profile", "identity");
  c.set("channel.velocity_kmh", "0");
  c.set("montecarlo.frames", "2");
  c.set("snr_db", "20,inf");
  const auto a = run_ber(resolve(c, Command::ber));
  EXPECT_NE(a.csv.find("snr_db,ber,n_bits\n20,0,"), std::string::npos);
  EXPECT_NE(a.csv.find("\ninf,0,"), std::string::npos);
  EXPECT_EQ(run_ber(resolve(c, Command::ber)).csv, a.csv);
}

TEST(Selftest, PassesAndNegativeControlTrips) {
  for (const auto& c : run_selftest()) EXPECT_TRUE(c.passed) << c.name << ": " << c.detail;
  bool parseval_failed = false;
  for (const auto& c : run_selftest({true}))
    if (c.name == "parseval") parseval_failed = !c.passed;
  EXPECT_TRUE(parseval_failed);
}
