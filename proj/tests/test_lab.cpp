#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "oslab/lab/run.hpp"

using namespace oslab;
using namespace oslab::lab;

namespace {

const char* base_config = R"(
[experiment]
schema = oseledets-lab/1
kind = lyapunov
seed = 7

[flow]
matrix = 2 1 1 1
kappa = 0.05

[run]
lyapunov_horizon = 200
lyapunov_orbits = 3
)";

std::string field_of(const std::string& text, const std::string& kind = "") {
  try {
    parse_config(text, kind);
  } catch (const ConfigError& e) {
    return e.field();
  }
  return "";
}

std::filesystem::path scratch(const std::string& name) {
  auto p = std::filesystem::temp_directory_path() / ("oslab_test_" + name);
  std::filesystem::remove_all(p);
  return p;
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

}  // namespace

TEST(Config, ParsesValues) {
  const auto c = parse_config(base_config);
  EXPECT_EQ(c.kind, "lyapunov");
  EXPECT_EQ(c.seed, 7u);
  EXPECT_DOUBLE_EQ(c.kappa, 0.05);
  EXPECT_DOUBLE_EQ(c.lyapunov_horizon, 200.0);
  EXPECT_EQ(c.lyapunov_orbits, 3u);
}

TEST(Config, ErrorsCarryTheFieldPath) {
  const std::string b = base_config;
  EXPECT_EQ(field_of(b + "[bogus]\nx = 1\n"), "bogus");
  EXPECT_EQ(field_of(b + "[observable]\nnope = 1\n"), "observable.nope");
  EXPECT_EQ(field_of("[experiment]\nschema = oseledets-lab/1\nkind = lyapunov\nseed = -3\n"), "experiment.seed");
  EXPECT_EQ(field_of("[experiment]\nschema = oseledets-lab/1\nkind = lyapunov\n[flow]\nkappa = abc\n"), "flow.kappa");
  EXPECT_EQ(field_of("[experiment]\nschema = oseledets-lab/9\nkind = lyapunov\n"), "experiment.schema");
  EXPECT_EQ(field_of(base_config, "entropy"), "experiment.kind");
  EXPECT_EQ(field_of("[experiment]\nschema = oseledets-lab/1\nkind = dance\n"), "experiment.kind");
  // eps beyond sup u - chi is rejected unless explicitly allowed
  EXPECT_EQ(field_of("[experiment]\nschema = oseledets-lab/1\nkind = regularity\n[run]\neps = 0.9\n"), "run.eps");
  EXPECT_EQ(field_of("[experiment]\nschema = oseledets-lab/1\nkind = regularity\n[run]\neps = 0.9\n"
                     "allow_degenerate_eps = true\n"),
            "");
}

TEST(Config, HashIgnoresWorkersAndOutput) {
  auto a = parse_config(base_config);
  auto b = a;
  b.workers = 4;
  b.out_dir = "elsewhere";
  EXPECT_EQ(config_hash(a), config_hash(b));
  b.seed = 8;
  EXPECT_NE(config_hash(a), config_hash(b));
  EXPECT_EQ(config_hash(a).size(), 64u);
}

TEST(Io, Sha256KnownAnswer) {
  EXPECT_EQ(sha256_hex("abc"), "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
}

TEST(Io, CsvFormatting) {
  CsvTable t({"a", "b", "c"});
  t.row(1, 0.1, std::string("x"));
  t.row(2, std::numeric_limits<double>::infinity(), std::string("y"));
  EXPECT_EQ(t.str(), "a,b,c\n1,0.10000000000000001,x\n2,inf,y\n");
  EXPECT_EQ(format_double(std::nan("")), "nan");
}

// oracle: Pareto(2) samples, log X = -log(U) / 2
TEST(Hill, RecoversParetoIndex) {
  auto g = stream(12, 0);
  std::vector<double> logs(100000);
  for (auto& l : logs) l = -0.5 * std::log(1.0 - uniform01(g));
  const auto h = hill_tail_index(logs, 1000, 1);
  EXPECT_NEAR(h.p_hat, 2.0, 0.15);
  EXPECT_LT(h.ci_lo, h.p_hat);
  EXPECT_GT(h.ci_hi, h.p_hat);
  EXPECT_EQ(h.resamples, 200u);
  const auto again = hill_tail_index(logs, 1000, 1);
  EXPECT_EQ(h.ci_lo, again.ci_lo);
}

TEST(Hill, RejectsFlatOrSmallSamples) {
  std::vector<double> flat(1000, 3.0);
  EXPECT_THROW(hill_tail_index(flat, 10, 1), TooFewExceedances);
  std::vector<double> few{1, 2, 3};
  EXPECT_THROW(hill_tail_index(few, 2, 1), TooFewExceedances);
  const std::vector<double> neg{1.0, -1.0};
  EXPECT_THROW(hill_tail_index_values(neg, 2, 1), std::invalid_argument);
}

TEST(LpReport, BoundedTailsGiveInfiniteIndex) {
  std::vector<RegularityRecord> recs(500);
  for (auto& r : recs) {
    r.log_D = 0.0;
    r.T_eps = 0.0;
  }
  PressureCurve pc;
  for (int i = 0; i <= 40; ++i) {
    pc.t.push_back(-4 + 0.2 * i);
    pc.beta.push_back(pc.t.back() * pc.t.back() / 4);
  }
  const auto rep = lp_report(recs, legendre(pc), 0.0, 1.0, 0.5, 0, 1);
  EXPECT_TRUE(rep.D_bounded);
  EXPECT_TRUE(rep.T_bounded);
  EXPECT_TRUE(std::isinf(rep.hill_T.p_hat));
  EXPECT_TRUE(rep.pass_T);
  recs[0].truncated = recs[1].truncated = recs[2].truncated = recs[3].truncated = recs[4].truncated =
      recs[5].truncated = true;
  EXPECT_THROW(lp_report(recs, legendre(pc), 0.0, 1.0, 0.5, 0, 1), BoundError);
  recs[0].truncated = recs[1].truncated = recs[2].truncated = recs[3].truncated = recs[4].truncated =
      recs[5].truncated = false;
  // slopes reach only 2: the whole range [2.5, 3] is outside the profile
  const auto far = lp_report(recs, legendre(pc), 0.0, 3.0, 2.5, 0, 1);
  EXPECT_TRUE(far.beyond_profile);
  EXPECT_TRUE(std::isinf(far.p_star));
  EXPECT_TRUE(std::isinf(far.H));
}

TEST(Run, ReportWithoutBundlesIsNoData) {
  auto c = parse_config(base_config, "");
  c.kind = "report";
  c.out_dir = scratch("empty").string();
  EXPECT_THROW(run(c), NoData);
}

TEST(Run, LyapunovBundleIsWorkerIndependent) {
  auto c = parse_config(base_config);
  const auto d1 = scratch("w1"), d4 = scratch("w4");
  c.out_dir = d1.string();
  const auto p1 = write_bundle(c, run(c));
  c.workers = 4;
  c.out_dir = d4.string();
  const auto p4 = write_bundle(c, run(c));
  EXPECT_EQ(slurp(p1 / "summary.json"), slurp(p4 / "summary.json"));
  for (const auto& e : std::filesystem::directory_iterator(p1))
    EXPECT_EQ(slurp(e.path()), slurp(p4 / e.path().filename())) << e.path();
  EXPECT_FALSE(std::filesystem::exists(d1 / "lyapunov.partial"));

  // a report over that directory indexes the bundle
  c.kind = "report";
  c.out_dir = d1.string();
  const auto rep = run(c);
  EXPECT_EQ(rep.summary["bundles"].size(), 1u);
  std::filesystem::remove_all(d1);
  std::filesystem::remove_all(d4);
}
