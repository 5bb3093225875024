#include "depslab/metrics.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

#include "depslab/random.hpp"

namespace depslab::metrics {
namespace {

namespace fs = std::filesystem;

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream s;
  s << in.rdbuf();
  return s.str();
}

fs::path scratch(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / "depslab_metrics_test";
  fs::create_directories(dir);
  return dir / name;
}

TEST(Metrics, PartialMomentsOfASymmetricPair) {
  const std::vector<double> x = {-1.0, 1.0};
  const PartialMoments pm = partial_moments(x);
  EXPECT_NEAR(pm.lower, 1.0 / std::sqrt(2.0), 1e-15);
  EXPECT_NEAR(pm.upper, 1.0 / std::sqrt(2.0), 1e-15);
}

TEST(Metrics, PartialMomentsOfConstantSamplesAreZero) {
  const std::vector<double> x(7, 3.25);
  const PartialMoments pm = partial_moments(x);
  EXPECT_EQ(pm.lower, 0.0);
  EXPECT_EQ(pm.upper, 0.0);
}

TEST(Metrics, PartialMomentsPartitionThePopulationVariance) {
  std::mt19937_64 rng(11);
  std::lognormal_distribution<double> skewed(0.0, 1.0);
  for (int trial = 0; trial < 1000; ++trial) {
    std::vector<double> x(2 + trial % 50);
    for (double& v : x) v = skewed(rng);
    double mu = 0.0;
    for (double v : x) mu += v;
    mu /= static_cast<double>(x.size());
    double var = 0.0;
    for (double v : x) var += (v - mu) * (v - mu);
    var /= static_cast<double>(x.size());
    const PartialMoments pm = partial_moments(x);
    EXPECT_NEAR(pm.lower * pm.lower + pm.upper * pm.upper, var, 1e-10 * std::max(1.0, var));
  }
}

TEST(Metrics, PartialMomentsNeedTwoSamples) {
  EXPECT_THROW(partial_moments(std::vector<double>{1.0}), std::invalid_argument);
  EXPECT_THROW(partial_moments(std::vector<double>{}), std::invalid_argument);
}

TEST(Metrics, RightSkewHasTheLargerUpperMoment) {
  const std::vector<double> x = {0, 0, 0, 0, 10};
  const PartialMoments pm = partial_moments(x);
  EXPECT_GT(pm.upper, pm.lower);
}

TEST(Metrics, NumbersUseNineSignificantDigits) {
  EXPECT_EQ(format_number(0.1), "0.1");
  EXPECT_EQ(format_number(1.0 / 3.0), "0.333333333");
  EXPECT_EQ(format_number(123456789012.0), "1.23456789e+11");
  EXPECT_EQ(format_number(-2.5), "-2.5");
}

TEST(Metrics, CsvRoundTrip) {
  RunRecord rec;
  rec.design_names = {"omega", "zeta"};
  rec.rows.push_back({0, {12.5, 1.25, 2.0}, {0.5, 0.25}});
  rec.rows.push_back({10, {50.0 / 3.0, 0.125, 0.0}, {0.75, 1.0 / 7.0}});
  const fs::path p = scratch("run.csv");
  write_run_csv(rec, p.string());
  EXPECT_EQ(slurp(p),
            "iter,return_mean,sigma_minus,sigma_plus,psi_omega,psi_zeta\n"
            "0,12.5,1.25,2,0.5,0.25\n"
            "10,16.6666667,0.125,0,0.75,0.142857143\n");
  const RunRecord back = read_run_csv(p.string());
  EXPECT_EQ(back.design_names, rec.design_names);
  ASSERT_EQ(back.rows.size(), 2u);
  EXPECT_EQ(back.rows[1].iteration, 10u);
  EXPECT_NEAR(back.rows[1].stats.mean, 50.0 / 3.0, 1e-7);
  EXPECT_NEAR(back.rows[1].design[1], 1.0 / 7.0, 1e-9);
}

TEST(Metrics, EmptyRunWritesOnlyTheHeader) {
  RunRecord rec;
  rec.design_names = {"a"};
  const fs::path p = scratch("empty.csv");
  write_run_csv(rec, p.string());
  EXPECT_EQ(slurp(p), "iter,return_mean,sigma_minus,sigma_plus,psi_a\n");
  EXPECT_TRUE(read_run_csv(p.string()).rows.empty());
}

TEST(Metrics, MalformedCsvIsRejectedWithItsLine) {
  const fs::path p = scratch("bad.csv");
  std::ofstream(p) << "iter,return_mean,sigma_minus,sigma_plus\n0,1,2,3\n1,x,2,3\n";
  try {
    read_run_csv(p.string());
    FAIL() << "accepted a bad number";
  } catch (const std::runtime_error& e) {
    EXPECT_NE(std::string(e.what()).find(":3"), std::string::npos) << e.what();
  }
  std::ofstream(p) << "iter,mean\n";
  EXPECT_THROW(read_run_csv(p.string()), std::runtime_error);
  std::ofstream(p) << "iter,return_mean,sigma_minus,sigma_plus\n5,1,2,3\n5,1,2,3\n";
  EXPECT_THROW(read_run_csv(p.string()), std::runtime_error);
}

RunRecord flat_run(std::size_t rows, double value) {
  RunRecord r;
  for (std::size_t k = 0; k < rows; ++k) r.rows.push_back({k * 10, {value, 0.0, 0.0}, {}});
  return r;
}

TEST(Metrics, AggregateAcrossRunsUsesPartialMomentsOfTheMeans) {
  Series s{"a", {flat_run(3, 1.0), flat_run(3, 3.0)}};
  const auto pts = aggregate(s);
  ASSERT_EQ(pts.size(), 3u);
  EXPECT_DOUBLE_EQ(pts[0].mean, 2.0);
  EXPECT_DOUBLE_EQ(pts[0].lower, 2.0 - 1.0 / std::sqrt(2.0));
  EXPECT_DOUBLE_EQ(pts[0].upper, 2.0 + 1.0 / std::sqrt(2.0));
  EXPECT_DOUBLE_EQ(pts[2].iteration, 20.0);
}

TEST(Metrics, SingleRunBandComesFromItsColumns) {
  RunRecord r;
  r.rows.push_back({0, {5.0, 1.0, 2.0}, {}});
  const auto pts = aggregate(Series{"one", {r}});
  EXPECT_EQ(pts[0].lower, 4.0);
  EXPECT_EQ(pts[0].upper, 7.0);
}

TEST(Metrics, UnequalRunsAreCutAndFlagged) {
  bool truncated = false;
  const auto pts = aggregate(Series{"a", {flat_run(5, 1.0), flat_run(3, 2.0)}}, &truncated);
  EXPECT_EQ(pts.size(), 3u);
  EXPECT_TRUE(truncated);
  bool clean = false;
  aggregate(Series{"a", {flat_run(3, 1.0), flat_run(3, 2.0)}}, &clean);
  EXPECT_FALSE(clean);
}

TEST(Metrics, SvgEscapesTextAndDrawsOneBandPerSeries) {
  const fs::path p = scratch("curve.svg");
  write_learning_curve_svg({Series{"DEPS <a&b>", {flat_run(4, 1.0), flat_run(4, 2.0)}},
                            Series{"JODC", {flat_run(4, 0.5)}}},
                           p.string(), "msd \"1\"");
  const std::string svg = slurp(p);
  EXPECT_EQ(svg.rfind("<svg", 0) == 0 || svg.rfind("<?xml", 0) == 0, true);
  EXPECT_NE(svg.find("DEPS &lt;a&amp;b&gt;"), std::string::npos);
  EXPECT_NE(svg.find("msd &quot;1&quot;"), std::string::npos);
  EXPECT_EQ(svg.find("<a&b>"), std::string::npos);
  std::size_t polygons = 0, polylines = 0;
  for (std::size_t at = 0; (at = svg.find("<polygon", at)) != std::string::npos; ++at) ++polygons;
  for (std::size_t at = 0; (at = svg.find("<polyline", at)) != std::string::npos; ++at) ++polylines;
  EXPECT_EQ(polygons, 2u);
  EXPECT_EQ(polylines, 2u);
  EXPECT_NE(svg.find("</svg>"), std::string::npos);
}

TEST(Metrics, FlatRunStillRenders) {
  const fs::path p = scratch("flat.svg");
  write_learning_curve_svg({Series{"flat", {flat_run(3, 4.0)}}}, p.string());
  const std::string svg = slurp(p);
  EXPECT_EQ(svg.find("nan"), std::string::npos);
  EXPECT_EQ(svg.find("inf"), std::string::npos);
  EXPECT_THROW(write_learning_curve_svg({}, p.string()), std::invalid_argument);
}

TEST(Metrics, ExpectedReturnIsReproducibleAndConcentrates) {
  const auto environment = env::make_environment("msd");
  const auto pol = policy::make_policy(*environment);
  Rng init = make_rng(1, 0, Purpose::kInit);
  const auto theta = pol->initial_parameters(init);
  const std::vector<double> design = {0.8, 0.5, 0.3, -0.2, 0.1};

  Rng a = make_rng(1, 0, Purpose::kEval), b = make_rng(1, 0, Purpose::kEval);
  const ReturnStats first = expected_return(*environment, design, *pol, theta, 64, a);
  const ReturnStats second = expected_return(*environment, design, *pol, theta, 64, b);
  EXPECT_EQ(first.mean, second.mean);
  EXPECT_EQ(first.sigma_minus, second.sigma_minus);

  // Spread of the estimator across seeds shrinks roughly as 1/sqrt(n).
  auto spread = [&](std::size_t n) {
    std::vector<double> means;
    for (std::uint64_t seed = 0; seed < 24; ++seed) {
      Rng r = make_rng(seed, 0, Purpose::kTest);
      means.push_back(expected_return(*environment, design, *pol, theta, n, r).mean);
    }
    const PartialMoments pm = partial_moments(means);
    return std::sqrt(pm.lower * pm.lower + pm.upper * pm.upper);
  };
  const double coarse = spread(8), fine = spread(128);
  EXPECT_LT(fine, coarse / 2.0);
  EXPECT_THROW(expected_return(*environment, design, *pol, theta, 0, a), std::invalid_argument);
}

}  // namespace
}  // namespace depslab::metrics
