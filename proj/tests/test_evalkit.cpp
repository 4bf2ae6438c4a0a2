#include <cmath>
#include <random>
#include <set>
#include <sstream>

#include <gtest/gtest.h>

#include "piqi/evalkit.hpp"
#include "test_support.hpp"

using namespace piqi;

namespace {

using V = std::vector<double>;

std::set<std::size_t> as_set(const std::vector<std::size_t>& v) { return {v.begin(), v.end()}; }

}  // namespace

TEST(Metrics, HandComputedValues) {
  const V x{1, 2, 3}, y{1, 2, 4};
  EXPECT_NEAR(plcc(x, y), 0.9819805060619655, 1e-15);
  EXPECT_NEAR(rmse(x, y), 0.5773502691896257, 1e-15);
  EXPECT_NEAR(r2(x, y), 0.7857142857142857, 1e-15);
  EXPECT_DOUBLE_EQ(srocc(x, y), 1.0);
  EXPECT_DOUBLE_EQ(krocc(x, y), 1.0);
}

TEST(Metrics, Ties) {
  const V x{1, 2, 2, 3}, y{1, 3, 2, 4};
  EXPECT_NEAR(krocc(x, y), 0.912870929175277, 1e-15);
  EXPECT_NEAR(srocc(x, y), 0.9486832980505139, 1e-15);
  EXPECT_EQ(average_ranks(V{3, 1, 3, 2}), (V{3.5, 1, 3.5, 2}));
}

TEST(Metrics, PerfectAndReversed) {
  const V x{0.1, 0.5, 0.2, 0.9, 0.7};
  V rev;
  for (double v : x) rev.push_back(-v);
  EXPECT_DOUBLE_EQ(plcc(x, x), 1.0);
  EXPECT_DOUBLE_EQ(rmse(x, x), 0.0);
  EXPECT_DOUBLE_EQ(r2(x, x), 1.0);
  EXPECT_DOUBLE_EQ(srocc(x, rev), -1.0);
  EXPECT_DOUBLE_EQ(krocc(x, rev), -1.0);
}

TEST(Metrics, KendallMatchesOracle) {
  std::mt19937_64 eng(1);
  std::uniform_int_distribution<int> small(0, 4);
  for (int trial = 0; trial < 200; ++trial) {
    V x(12), y(12);
    for (std::size_t i = 0; i < 12; ++i) {
      x[i] = small(eng);
      y[i] = small(eng);
    }
    const double oracle = piqi::testing::kendall_oracle(x, y);
    if (std::isfinite(oracle)) EXPECT_NEAR(krocc(x, y), oracle, 1e-12);
  }
}

TEST(Metrics, RankInvariance) {
  std::mt19937_64 eng(2);
  std::normal_distribution<double> g;
  V x(50), y(50);
  for (std::size_t i = 0; i < 50; ++i) {
    x[i] = g(eng);
    y[i] = x[i] + g(eng);
  }
  V warped;
  for (double v : x) warped.push_back(std::exp(3.0 * v) + 7.0);
  EXPECT_DOUBLE_EQ(srocc(x, y), srocc(warped, y));
  EXPECT_DOUBLE_EQ(krocc(x, y), krocc(warped, y));
}

TEST(Metrics, Errors) {
  EXPECT_THROW(plcc(V{1, 2}, V{1}), InvalidArgument);
  EXPECT_THROW(rmse(V{}, V{}), InvalidArgument);
}

TEST(Metrics, ReportScalesNativeRmse) {
  const auto m = evaluate(V{0.1, 0.4, 0.8}, V{0.2, 0.4, 0.9}, 100.0);
  EXPECT_EQ(m.n, 3u);
  EXPECT_NEAR(m.rmse_native, 100.0 * m.rmse, 1e-12);
}

TEST(Splits, RandomPartition) {
  const auto p = make_splits(100, {}, 7);
  EXPECT_EQ(p.train_idx.size(), 70u);
  EXPECT_EQ(p.val_idx.size(), 15u);
  EXPECT_EQ(p.test_idx.size(), 15u);
  std::set<std::size_t> all = as_set(p.train_idx);
  for (auto i : p.val_idx) EXPECT_TRUE(all.insert(i).second);
  for (auto i : p.test_idx) EXPECT_TRUE(all.insert(i).second);
  EXPECT_EQ(all.size(), 100u);
  EXPECT_EQ(make_splits(100, {}, 7).test_idx, p.test_idx);
  EXPECT_NE(make_splits(100, {}, 8).test_idx, p.test_idx);
  EXPECT_THROW(make_splits(9, {}, 1), InvalidArgument);
}

TEST(Splits, GroupModeKeepsGroupsTogether) {
  std::vector<std::string> groups;
  for (int g = 0; g < 20; ++g)
    for (int k = 0; k < 5; ++k) groups.push_back("ref" + std::to_string(g));
  const auto p = make_splits(groups.size(), groups, 3, SplitMode::GroupByReference);
  auto group_set = [&](const std::vector<std::size_t>& idx) {
    std::set<std::string> s;
    for (auto i : idx) s.insert(groups[i]);
    return s;
  };
  const auto tr = group_set(p.train_idx), va = group_set(p.val_idx), te = group_set(p.test_idx);
  for (const auto& g : va) EXPECT_FALSE(tr.count(g));
  for (const auto& g : te) {
    EXPECT_FALSE(tr.count(g));
    EXPECT_FALSE(va.count(g));
  }
  EXPECT_EQ(p.train_idx.size() + p.val_idx.size() + p.test_idx.size(), 100u);
  EXPECT_EQ(p.train_idx.size(), 70u);
}

TEST(Splits, GroupModeErrors) {
  std::vector<std::string> groups(20, "big");
  groups[0] = "a";
  EXPECT_THROW(make_splits(20, groups, 1, SplitMode::GroupByReference), InvalidArgument);
  std::vector<std::string> two;
  for (int i = 0; i < 20; ++i) two.push_back(i < 10 ? "a" : "b");
  EXPECT_THROW(make_splits(20, two, 1, SplitMode::GroupByReference), InvalidArgument);
  EXPECT_THROW(make_splits(20, {}, 1, SplitMode::GroupByReference), InvalidArgument);
  EXPECT_EQ(parse_split_mode("group"), SplitMode::GroupByReference);
  EXPECT_THROW(parse_split_mode("bogus"), InvalidArgument);
}

TEST(Repeated, MedianOfIterations) {
  std::mt19937_64 eng(5);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  const int n = 40;
  Eigen::MatrixXd x(n, 3);
  Eigen::VectorXd y(n);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < 3; ++j) x(i, j) = u(eng);
    y(i) = x(i, 0) + 0.5 * x(i, 1) * x(i, 1);
  }
  EvalConfig cfg;
  cfg.bag.n_members = 4;
  cfg.bag.tune_budget = 8;
  const auto r = repeated_eval(x, y, {}, 3, 11, cfg);
  ASSERT_EQ(r.iterations.size(), 3u);
  V sr;
  for (const auto& m : r.iterations) sr.push_back(m.srocc);
  EXPECT_EQ(r.median.srocc, median_of(sr));
  EXPECT_GT(r.median.srocc, 0.5);
  const auto again = repeated_eval(x, y, {}, 3, 11, cfg);
  EXPECT_EQ(again.median.rmse, r.median.rmse);

  cfg.reuse_tuning = true;
  const auto reused = repeated_eval(x, y, {}, 2, 11, cfg);
  EXPECT_EQ(reused.iterations.size(), 2u);
}

TEST(Residuals, NormalSampleMoments) {
  std::mt19937_64 eng(8);
  std::normal_distribution<double> g;
  V pred(20000), truth(20000, 0.0);
  for (double& v : pred) v = g(eng);
  const auto s = residual_diagnostics(pred, truth);
  EXPECT_NEAR(s.mean, 0.0, 0.05);
  EXPECT_NEAR(s.std, 1.0, 0.05);
  EXPECT_NEAR(s.skewness, 0.0, 0.1);
  EXPECT_NEAR(s.excess_kurtosis, 0.0, 0.2);
  ASSERT_EQ(s.normal_quantiles.size(), 20000u);
  EXPECT_NEAR(s.normal_quantiles[10000].first, 0.0, 1e-3);
  EXPECT_LT(s.normal_quantiles.front().first, -3.0);
}

TEST(TTest, CalibrationUnderNull) {
  std::mt19937_64 eng(9);
  std::normal_distribution<double> g;
  int rejections = 0;
  const int trials = 2000;
  for (int t = 0; t < trials; ++t) {
    V a(30), b(30);
    for (double& v : a) v = g(eng);
    for (double& v : b) v = g(eng);
    if (ttest_one_sided(a, b) == 1) ++rejections;
  }
  const double rate = static_cast<double>(rejections) / trials;
  EXPECT_GE(rate, 0.02);
  EXPECT_LE(rate, 0.09);
}

TEST(TTest, DetectsShift) {
  std::mt19937_64 eng(10);
  std::normal_distribution<double> g;
  V a(50), b(50);
  for (double& v : a) v = g(eng) + 1.0;
  for (double& v : b) v = g(eng);
  EXPECT_EQ(ttest_one_sided(a, b), 1);
  EXPECT_EQ(ttest_one_sided(b, a), -1);
  EXPECT_THROW(ttest_one_sided(V{1}, b), InvalidArgument);
}

TEST(Csv, ShortestRoundTrip) {
  for (double v : {0.1, 1.0 / 3.0, 1e-300, -2.5, 0.0}) EXPECT_EQ(std::stod(format_double(v)), v);
  EXPECT_EQ(format_double(0.1), "0.1");
  std::ostringstream out;
  write_metrics_header(out);
  MetricReport m;
  m.n = 2;
  m.srocc = 0.5;
  write_metrics_row(out, "test", m);
  EXPECT_EQ(out.str(), "label,n,r2,rmse,rmse_native,plcc,srocc,krocc\ntest,2,0,0,0,0,0.5,0\n");
}
