#pragma once

// Agreement metrics, the 70/15/15 split protocol, repeated and cross-dataset
// evaluation, residual diagnostics and the one-sided Welch t-test.

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <map>
#include <numeric>
#include <optional>
#include <ostream>
#include <random>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>
#include <boost/math/distributions/normal.hpp>
#include <boost/math/distributions/students_t.hpp>

#include "piqi/error.hpp"
#include "piqi/rng.hpp"
#include "piqi/stackens.hpp"

namespace piqi {

struct MetricReport {
  std::size_t n = 0;
  double r2 = 0.0;
  double rmse = 0.0;         // normalized score units
  double rmse_native = 0.0;  // rmse times the native score span
  double plcc = 0.0;
  double srocc = 0.0;
  double krocc = 0.0;
};

namespace detail {

inline void require_pair(std::span<const double> x, std::span<const double> y, const char* what) {
  if (x.size() != y.size()) throw InvalidArgument(std::string(what) + ": length mismatch");
  if (x.size() < 2) throw InvalidArgument(std::string(what) + ": need at least 2 samples");
}

inline double mean(std::span<const double> x) {
  return std::accumulate(x.begin(), x.end(), 0.0) / static_cast<double>(x.size());
}

}  // namespace detail

inline double plcc(std::span<const double> x, std::span<const double> y) {
  detail::require_pair(x, y, "plcc");
  const double mx = detail::mean(x), my = detail::mean(y);
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double dx = x[i] - mx, dy = y[i] - my;
    sxy += dx * dy;
    sxx += dx * dx;
    syy += dy * dy;
  }
  if (!(sxx > 0.0) || !(syy > 0.0)) throw InvalidArgument("plcc: zero-variance input");
  return std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
}

inline double rmse(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size() || x.empty()) throw InvalidArgument("rmse: length mismatch or empty");
  double s = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) s += (x[i] - y[i]) * (x[i] - y[i]);
  return std::sqrt(s / static_cast<double>(x.size()));
}

/// Coefficient of determination of predictions against truth: 1 - SSE/SST.
inline double r2(std::span<const double> pred, std::span<const double> truth) {
  detail::require_pair(pred, truth, "r2");
  const double m = detail::mean(truth);
  double sse = 0.0, sst = 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    sse += (truth[i] - pred[i]) * (truth[i] - pred[i]);
    sst += (truth[i] - m) * (truth[i] - m);
  }
  if (!(sst > 0.0)) throw InvalidArgument("r2: truth has zero variance");
  return 1.0 - sse / sst;
}

/// 1-based ranks; tied values share the average of their positions.
inline std::vector<double> average_ranks(std::span<const double> v) {
  std::vector<std::size_t> order(v.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](auto a, auto b) { return v[a] < v[b]; });
  std::vector<double> ranks(v.size());
  for (std::size_t i = 0; i < order.size();) {
    std::size_t j = i;
    while (j + 1 < order.size() && v[order[j + 1]] == v[order[i]]) ++j;
    const double r = 0.5 * static_cast<double>(i + j) + 1.0;
    for (std::size_t k = i; k <= j; ++k) ranks[order[k]] = r;
    i = j + 1;
  }
  return ranks;
}

inline double srocc(std::span<const double> x, std::span<const double> y) {
  detail::require_pair(x, y, "srocc");
  const auto rx = average_ranks(x), ry = average_ranks(y);
  try {
    return plcc(rx, ry);
  } catch (const InvalidArgument&) {
    throw InvalidArgument("srocc: undefined for all-tied input");
  }
}

/// Kendall tau-b.
inline double krocc(std::span<const double> x, std::span<const double> y) {
  detail::require_pair(x, y, "krocc");
  double concordant = 0.0, discordant = 0.0, tie_x = 0.0, tie_y = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    for (std::size_t j = i + 1; j < x.size(); ++j) {
      const double dx = x[i] - x[j], dy = y[i] - y[j];
      if (dx == 0.0 && dy == 0.0) continue;
      if (dx == 0.0) {
        tie_x += 1.0;
      } else if (dy == 0.0) {
        tie_y += 1.0;
      } else if ((dx > 0.0) == (dy > 0.0)) {
        concordant += 1.0;
      } else {
        discordant += 1.0;
      }
    }
  }
  const double denom = std::sqrt((concordant + discordant + tie_x) * (concordant + discordant + tie_y));
  if (!(denom > 0.0)) throw InvalidArgument("krocc: undefined for all-tied input");
  return std::clamp((concordant - discordant) / denom, -1.0, 1.0);
}

inline MetricReport evaluate(std::span<const double> pred, std::span<const double> truth,
                             double native_span = 1.0) {
  MetricReport m;
  m.n = pred.size();
  m.rmse = rmse(pred, truth);
  m.rmse_native = m.rmse * native_span;
  m.r2 = r2(pred, truth);
  m.plcc = plcc(pred, truth);
  m.srocc = srocc(pred, truth);
  m.krocc = krocc(pred, truth);
  return m;
}

inline MetricReport evaluate(const Eigen::VectorXd& pred, const Eigen::VectorXd& truth,
                             double native_span = 1.0) {
  return evaluate(std::span<const double>(pred.data(), static_cast<std::size_t>(pred.size())),
                  std::span<const double>(truth.data(), static_cast<std::size_t>(truth.size())),
                  native_span);
}

// ---------------------------------------------------------------------------
// Splits

enum class SplitMode { RandomByImage, GroupByReference };

inline std::string_view split_mode_name(SplitMode m) {
  return m == SplitMode::RandomByImage ? "random" : "group";
}

inline SplitMode parse_split_mode(std::string_view s) {
  if (s == "random" || s == "random-by-image") return SplitMode::RandomByImage;
  if (s == "group" || s == "group-by-reference") return SplitMode::GroupByReference;
  throw InvalidArgument("unknown split mode '" + std::string(s) + "' (expected random or group)");
}

struct SplitPlan {
  std::vector<std::size_t> train_idx;
  std::vector<std::size_t> val_idx;
  std::vector<std::size_t> test_idx;
  std::uint64_t seed = 0;
  SplitMode mode = SplitMode::RandomByImage;
};

/// Seeded 70/15/15 partition. Group mode keeps every image of a reference
/// group inside one partition.
inline SplitPlan make_splits(std::size_t n, std::span<const std::string> groups, std::uint64_t seed,
                             SplitMode mode = SplitMode::RandomByImage) {
  if (n < 10) throw InvalidArgument("make_splits: need at least 10 items");
  SplitPlan plan;
  plan.seed = seed;
  plan.mode = mode;
  std::mt19937_64 eng(seed);
  const auto n_train = static_cast<std::size_t>(std::llround(0.70 * static_cast<double>(n)));
  const auto n_val = static_cast<std::size_t>(std::llround(0.15 * static_cast<double>(n)));

  if (mode == SplitMode::RandomByImage) {
    std::vector<std::size_t> idx(n);
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    std::shuffle(idx.begin(), idx.end(), eng);
    plan.train_idx.assign(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(n_train));
    plan.val_idx.assign(idx.begin() + static_cast<std::ptrdiff_t>(n_train),
                        idx.begin() + static_cast<std::ptrdiff_t>(n_train + n_val));
    plan.test_idx.assign(idx.begin() + static_cast<std::ptrdiff_t>(n_train + n_val), idx.end());
  } else {
    if (groups.size() != n) throw InvalidArgument("make_splits: group labels required for group mode");
    std::map<std::string, std::vector<std::size_t>> by_group;
    for (std::size_t i = 0; i < n; ++i) by_group[groups[i]].push_back(i);
    std::vector<const std::vector<std::size_t>*> order;
    for (const auto& [name, members] : by_group) {
      if (static_cast<double>(members.size()) > 0.70 * static_cast<double>(n)) {
        throw InvalidArgument("make_splits: group '" + name + "' holds more than 70% of the data");
      }
      order.push_back(&members);
    }
    std::shuffle(order.begin(), order.end(), eng);
    for (const auto* members : order) {
      auto& dst = plan.train_idx.size() < n_train                ? plan.train_idx
                  : plan.val_idx.size() < n_val                  ? plan.val_idx
                                                                 : plan.test_idx;
      dst.insert(dst.end(), members->begin(), members->end());
    }
    if (plan.val_idx.empty() || plan.test_idx.empty()) {
      throw InvalidArgument("make_splits: too few groups for a three-way split");
    }
  }
  std::sort(plan.train_idx.begin(), plan.train_idx.end());
  std::sort(plan.val_idx.begin(), plan.val_idx.end());
  std::sort(plan.test_idx.begin(), plan.test_idx.end());
  return plan;
}

inline Eigen::MatrixXd select_rows(const Eigen::MatrixXd& x, std::span<const std::size_t> rows) {
  Eigen::MatrixXd out(static_cast<Eigen::Index>(rows.size()), x.cols());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    out.row(static_cast<Eigen::Index>(i)) = x.row(static_cast<Eigen::Index>(rows[i]));
  }
  return out;
}

inline Eigen::VectorXd select_rows(const Eigen::VectorXd& y, std::span<const std::size_t> rows) {
  Eigen::VectorXd out(static_cast<Eigen::Index>(rows.size()));
  for (std::size_t i = 0; i < rows.size(); ++i) out(static_cast<Eigen::Index>(i)) = y(static_cast<Eigen::Index>(rows[i]));
  return out;
}

// ---------------------------------------------------------------------------
// Training and evaluation protocols

struct EvalConfig {
  BagConfig bag;
  SplitMode mode = SplitMode::RandomByImage;
  bool reuse_tuning = false;
  double native_span = 1.0;
};

struct SplitOutcome {
  StackedEnsemble ensemble;
  MetricReport test;
  Eigen::VectorXd test_pred;
  Eigen::VectorXd test_truth;
};

/// Bag on the train rows, stack on the validation rows, score the test rows.
inline SplitOutcome train_and_test(const Eigen::MatrixXd& x, const Eigen::VectorXd& y,
                                   const SplitPlan& plan, const EvalConfig& cfg,
                                   const std::vector<KernelParams>* presets = nullptr) {
  const Eigen::MatrixXd xtr = select_rows(x, plan.train_idx);
  const Eigen::VectorXd ytr = select_rows(y, plan.train_idx);
  auto members = bag_train(xtr, ytr, cfg.bag, presets);
  SplitOutcome out;
  out.ensemble = stepwise_stack(std::move(members), select_rows(x, plan.val_idx),
                                select_rows(y, plan.val_idx), cfg.bag.jobs);
  const Eigen::MatrixXd xte = select_rows(x, plan.test_idx);
  out.test_truth = select_rows(y, plan.test_idx);
  out.test_pred = ensemble_predict_rows(out.ensemble, xte);
  out.test = evaluate(out.test_pred, out.test_truth, cfg.native_span);
  return out;
}

struct RepeatedResult {
  MetricReport median;
  std::vector<MetricReport> iterations;
  std::vector<std::size_t> iteration_index;  // iteration number of each report
  std::vector<std::size_t> members_selected;
  std::vector<std::pair<std::size_t, std::string>> failures;
};

inline double median_of(std::vector<double> v) {
  if (v.empty()) throw InvalidArgument("median of empty sequence");
  std::sort(v.begin(), v.end());
  const std::size_t mid = v.size() / 2;
  return v.size() % 2 ? v[mid] : 0.5 * (v[mid - 1] + v[mid]);
}

inline MetricReport median_report(const std::vector<MetricReport>& reports) {
  auto col = [&](auto field) {
    std::vector<double> v;
    for (const auto& r : reports) v.push_back(r.*field);
    return median_of(std::move(v));
  };
  MetricReport m;
  m.n = reports.empty() ? 0 : reports.front().n;
  m.r2 = col(&MetricReport::r2);
  m.rmse = col(&MetricReport::rmse);
  m.rmse_native = col(&MetricReport::rmse_native);
  m.plcc = col(&MetricReport::plcc);
  m.srocc = col(&MetricReport::srocc);
  m.krocc = col(&MetricReport::krocc);
  return m;
}

/// `iters` independent split/train/stack/test rounds with per-iteration
/// seeds derived from `seed`; the median is over completed iterations.
inline RepeatedResult repeated_eval(const Eigen::MatrixXd& x, const Eigen::VectorXd& y,
                                    std::span<const std::string> groups, std::size_t iters,
                                    std::uint64_t seed, const EvalConfig& cfg) {
  if (iters < 1) throw InvalidArgument("repeated_eval: iters must be >= 1");
  RepeatedResult res;
  std::optional<std::vector<KernelParams>> presets;
  for (std::size_t it = 0; it < iters; ++it) {
    try {
      const SplitPlan plan =
          make_splits(static_cast<std::size_t>(x.rows()), groups, derive_seed(seed, it, 1), cfg.mode);
      EvalConfig icfg = cfg;
      icfg.bag.master_seed = derive_seed(seed, it, 2);
      const auto out = train_and_test(x, y, plan, icfg, presets ? &*presets : nullptr);
      if (cfg.reuse_tuning && !presets) {
        presets.emplace();
        for (const auto& m : out.ensemble.members) presets->push_back(m.model.params);
      }
      res.iterations.push_back(out.test);
      res.iteration_index.push_back(it);
      res.members_selected.push_back(out.ensemble.selected.size());
    } catch (const std::exception& e) {
      res.failures.emplace_back(it, e.what());
    }
  }
  if (res.iterations.empty()) {
    throw Error("repeated_eval: every iteration failed; first error: " + res.failures.front().second);
  }
  res.median = median_report(res.iterations);
  return res;
}

struct CrossResult {
  MetricReport report;
  StackedEnsemble ensemble;
  Eigen::VectorXd predictions;
};

/// Train on all of dataset A (70:15 train/validation for stacking), evaluate
/// on every row of dataset B.
inline CrossResult cross_dataset(const Eigen::MatrixXd& xa, const Eigen::VectorXd& ya,
                                 const Eigen::MatrixXd& xb, const Eigen::VectorXd& yb,
                                 std::uint64_t seed, const EvalConfig& cfg) {
  const auto n = static_cast<std::size_t>(xa.rows());
  if (n < 12) throw InvalidArgument("cross_dataset: training set too small");
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  std::mt19937_64 eng(derive_seed(seed, 0, 3));
  std::shuffle(idx.begin(), idx.end(), eng);
  const auto n_train = static_cast<std::size_t>(std::llround(static_cast<double>(n) * 70.0 / 85.0));
  std::vector<std::size_t> tr(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(n_train));
  std::vector<std::size_t> va(idx.begin() + static_cast<std::ptrdiff_t>(n_train), idx.end());
  std::sort(tr.begin(), tr.end());
  std::sort(va.begin(), va.end());

  EvalConfig c = cfg;
  c.bag.master_seed = derive_seed(seed, 0, 4);
  auto members = bag_train(select_rows(xa, tr), select_rows(ya, tr), c.bag);
  CrossResult out;
  out.ensemble = stepwise_stack(std::move(members), select_rows(xa, va), select_rows(ya, va), c.bag.jobs);
  out.predictions = ensemble_predict_rows(out.ensemble, xb);
  out.report = evaluate(out.predictions, yb, cfg.native_span);
  return out;
}

// ---------------------------------------------------------------------------
// Residuals and significance

struct ResidualSummary {
  std::vector<double> residuals;  // prediction - truth
  double mean = 0.0;
  double std = 0.0;
  double skewness = 0.0;
  double excess_kurtosis = 0.0;
  // (theoretical normal quantile, sorted standardized residual), Blom positions
  std::vector<std::pair<double, double>> normal_quantiles;
};

inline ResidualSummary residual_diagnostics(std::span<const double> pred, std::span<const double> truth) {
  if (pred.size() != truth.size()) throw InvalidArgument("residual_diagnostics: length mismatch");
  ResidualSummary s;
  const std::size_t n = pred.size();
  s.residuals.resize(n);
  for (std::size_t i = 0; i < n; ++i) s.residuals[i] = pred[i] - truth[i];
  if (n == 0) return s;
  s.mean = detail::mean(s.residuals);
  double m2 = 0.0, m3 = 0.0, m4 = 0.0;
  for (double r : s.residuals) {
    const double d = r - s.mean;
    m2 += d * d;
    m3 += d * d * d;
    m4 += d * d * d * d;
  }
  m2 /= static_cast<double>(n);
  m3 /= static_cast<double>(n);
  m4 /= static_cast<double>(n);
  s.std = std::sqrt(m2);
  if (m2 > 0.0) {
    s.skewness = m3 / std::pow(m2, 1.5);
    s.excess_kurtosis = m4 / (m2 * m2) - 3.0;
  }
  std::vector<double> sorted = s.residuals;
  std::sort(sorted.begin(), sorted.end());
  const boost::math::normal_distribution<double> unit;
  for (std::size_t i = 0; i < n; ++i) {
    const double p = (static_cast<double>(i + 1) - 0.375) / (static_cast<double>(n) + 0.25);
    const double z = s.std > 0.0 ? (sorted[i] - s.mean) / s.std : 0.0;
    s.normal_quantiles.emplace_back(boost::math::quantile(unit, p), z);
  }
  return s;
}

/// Welch one-sided test: 1 if mean(a) is significantly greater than mean(b),
/// -1 if significantly smaller, 0 otherwise.
inline int ttest_one_sided(std::span<const double> a, std::span<const double> b, double alpha = 0.05) {
  if (a.size() < 2 || b.size() < 2) throw InvalidArgument("ttest_one_sided: need >= 2 samples each");
  const double na = static_cast<double>(a.size()), nb = static_cast<double>(b.size());
  const double ma = detail::mean(a), mb = detail::mean(b);
  double va = 0.0, vb = 0.0;
  for (double v : a) va += (v - ma) * (v - ma);
  for (double v : b) vb += (v - mb) * (v - mb);
  va /= na - 1.0;
  vb /= nb - 1.0;
  const double se2 = va / na + vb / nb;
  if (!(se2 > 0.0)) return ma > mb ? 1 : (ma < mb ? -1 : 0);
  const double t = (ma - mb) / std::sqrt(se2);
  const double df = se2 * se2 / ((va / na) * (va / na) / (na - 1.0) + (vb / nb) * (vb / nb) / (nb - 1.0));
  const boost::math::students_t_distribution<double> dist(df);
  if (boost::math::cdf(boost::math::complement(dist, t)) < alpha) return 1;
  if (boost::math::cdf(dist, t) < alpha) return -1;
  return 0;
}

// ---------------------------------------------------------------------------
// CSV reports

inline std::string format_double(double v) {
  char buf[64];
  const auto [end, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, ec == std::errc() ? end : buf);
}

inline void write_metrics_header(std::ostream& out) {
  out << "label,n,r2,rmse,rmse_native,plcc,srocc,krocc\n";
}

inline void write_metrics_row(std::ostream& out, const std::string& label, const MetricReport& m) {
  out << label << ',' << m.n << ',' << format_double(m.r2) << ',' << format_double(m.rmse) << ','
      << format_double(m.rmse_native) << ',' << format_double(m.plcc) << ','
      << format_double(m.srocc) << ',' << format_double(m.krocc) << '\n';
}

inline void write_curve_csv(std::ostream& out, const std::vector<std::pair<std::size_t, double>>& curve) {
  out << "member_count,rmse\n";
  for (const auto& [count, value] : curve) out << count << ',' << format_double(value) << '\n';
}

inline void write_residuals_csv(std::ostream& out, const ResidualSummary& s) {
  out << "# mean=" << format_double(s.mean) << '\n'
      << "# std=" << format_double(s.std) << '\n'
      << "# skewness=" << format_double(s.skewness) << '\n'
      << "# excess_kurtosis=" << format_double(s.excess_kurtosis) << '\n'
      << "index,residual,normal_quantile,sorted_standardized_residual\n";
  for (std::size_t i = 0; i < s.residuals.size(); ++i) {
    out << i << ',' << format_double(s.residuals[i]) << ',' << format_double(s.normal_quantiles[i].first)
        << ',' << format_double(s.normal_quantiles[i].second) << '\n';
  }
}

}  // namespace piqi
