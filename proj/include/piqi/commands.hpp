#pragma once

// End-to-end commands behind the `piqi` CLI: extract, train, predict,
// evaluate, repeated, crosseval. Every command is reproducible from --seed and
// writes its outputs atomically.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "piqi/cache.hpp"
#include "piqi/container.hpp"
#include "piqi/error.hpp"
#include "piqi/evalkit.hpp"
#include "piqi/featpipe.hpp"
#include "piqi/features_csv.hpp"
#include "piqi/fsutil.hpp"
#include "piqi/manifest.hpp"
#include "piqi/rng.hpp"
#include "piqi/stackens.hpp"

namespace piqi {

struct CommandOptions {
  std::uint64_t seed = 0;
  int jobs = 1;
  std::size_t members = 100;
  double row_fraction = 0.8;
  double feature_fraction = 0.5;
  int tune_budget = 60;
  std::size_t iters = 1000;
  SplitMode split_mode = SplitMode::RandomByImage;
  bool unify_polarity = false;
  bool reuse_tuning = false;

  BagConfig bag_config(std::uint64_t master_seed) const {
    BagConfig b;
    b.n_members = members;
    b.row_fraction = row_fraction;
    b.feature_fraction = feature_fraction;
    b.tune_budget = tune_budget;
    b.master_seed = master_seed;
    b.jobs = jobs;
    return b;
  }
};

/// Features and normalized targets for the manifest rows that extracted.
struct Dataset {
  DatasetManifest manifest;
  std::vector<std::string> paths;
  std::vector<std::string> groups;
  Eigen::MatrixXd features;
  Eigen::VectorXd scores;  // normalized to [0,1]
  std::vector<BatchFailure> failures;

  double native_span() const { return manifest.score_max - manifest.score_min; }
};

inline void report_failures(const std::vector<BatchFailure>& failures, std::ostream& log) {
  for (const auto& f : failures) {
    log << "warning: skipped " << f.path.string() << ": " << f.message << '\n';
  }
}

/// Loads a manifest and its features, either by extraction (through the
/// PIQI_CACHE_DIR cache when set) or from a previously dumped feature CSV.
inline Dataset load_dataset(const std::filesystem::path& manifest_path, const CommandOptions& opt,
                            const std::optional<std::filesystem::path>& features_csv = std::nullopt) {
  Dataset d;
  d.manifest = load_manifest(manifest_path);
  const auto normalized = normalize_scores(d.manifest, opt.unify_polarity);
  std::vector<std::size_t> rows;
  if (features_csv) {
    std::ifstream in(*features_csv);
    if (!in) throw Error("cannot open feature CSV " + features_csv->string());
    const FeatureTable table = read_features_csv(in);
    std::map<std::string, Eigen::Index> index;
    for (std::size_t i = 0; i < table.paths.size(); ++i) {
      index.emplace(table.paths[i], static_cast<Eigen::Index>(i));
    }
    d.features.resize(static_cast<Eigen::Index>(d.manifest.size()), static_cast<Eigen::Index>(kFeatureCount));
    for (std::size_t i = 0; i < d.manifest.size(); ++i) {
      const auto it = index.find(d.manifest.rows[i].path.string());
      if (it == index.end()) {
        throw Error("feature CSV has no row for " + d.manifest.rows[i].path.string());
      }
      d.features.row(static_cast<Eigen::Index>(i)) = table.features.row(it->second);
      rows.push_back(i);
    }
  } else {
    const auto cache = FeatureCache::from_env(kLayoutVersion);
    FeatureBatch batch = extract_batch(d.manifest, opt.jobs, cache ? &*cache : nullptr);
    d.features = std::move(batch.features);
    d.failures = std::move(batch.failures);
    rows = std::move(batch.rows);
  }
  d.scores.resize(static_cast<Eigen::Index>(rows.size()));
  for (std::size_t i = 0; i < rows.size(); ++i) {
    d.scores(static_cast<Eigen::Index>(i)) = normalized[rows[i]];
    d.paths.push_back(d.manifest.rows[rows[i]].path.string());
    d.groups.push_back(d.manifest.rows[rows[i]].group);
  }
  return d;
}

inline std::span<const std::string> split_groups(const Dataset& d, SplitMode mode) {
  if (mode == SplitMode::GroupByReference) {
    for (const auto& g : d.groups) {
      if (g.empty()) throw InvalidArgument("group split mode needs a 'group' column in the manifest");
    }
    return d.groups;
  }
  return {};
}

// ---------------------------------------------------------------------------

inline std::size_t cmd_extract(const std::filesystem::path& manifest_path,
                               const std::filesystem::path& out_csv, const CommandOptions& opt,
                               std::ostream& log = std::cerr) {
  const Dataset d = load_dataset(manifest_path, opt);
  report_failures(d.failures, log);
  write_atomically(out_csv, [&](std::ostream& out) { write_features_csv(out, d.paths, d.features); });
  return static_cast<std::size_t>(d.features.rows());
}

struct TrainOutputs {
  std::filesystem::path model;
  std::filesystem::path curve_csv;
  std::filesystem::path metrics_csv;
};

inline TrainOutputs default_train_outputs(const std::filesystem::path& model) {
  return {model, model.string() + ".curve.csv", model.string() + ".metrics.csv"};
}

struct TrainSummary {
  ModelContainer container;
  SplitPlan plan;
  MetricReport validation;
  MetricReport test;
};

/// Full pipeline: features, 70/15/15 split, bagging on train, stacking on
/// validation, metrics on test. Writes the container, the convergence curve
/// and a metrics CSV with validation and test rows.
inline TrainSummary cmd_train(const std::filesystem::path& manifest_path, const CommandOptions& opt,
                              const TrainOutputs& outputs,
                              const std::optional<std::filesystem::path>& features_csv = std::nullopt,
                              std::ostream& log = std::cerr) {
  const Dataset d = load_dataset(manifest_path, opt, features_csv);
  report_failures(d.failures, log);

  TrainSummary s;
  s.plan = make_splits(static_cast<std::size_t>(d.features.rows()), split_groups(d, opt.split_mode),
                       derive_seed(opt.seed, 0, 1), opt.split_mode);
  EvalConfig cfg;
  cfg.bag = opt.bag_config(derive_seed(opt.seed, 0, 2));
  cfg.mode = opt.split_mode;
  cfg.native_span = d.native_span();
  const SplitOutcome out = train_and_test(d.features, d.scores, s.plan, cfg);
  s.test = out.test;
  s.validation = evaluate(ensemble_predict_rows(out.ensemble, select_rows(d.features, s.plan.val_idx)),
                          select_rows(d.scores, s.plan.val_idx), cfg.native_span);

  auto& c = s.container;
  c.layout_version = kLayoutVersion;
  c.ensemble = out.ensemble;
  c.ensemble.layout_version = kLayoutVersion;
  auto& p = c.provenance;
  p.manifest_name = d.manifest.dataset_name;
  p.master_seed = opt.seed;
  p.n_members = opt.members;
  p.row_fraction = opt.row_fraction;
  p.feature_fraction = opt.feature_fraction;
  p.tune_budget = static_cast<std::uint64_t>(opt.tune_budget);
  p.split_mode = std::string(split_mode_name(opt.split_mode));
  p.unify_polarity = opt.unify_polarity;
  p.score_min = d.manifest.score_min;
  p.score_max = d.manifest.score_max;
  p.polarity = d.manifest.polarity;

  save_model_file(outputs.model, c);
  write_atomically(outputs.curve_csv, [&](std::ostream& o) { write_curve_csv(o, c.ensemble.curve); });
  write_atomically(outputs.metrics_csv, [&](std::ostream& o) {
    write_metrics_header(o);
    write_metrics_row(o, "validation", s.validation);
    write_metrics_row(o, "test", s.test);
  });
  return s;
}

struct ScoredImage {
  std::string path;
  double score = 0.0;         // normalized
  double score_native = 0.0;  // on the training manifest's scale
};

inline void write_predictions_csv(std::ostream& out, const std::vector<ScoredImage>& rows) {
  out << "path,score,score_native\n";
  for (const auto& r : rows) {
    out << r.path << ',' << format_double(r.score) << ',' << format_double(r.score_native) << '\n';
  }
}

inline double predict_features(const ModelContainer& model, const FeatureVector& fv) {
  if (fv.layout_version != model.layout_version) {
    throw InvalidArgument("feature layout " + fv.layout_version + " does not match model layout " +
                          model.layout_version);
  }
  return ensemble_predict(model.ensemble,
                          Eigen::Map<const Eigen::VectorXd>(fv.values.data(), kFeatureCount));
}

/// Scores one image, or every row of a manifest when `input` ends in .csv.
inline std::vector<ScoredImage> cmd_predict(const std::filesystem::path& model_path,
                                            const std::filesystem::path& input,
                                            const CommandOptions& opt, std::ostream& out,
                                            std::ostream& log = std::cerr) {
  const ModelContainer model = load_model_file(model_path);
  const auto& p = model.provenance;
  std::vector<ScoredImage> rows;
  auto score = [&](const std::string& path, double s) {
    rows.push_back({path, s, denormalize_score(s, p.score_min, p.score_max, p.flipped())});
  };
  if (input.extension() == ".csv") {
    const Dataset d = load_dataset(input, opt);
    report_failures(d.failures, log);
    for (Eigen::Index i = 0; i < d.features.rows(); ++i) {
      score(d.paths[static_cast<std::size_t>(i)],
            ensemble_predict(model.ensemble, d.features.row(i).transpose()));
    }
  } else {
    score(input.string(), predict_features(model, extract_features(input)));
  }
  write_predictions_csv(out, rows);
  return rows;
}

/// Scores a labelled manifest with a trained model. Optionally writes the
/// residual diagnostics CSV.
inline MetricReport cmd_evaluate(const std::filesystem::path& model_path,
                                 const std::filesystem::path& manifest_path,
                                 const CommandOptions& opt, const std::filesystem::path& out_csv,
                                 const std::optional<std::filesystem::path>& residuals_csv = std::nullopt,
                                 std::ostream& log = std::cerr) {
  const ModelContainer model = load_model_file(model_path);
  CommandOptions o = opt;
  o.unify_polarity = model.provenance.unify_polarity;
  const Dataset d = load_dataset(manifest_path, o);
  report_failures(d.failures, log);
  const Eigen::VectorXd pred = ensemble_predict_rows(model.ensemble, d.features);
  const MetricReport m = evaluate(pred, d.scores, d.native_span());
  write_atomically(out_csv, [&](std::ostream& os) {
    write_metrics_header(os);
    write_metrics_row(os, d.manifest.dataset_name, m);
  });
  if (residuals_csv) {
    const auto res = residual_diagnostics(
        std::span<const double>(pred.data(), static_cast<std::size_t>(pred.size())),
        std::span<const double>(d.scores.data(), static_cast<std::size_t>(d.scores.size())));
    write_atomically(*residuals_csv, [&](std::ostream& os) { write_residuals_csv(os, res); });
  }
  return m;
}

/// Writes <prefix>.median.csv and <prefix>.iterations.csv.
inline RepeatedResult cmd_repeated(const std::filesystem::path& manifest_path, const CommandOptions& opt,
                                   const std::filesystem::path& out_prefix,
                                   const std::optional<std::filesystem::path>& features_csv = std::nullopt,
                                   std::ostream& log = std::cerr) {
  const Dataset d = load_dataset(manifest_path, opt, features_csv);
  report_failures(d.failures, log);
  EvalConfig cfg;
  cfg.bag = opt.bag_config(0);
  cfg.mode = opt.split_mode;
  cfg.reuse_tuning = opt.reuse_tuning;
  cfg.native_span = d.native_span();
  const RepeatedResult r =
      repeated_eval(d.features, d.scores, split_groups(d, opt.split_mode), opt.iters, opt.seed, cfg);
  for (const auto& [it, msg] : r.failures) log << "warning: iteration " << it << " failed: " << msg << '\n';

  write_atomically(out_prefix.string() + ".median.csv", [&](std::ostream& o) {
    write_metrics_header(o);
    write_metrics_row(o, "median", r.median);
  });
  write_atomically(out_prefix.string() + ".iterations.csv", [&](std::ostream& o) {
    o << "iteration,n,r2,rmse,rmse_native,plcc,srocc,krocc,members_selected\n";
    for (std::size_t i = 0; i < r.iterations.size(); ++i) {
      const auto& m = r.iterations[i];
      o << r.iteration_index[i] << ',' << m.n << ',' << format_double(m.r2) << ','
        << format_double(m.rmse) << ',' << format_double(m.rmse_native) << ','
        << format_double(m.plcc) << ',' << format_double(m.srocc) << ',' << format_double(m.krocc)
        << ',' << r.members_selected[i] << '\n';
    }
  });
  return r;
}

/// Train on one manifest, test on another. Refuses mismatched polarity unless
/// polarity unification is enabled.
inline CrossResult cmd_crosseval(const std::filesystem::path& train_manifest,
                                 const std::filesystem::path& test_manifest, const CommandOptions& opt,
                                 const std::filesystem::path& out_csv,
                                 std::ostream& log = std::cerr) {
  const Dataset a = load_dataset(train_manifest, opt);
  const Dataset b = load_dataset(test_manifest, opt);
  if (a.manifest.polarity != b.manifest.polarity && !opt.unify_polarity) {
    throw InvalidArgument("cannot cross-evaluate: " + a.manifest.dataset_name + " is " +
                          std::string(polarity_name(a.manifest.polarity)) + " but " +
                          b.manifest.dataset_name + " is " +
                          std::string(polarity_name(b.manifest.polarity)) +
                          "; pass --unify-polarity to align them");
  }
  report_failures(a.failures, log);
  report_failures(b.failures, log);
  EvalConfig cfg;
  cfg.bag = opt.bag_config(0);
  cfg.native_span = b.native_span();
  CrossResult r = cross_dataset(a.features, a.scores, b.features, b.scores, opt.seed, cfg);
  write_atomically(out_csv, [&](std::ostream& o) {
    write_metrics_header(o);
    write_metrics_row(o, a.manifest.dataset_name + "->" + b.manifest.dataset_name, r.report);
  });
  return r;
}

}  // namespace piqi
