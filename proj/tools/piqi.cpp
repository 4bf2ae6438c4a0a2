// piqi: no-reference image quality toolkit command line.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "piqi/piqi.hpp"

namespace {

struct Flags {
  piqi::CommandOptions opt;
  std::string split_mode = "random";
};

void add_common(CLI::App* cmd, Flags& f) {
  cmd->add_option("--seed", f.opt.seed, "Master random seed")->capture_default_str();
  cmd->add_option("--jobs", f.opt.jobs, "Worker threads")->capture_default_str()->check(CLI::PositiveNumber);
  cmd->add_flag("--unify-polarity", f.opt.unify_polarity,
                "Flip higher-worse scores so that 1 is always best");
}

void add_training(CLI::App* cmd, Flags& f) {
  cmd->add_option("--members", f.opt.members, "Number of bagged GPR members")
      ->capture_default_str()
      ->check(CLI::PositiveNumber);
  cmd->add_option("--row-frac", f.opt.row_fraction, "Row subsample fraction per member")
      ->capture_default_str()
      ->check(CLI::Range(1e-9, 1.0));
  cmd->add_option("--feat-frac", f.opt.feature_fraction, "Feature subsample fraction per member")
      ->capture_default_str()
      ->check(CLI::Range(1e-9, 1.0));
  cmd->add_option("--tune-budget", f.opt.tune_budget, "NLML evaluations per member")
      ->capture_default_str()
      ->check(CLI::PositiveNumber);
  cmd->add_option("--split-mode", f.split_mode, "random | group")
      ->capture_default_str()
      ->check(CLI::IsMember({"random", "group", "random-by-image", "group-by-reference"}));
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"piqi - no-reference perceptual image quality"};
  app.require_subcommand(1);
  Flags f;

  std::string manifest, out, model, input, features, second_manifest, residuals;

  auto* extract = app.add_subcommand("extract", "Extract 192-d features for a manifest into CSV");
  extract->add_option("manifest", manifest, "Dataset manifest CSV")->required()->check(CLI::ExistingFile);
  extract->add_option("-o,--out", out, "Output feature CSV")->required();
  add_common(extract, f);

  auto* train = app.add_subcommand("train", "Train a stacked GPR ensemble");
  train->add_option("manifest", manifest, "Dataset manifest CSV")->required()->check(CLI::ExistingFile);
  train->add_option("-o,--out", out, "Output model container")->required();
  train->add_option("--features", features, "Pre-extracted feature CSV")->check(CLI::ExistingFile);
  add_common(train, f);
  add_training(train, f);

  auto* predict = app.add_subcommand("predict", "Score an image or every image of a manifest");
  predict->add_option("model", model, "Model container")->required()->check(CLI::ExistingFile);
  predict->add_option("input", input, "Image file or manifest .csv")->required()->check(CLI::ExistingFile);
  predict->add_option("-o,--out", out, "Output CSV (default stdout)");
  add_common(predict, f);

  auto* evaluate = app.add_subcommand("evaluate", "Metrics of a model on a labelled manifest");
  evaluate->add_option("model", model, "Model container")->required()->check(CLI::ExistingFile);
  evaluate->add_option("manifest", manifest, "Dataset manifest CSV")->required()->check(CLI::ExistingFile);
  evaluate->add_option("-o,--out", out, "Metrics CSV")->required();
  evaluate->add_option("--residuals", residuals, "Residual diagnostics CSV");
  add_common(evaluate, f);

  auto* repeated = app.add_subcommand("repeated", "Median metrics over repeated random splits");
  repeated->add_option("manifest", manifest, "Dataset manifest CSV")->required()->check(CLI::ExistingFile);
  repeated->add_option("-o,--out", out, "Output prefix")->required();
  repeated->add_option("--features", features, "Pre-extracted feature CSV")->check(CLI::ExistingFile);
  repeated->add_option("--iters", f.opt.iters, "Number of split iterations")
      ->capture_default_str()
      ->check(CLI::PositiveNumber);
  repeated->add_flag("--reuse-tuning", f.opt.reuse_tuning,
                     "Tune members once and reuse their hyperparameters");
  add_common(repeated, f);
  add_training(repeated, f);

  auto* crosseval = app.add_subcommand("crosseval", "Train on one dataset, test on another");
  crosseval->add_option("train_manifest", manifest, "Training manifest")->required()->check(CLI::ExistingFile);
  crosseval->add_option("test_manifest", second_manifest, "Test manifest")->required()->check(CLI::ExistingFile);
  crosseval->add_option("-o,--out", out, "Metrics CSV")->required();
  add_common(crosseval, f);
  add_training(crosseval, f);

  CLI11_PARSE(app, argc, argv);

  try {
    f.opt.split_mode = piqi::parse_split_mode(f.split_mode);
    auto opt_path = [](const std::string& s) -> std::optional<std::filesystem::path> {
      if (s.empty()) return std::nullopt;
      return std::filesystem::path(s);
    };

    if (*extract) {
      const auto rows = piqi::cmd_extract(manifest, out, f.opt);
      std::cerr << "extracted " << rows << " feature rows\n";
    } else if (*train) {
      const auto s = piqi::cmd_train(manifest, f.opt, piqi::default_train_outputs(out), opt_path(features));
      std::cerr << "selected " << s.container.ensemble.selected.size() << " of "
                << s.container.ensemble.members.size() << " members; test SROCC "
                << s.test.srocc << ", RMSE " << s.test.rmse << '\n';
    } else if (*predict) {
      if (out.empty()) {
        piqi::cmd_predict(model, input, f.opt, std::cout);
      } else {
        piqi::write_atomically(out, [&](std::ostream& o) { piqi::cmd_predict(model, input, f.opt, o); });
      }
    } else if (*evaluate) {
      const auto m = piqi::cmd_evaluate(model, manifest, f.opt, out, opt_path(residuals));
      std::cerr << "SROCC " << m.srocc << ", PLCC " << m.plcc << ", RMSE " << m.rmse << '\n';
    } else if (*repeated) {
      const auto r = piqi::cmd_repeated(manifest, f.opt, out, opt_path(features));
      std::cerr << r.iterations.size() << " iterations; median SROCC " << r.median.srocc
                << ", PLCC " << r.median.plcc << ", RMSE " << r.median.rmse << '\n';
    } else if (*crosseval) {
      const auto r = piqi::cmd_crosseval(manifest, second_manifest, f.opt, out);
      std::cerr << "SROCC " << r.report.srocc << ", PLCC " << r.report.plcc << ", RMSE "
                << r.report.rmse << '\n';
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
