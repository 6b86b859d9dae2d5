// udadet: dataset generation, UDA training, evaluation, and report
// aggregation for the terrain detection toolkit.

#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>

#include "uda/data/dataset.hpp"
#include "uda/harness/report.hpp"
#include "uda/harness/trainer.hpp"

namespace fs = std::filesystem;

namespace {

int run_generate(const std::string& recipe_name, std::uint64_t seed, const std::string& out,
                 int size, int train_count, int test_count) {
  uda::Recipe recipe = uda::recipe_by_name(recipe_name);
  if (train_count > 0) recipe.train_count = train_count;
  if (test_count > 0) recipe.test_count = test_count;
  uda::generate_recipe(recipe, seed, out, size);
  std::cout << "wrote " << recipe.name << " (seed " << seed << ", " << recipe.train_count
            << " train / " << recipe.test_count << " test, " << size << "px) to " << out << "\n";
  return 0;
}

int run_train(uda::TrainConfig cfg, const std::string& data_dir, const std::string& out_dir,
              const std::string& val_split) {
  const fs::path data(data_dir);
  const fs::path out(out_dir);
  fs::create_directories(out);

  uda::Dataset source = uda::read_dataset(data, "train_source");
  const bool needs_labeled_target = cfg.method == uda::Method::TargetOnly;
  uda::Dataset target =
      uda::read_dataset(data, needs_labeled_target ? "train_target_labeled" : "train_target");
  cfg.detector.class_count = static_cast<int>(source.class_names.size());

  uda::Trainer trainer(cfg, std::move(source), std::move(target));
  std::ofstream train_log(out / "train.log");
  std::ofstream diag_log(out / "diagnostics.log");
  trainer.set_log(&train_log, &diag_log);
  if (!val_split.empty())
    trainer.set_validation(uda::read_dataset(data, val_split), out / "best.ckpt");

  const uda::TrainResult result = trainer.run();
  uda::save_checkpoint(trainer.bundle(), out / "final.ckpt");

  std::cout << "trained " << to_string(cfg.method) << " for " << result.steps
            << " steps, final loss " << result.final_total;
  if (result.best_val_map >= 0) std::cout << ", best val mAP " << result.best_val_map;
  std::cout << "\ncheckpoint: " << (out / "final.ckpt").string() << "\n";
  return 0;
}

int run_eval(const std::string& checkpoint, const std::string& data_dir, const std::string& split,
             double conf, double nms, double map_iou, const std::string& out_path) {
  uda::ModelBundle bundle = uda::load_checkpoint(checkpoint);
  uda::Dataset data = uda::read_dataset(data_dir, split);
  uda::EvalReport report = uda::evaluate(*bundle.detector, data, conf, nms, map_iou);
  report.method = to_string(bundle.cfg.method);
  report.seed = bundle.cfg.seed;
  report.config_fingerprint = uda::config_fingerprint(bundle.cfg);

  std::cout << "mAP@" << map_iou << " = " << report.map50 << " over " << report.images
            << " images\n";
  for (const auto& c : report.per_class) {
    if (c.present)
      std::cout << "  " << c.name << ": AP " << c.ap << " (" << c.ground_truths << " gt, "
                << c.detections << " det)\n";
    else
      std::cout << "  " << c.name << ": absent from ground truth\n";
  }
  if (!out_path.empty()) {
    uda::write_report(report, out_path);
    std::cout << "report: " << out_path << "\n";
  }
  return 0;
}

int run_report(const std::vector<std::string>& inputs, const std::string& out_prefix) {
  std::vector<uda::EvalReport> reports;
  for (const std::string& in : inputs) {
    const fs::path p(in);
    if (fs::is_directory(p)) {
      for (const auto& entry : fs::recursive_directory_iterator(p))
        if (entry.is_regular_file() && entry.path().extension() == ".json")
          reports.push_back(uda::read_report(entry.path()));
    } else {
      reports.push_back(uda::read_report(p));
    }
  }
  if (reports.empty()) throw std::runtime_error("report: no evaluation reports found");
  const auto rows = uda::summarize_reports(reports);
  const std::string table = uda::format_summary_table(rows);
  std::cout << table;
  if (!out_prefix.empty()) {
    std::ofstream txt(out_prefix + ".txt");
    txt << table;
    std::ofstream csv(out_prefix + ".csv");
    csv << uda::format_summary_csv(rows);
    std::cout << "wrote " << out_prefix << ".txt and " << out_prefix << ".csv\n";
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"synthetic-terrain UDA detection toolkit"};
  app.require_subcommand(1);

  // generate
  auto* gen = app.add_subcommand("generate", "render a named dataset recipe");
  std::string recipe = "mini-mars", gen_out = "dataset";
  std::uint64_t gen_seed = 0;
  int gen_size = 160, gen_train = 0, gen_test = 0;
  gen->add_option("--recipe", recipe, "recipe name (mini-mars, mini-asteroid)");
  gen->add_option("--seed", gen_seed, "base seed");
  gen->add_option("--out", gen_out, "output directory")->required();
  gen->add_option("--size", gen_size, "image size in pixels");
  gen->add_option("--train-count", gen_train, "override train image count");
  gen->add_option("--test-count", gen_test, "override test image count");

  // train
  auto* train = app.add_subcommand("train", "train one method on a generated dataset");
  std::string train_config, train_data, train_out = "run", train_val;
  train->add_option("--config", train_config, "config file (key = value lines)");
  train->add_option("--data", train_data, "dataset directory from `generate`")->required();
  train->add_option("--out", train_out, "output directory for checkpoint and logs");
  train->add_option("--val", train_val, "validation split name for best-checkpoint tracking");
  train->allow_extras();  // --key value overrides for any config field

  // eval
  auto* eval = app.add_subcommand("eval", "evaluate a checkpoint on a labeled split");
  std::string eval_ckpt, eval_data, eval_split = "test_target", eval_out;
  double eval_conf = 0.25, eval_nms = 0.7, eval_map_iou = 0.5;
  eval->add_option("--checkpoint", eval_ckpt, "checkpoint file")->required();
  eval->add_option("--data", eval_data, "dataset directory")->required();
  eval->add_option("--split", eval_split, "split name");
  eval->add_option("--conf", eval_conf, "confidence threshold");
  eval->add_option("--nms", eval_nms, "NMS IoU threshold");
  eval->add_option("--map-iou", eval_map_iou, "matching IoU for AP");
  eval->add_option("--report", eval_out, "write the report as JSON to this path");

  // report
  auto* rep = app.add_subcommand("report", "aggregate evaluation reports into a table");
  std::vector<std::string> rep_inputs;
  std::string rep_out;
  rep->add_option("--in", rep_inputs, "report files or directories")->required();
  rep->add_option("--out", rep_out, "output prefix for .txt/.csv");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;  // help exits 0; any parse failure exits 2
  }

  try {
    if (gen->parsed()) return run_generate(recipe, gen_seed, gen_out, gen_size, gen_train, gen_test);
    if (train->parsed()) {
      uda::TrainConfig cfg;
      if (!train_config.empty()) cfg = uda::load_config_file(train_config);
      // apply --key value overrides
      std::vector<std::string> extras = train->remaining();
      for (std::size_t i = 0; i < extras.size(); ++i) {
        std::string key = extras[i];
        if (key.rfind("--", 0) != 0)
          throw std::runtime_error("unexpected argument: " + key);
        key = key.substr(2);
        const auto eq = key.find('=');
        std::string value;
        if (eq != std::string::npos) {
          value = key.substr(eq + 1);
          key = key.substr(0, eq);
        } else {
          if (i + 1 >= extras.size())
            throw std::runtime_error("missing value for override --" + key);
          value = extras[++i];
        }
        uda::apply_config_line(cfg, key, value);
      }
      return run_train(cfg, train_data, train_out, train_val);
    }
    if (eval->parsed())
      return run_eval(eval_ckpt, eval_data, eval_split, eval_conf, eval_nms, eval_map_iou,
                      eval_out);
    if (rep->parsed()) return run_report(rep_inputs, rep_out);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
