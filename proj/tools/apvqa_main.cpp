// apvqa: dataset generation and evaluation for the absolute-position VQA task.
//
// Exit codes: 0 success, 1 input/config error (including bad flags), 2 I/O error.

#include <apvqa/apvqa.hpp>

#include <CLI11.hpp>

#include <cstdlib>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

namespace {

using namespace apvqa;

struct Common {
  std::string out;
  std::uint64_t seed = 0;
  unsigned jobs = 1;
};

void add_common(CLI::App* cmd, Common& c, bool with_seed = true) {
  cmd->add_option("--out", c.out, "Output directory")->required();
  if (with_seed) cmd->add_option("--seed", c.seed, "Random seed")->capture_default_str();
  cmd->add_option("--jobs", c.jobs, "Worker threads (output does not depend on this)")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
}

// APVQA_OUT_ROOT, when set, anchors relative --out paths.
fs::path resolve_out(const std::string& out) {
  fs::path p(out);
  if (const char* root = std::getenv("APVQA_OUT_ROOT"); root && *root && p.is_relative()) {
    return fs::path(root) / p;
  }
  return p;
}

void write_run_json(const fs::path& dir, const std::string& command, std::uint64_t seed,
                    const ojson& options) {
  ojson j;
  j["tool"] = "apvqa";
  j["version"] = kToolVersion;
  j["generator_version"] = kGeneratorVersion;
  j["command"] = command;
  j["seed"] = seed;
  j["options"] = options;
  ensure_directory(dir);
  write_json_file(dir / "run.json", j);
}

void report_dataset(const std::string& where, const Dataset& d) {
  std::cout << where << ": " << d.samples.size() << " samples (" << d.name << ")\n";
}

std::vector<double> parse_fractions(const std::string& text) {
  std::vector<double> out;
  std::stringstream ss(text);
  for (std::string item; std::getline(ss, item, ',');) {
    try {
      std::size_t used = 0;
      out.push_back(std::stod(item, &used));
      if (used != item.size()) throw std::invalid_argument(item);
    } catch (const std::exception&) {
      throw ConfigError("bad fraction: '" + item + "'");
    }
  }
  if (out.empty()) throw ConfigError("no fractions given");
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Absolute-position VQA dataset generation and evaluation"};
  app.set_version_flag("--version", std::string(kToolVersion));
  app.require_subcommand(1);

  Common common;
  bool no_images = false;

  // gen ---------------------------------------------------------------------
  auto* gen = app.add_subcommand("gen", "Generate datasets")->require_subcommand(1);
  auto* gen_eval = gen->add_subcommand("synth-eval", "Exhaustive synthetic evaluation set (3,888 samples)");
  add_common(gen_eval, common);
  gen_eval->add_flag("--no-images", no_images, "Write samples and manifest only");

  auto* gen_train = gen->add_subcommand("synth-train", "Synthetic training set with stratified 80/20 split");
  add_common(gen_train, common);
  gen_train->add_flag("--no-images", no_images, "Write samples and manifest only");

  std::string annotations, split = "train";
  double val_fraction = 0.2;
  auto* gen_coco = gen->add_subcommand("coco", "COCO absolute-position set from instance annotations");
  add_common(gen_coco, common);
  gen_coco->add_option("--annotations", annotations, "COCO instances annotation file")->required();
  gen_coco->add_option("--split", split, "Source split")->check(CLI::IsMember({"train", "val"}))->capture_default_str();
  gen_coco->add_option("--val-fraction", val_fraction, "Held-out share for --split train")->capture_default_str();

  // augment -----------------------------------------------------------------
  auto* augment = app.add_subcommand("augment", "Augment datasets")->require_subcommand(1);
  std::string dataset_dir;
  int k = 1;
  bool allow_plus = false, allow_any_k = false;
  auto* aug_d = augment->add_subcommand("distractors", "Add k distractor objects per image");
  add_common(aug_d, common);
  aug_d->add_option("--dataset", dataset_dir, "Source dataset directory")->required();
  aug_d->add_option("--k", k, "Distractors per image (1, 3 or 5)")->required();
  aug_d->add_flag("--allow-plus", allow_plus, "Allow plus-shaped distractors for white targets");
  aug_d->add_flag("--allow-any-k", allow_any_k, "Accept k outside {1, 3, 5}");
  aug_d->add_flag("--no-images", no_images, "Write samples and manifest only");

  // subset ------------------------------------------------------------------
  auto* subset = app.add_subcommand("subset", "Select dataset subsets")->require_subcommand(1);
  std::size_t n = 1296;
  auto* sub_bal = subset->add_subcommand("balanced", "Region- and category-balanced subset");
  add_common(sub_bal, common);
  sub_bal->add_option("--dataset", dataset_dir, "Source dataset directory")->required();
  sub_bal->add_option("--n", n, "Subset size")->capture_default_str();

  std::string fractions = "1,2,5,10,25,50,100";
  auto* sub_scale = subset->add_subcommand("scale", "Nested cell-stratified subsets");
  add_common(sub_scale, common);
  sub_scale->add_option("--dataset", dataset_dir, "Source dataset directory")->required();
  sub_scale->add_option("--fractions", fractions, "Comma-separated percentages")->capture_default_str();

  // eval --------------------------------------------------------------------
  auto* eval = app.add_subcommand("eval", "Score predictions")->require_subcommand(1);
  std::string predictions;
  bool retrieval = false;
  auto* ev_score = eval->add_subcommand("score", "Score a prediction file against a dataset");
  add_common(ev_score, common, false);
  ev_score->add_option("--dataset", dataset_dir, "Dataset directory")->required();
  ev_score->add_option("--predictions", predictions, "Prediction records (JSON lines)")->required();
  ev_score->add_flag("--retrieval", retrieval, "Score image/candidate embeddings instead of text");

  std::string stub_mode, stub_label;
  auto* ev_stub = eval->add_subcommand("stub", "Write predictions from a built-in stub predictor");
  add_common(ev_stub, common);
  ev_stub->add_option("--dataset", dataset_dir, "Dataset directory")->required();
  ev_stub->add_option("--mode", stub_mode, "gold | constant | random")
      ->required()
      ->check(CLI::IsMember({"gold", "constant", "random"}));
  ev_stub->add_option("--label", stub_label, "Answer text for --mode constant");

  // probe -------------------------------------------------------------------
  auto* probe = app.add_subcommand("probe", "Linear probing of hidden states")->require_subcommand(1);
  std::string dumps_dir;
  ProbeConfig pcfg;
  auto* pr_sweep = probe->add_subcommand("sweep", "Cross-validated probe accuracy per layer");
  add_common(pr_sweep, common);
  pr_sweep->add_option("--dumps", dumps_dir, "Directory of HSD1 dumps")->required();
  pr_sweep->add_option("--folds", pcfg.folds, "Cross-validation folds")->capture_default_str();
  pr_sweep->add_option("--C", pcfg.c, "SVM regularization")->capture_default_str();
  pr_sweep->add_option("--epochs", pcfg.epochs, "SVM epochs")->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    const fs::path out = resolve_out(common.out);
    const unsigned jobs = common.jobs;

    if (gen_eval->parsed()) {
      const Dataset d = build_eval_set(common.seed);
      write_dataset(d, out, {!no_images, jobs, std::nullopt});
      write_run_json(out, "gen synth-eval", common.seed, {{"images", !no_images}});
      report_dataset(out.string(), d);
    } else if (gen_train->parsed()) {
      const TrainValSplit s = build_train_set(common.seed);
      write_dataset(s.train, out / "train", {!no_images, jobs, std::nullopt});
      write_dataset(s.val, out / "val", {!no_images, jobs, std::nullopt});
      write_run_json(out, "gen synth-train", common.seed, {{"images", !no_images}});
      report_dataset((out / "train").string(), s.train);
      report_dataset((out / "val").string(), s.val);
    } else if (gen_coco->parsed()) {
      const AnnotationIndex idx = ingest_annotations(annotations);
      Dataset d = build_coco_set(idx, common.seed, split);
      ojson warn;
      warn["images_missing_dims"] = idx.warnings.images_missing_dims;
      warn["unknown_image_refs"] = idx.warnings.unknown_image_refs;
      warn["unknown_categories"] = idx.warnings.unknown_categories;
      warn["malformed_annotations"] = idx.warnings.malformed_annotations;
      warn["clamped_bboxes"] = idx.warnings.clamped_bboxes;
      d.notes["ingest"] = {{"images", idx.images.size()},
                           {"instances", idx.instance_count()},
                           {"categories", idx.categories.size()},
                           {"warnings", warn}};
      std::cout << "indexed " << idx.images.size() << " images, " << idx.instance_count()
                << " instances, " << idx.categories.size() << " categories ("
                << idx.warnings.total() << " warnings)\n";
      if (split == "train") {
        const TrainValSplit s = split_train_val(d, val_fraction, common.seed);
        write_dataset(s.train, out / "train");
        write_dataset(s.val, out / "val");
        report_dataset((out / "train").string(), s.train);
        report_dataset((out / "val").string(), s.val);
      } else {
        write_dataset(d, out);
        report_dataset(out.string(), d);
      }
      write_run_json(out, "gen coco", common.seed,
                     {{"annotations", annotations}, {"split", split}, {"val_fraction", val_fraction}});
    } else if (aug_d->parsed()) {
      const Dataset src = read_dataset(dataset_dir);
      const Dataset d = add_distractors(src, {k, allow_plus, allow_any_k}, common.seed);
      write_dataset(d, out, {!no_images, jobs, std::nullopt});
      write_run_json(out, "augment distractors", common.seed,
                     {{"dataset", dataset_dir}, {"k", k}, {"allow_plus", allow_plus},
                      {"allow_any_k", allow_any_k}, {"images", !no_images}});
      report_dataset(out.string(), d);
    } else if (sub_bal->parsed()) {
      const Dataset src = read_dataset(dataset_dir);
      const Dataset d = balanced_subset(src, n, common.seed);
      write_dataset(d, out, {false, jobs, fs::path(dataset_dir)});
      write_run_json(out, "subset balanced", common.seed, {{"dataset", dataset_dir}, {"n", n}});
      report_dataset(out.string(), d);
      if (d.notes["total_deficit"].get<std::size_t>() > 0) {
        std::cerr << "warning: " << d.notes["total_deficit"] << " samples short; see manifest region_deficit\n";
      }
    } else if (sub_scale->parsed()) {
      const std::vector<double> pct = parse_fractions(fractions);
      const Dataset src = read_dataset(dataset_dir);
      const std::vector<Dataset> subsets = scale_subsets(src, pct, common.seed);
      for (std::size_t i = 0; i < subsets.size(); ++i) {
        const fs::path dir = out / ("pct_" + percent_label(pct[i]));
        write_dataset(subsets[i], dir, {false, jobs, fs::path(dataset_dir)});
        report_dataset(dir.string(), subsets[i]);
      }
      write_run_json(out, "subset scale", common.seed, {{"dataset", dataset_dir}, {"fractions", pct}});
    } else if (ev_score->parsed()) {
      const Dataset d = read_dataset(dataset_dir);
      const std::vector<Prediction> preds = read_predictions(predictions);
      const EvalReport r = score(d, preds, retrieval ? ScoringMode::Retrieval : ScoringMode::Text);
      emit_reports(r, out);
      write_run_json(out, "eval score", 0,
                     {{"dataset", dataset_dir}, {"predictions", predictions}, {"retrieval", retrieval}});
      std::cout << "accuracy " << r.overall_accuracy << " (" << r.n_correct << "/" << r.n_total
                << "), valid rate " << r.valid_rate << "\n";
    } else if (ev_stub->parsed()) {
      const Dataset d = read_dataset(dataset_dir);
      if (stub_mode == "constant" && stub_label.empty()) throw ConfigError("--mode constant needs --label");
      std::vector<Prediction> preds;
      Rng rng(derive_seed(common.seed, "stub:random"));
      for (const auto& s : d.samples) {
        Prediction p;
        p.sample_id = s.id;
        if (stub_mode == "gold") {
          p.raw_text = std::string(to_string(s.gold));
        } else if (stub_mode == "constant") {
          p.raw_text = stub_label;
        } else {
          p.raw_text = std::string(kLabelNames[rng.below(kNumLabels)]);
        }
        preds.push_back(std::move(p));
      }
      ensure_directory(out);
      write_predictions(preds, out / "predictions.jsonl");
      write_run_json(out, "eval stub", common.seed,
                     {{"dataset", dataset_dir}, {"mode", stub_mode}, {"label", stub_label}});
      std::cout << (out / "predictions.jsonl").string() << ": " << preds.size() << " predictions\n";
    } else if (pr_sweep->parsed()) {
      pcfg.seed = common.seed;
      const std::vector<HiddenDump> dumps = read_dump_directory(dumps_dir);
      const std::vector<LayerResult> results = layer_sweep(dumps, pcfg, jobs);
      ensure_directory(out);
      write_file_atomic(out / "probe.csv", sweep_csv(results));
      write_json_file(out / "probe.json", sweep_json(results, pcfg));
      write_run_json(out, "probe sweep", common.seed,
                     {{"dumps", dumps_dir}, {"folds", pcfg.folds}, {"C", pcfg.c}, {"epochs", pcfg.epochs}});
      std::cout << sweep_csv(results);
    }
  } catch (const IoError& e) {
    std::cerr << "I/O error: " << e.what() << "\n";
    return 2;
  } catch (const fs::filesystem_error& e) {
    std::cerr << "I/O error: " << e.what() << "\n";
    return 2;
  } catch (const InputError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const nlohmann::json::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
