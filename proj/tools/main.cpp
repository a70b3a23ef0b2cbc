// Command-line driver. Exit codes: 0 success, 1 validation error, 2 runtime
// failure.

#include <cstdio>
#include <fstream>
#include <iostream>

#include "CLI11.hpp"
#include "sgcanon/data.hpp"
#include "sgcanon/experiment.hpp"
#include "sgcanon/io.hpp"
#include "sgcanon/render.hpp"
#include "sgcanon/training.hpp"

using namespace sgcanon;
using nlohmann::json;

namespace {

std::vector<SceneRecord> load_scenes(const std::string& path, const RelationVocab& vocab) {
  return read_graphs(std::filesystem::path(path), vocab);
}

int cmd_gen_data(const std::string& config_path, int count, const std::string& out,
                 const std::string& vocab_out, std::optional<std::uint64_t> seed) {
  SynthConfig config = synth_config_from_json(read_json_file(config_path));
  if (seed) config.seed = *seed;
  if (count < 0) throw InputError("--count must be non-negative");
  const auto scenes = synth_generate(config, count);
  const RelationVocab vocab = synth_vocab(config);
  write_graphs(std::filesystem::path(out), scenes, vocab);
  if (!vocab_out.empty()) write_vocab(vocab_out, vocab);
  return 0;
}

int cmd_canonicalize(const std::string& mode, const std::string& vocab_path,
                     const std::string& formulas_path, const std::string& params_path,
                     std::uint64_t seed, double eps, const std::string& in,
                     const std::string& out) {
  const RelationVocab vocab = read_vocab(vocab_path);
  const auto scenes = load_scenes(in, vocab);
  std::vector<WeightedSceneRecord> results;
  if (mode == "sgc") {
    if (formulas_path.empty()) throw InputError("mode sgc needs --formulas");
    const FormulaSet f = read_formulas(formulas_path, vocab);
    for (const auto& s : scenes)
      results.push_back({WeightedSceneGraph::from_unweighted(sgc(s.graph, f)), s.layout});
  } else {
    if (params_path.empty()) throw InputError("mode " + mode + " needs --params");
    const CanonParams p = read_params(params_path);
    if (p.num_relations() != vocab.num_relations())
      throw ShapeError("parameter file does not match the vocabulary size");
    for (std::size_t i = 0; i < scenes.size(); ++i) {
      if (mode == "wsgc-e") {
        results.push_back({wsgc_e(scenes[i].graph, p, {eps}).graph, scenes[i].layout});
      } else if (mode == "wsgc-s") {
        Rng rng(derive_seed(seed, i));
        results.push_back({wsgc_s(scenes[i].graph, p, rng, {eps}).graph, scenes[i].layout});
      } else {
        throw InputError("unknown mode '" + mode + "'");
      }
    }
  }
  write_weighted_graphs(out, results, vocab);
  return 0;
}

int cmd_transform(const std::string& kind, const std::string& vocab_path,
                  const std::string& formulas_path, const std::string& synth_path,
                  double fraction, std::uint64_t seed, const std::string& in,
                  const std::string& out) {
  const RelationVocab vocab = read_vocab(vocab_path);
  auto scenes = load_scenes(in, vocab);
  if (kind == "equivalent") {
    if (formulas_path.empty()) throw InputError("equivalent transform needs --formulas");
    const FormulaSet f = read_formulas(formulas_path, vocab);
    SynthConfig config;
    if (!synth_path.empty()) config = synth_config_from_json(read_json_file(synth_path));
    for (std::size_t i = 0; i < scenes.size(); ++i) {
      Rng rng(derive_seed(seed, i));
      scenes[i].graph =
          semantic_equivalent_transform(scenes[i].graph, scenes[i].layout, f, config, rng);
    }
  } else if (kind == "noise") {
    for (std::size_t i = 0; i < scenes.size(); ++i) {
      Rng rng(derive_seed(seed, i));
      scenes[i].graph = noise_transform(scenes[i].graph, vocab.num_relations(), fraction, rng);
    }
  } else {
    throw InputError("unknown transform '" + kind + "'");
  }
  write_graphs(std::filesystem::path(out), scenes, vocab);
  return 0;
}

int cmd_train(const std::string& config_path, std::optional<std::uint64_t> seed,
              std::optional<std::string> out_override) {
  const std::filesystem::path cfg_file(config_path);
  TrainConfig config = train_config_from_json(read_json_file(cfg_file));
  if (seed) config.seed = *seed;
  if (out_override) config.output_dir = *out_override;
  // Relative dataset paths resolve against the config file's directory.
  auto resolve = [&](const std::string& p) {
    std::filesystem::path path(p);
    return path.is_relative() ? cfg_file.parent_path() / path : path;
  };
  if (config.vocab_path.empty() || config.train_path.empty() || config.val_path.empty())
    throw InputError("config needs vocab, train and val paths");
  const RelationVocab vocab = read_vocab(resolve(config.vocab_path));
  if (!config.formulas_path.empty())
    config.formulas = read_formulas(resolve(config.formulas_path), vocab);
  const auto train_set = read_graphs(resolve(config.train_path), vocab);
  const auto val_set = read_graphs(resolve(config.val_path), vocab);
  const std::filesystem::path out =
      config.output_dir.empty() ? std::filesystem::path("train_out") : resolve(config.output_dir);

  TrainResult r = train(config, vocab, train_set, val_set);
  write_report_csv(out / "report.csv", r.report, vocab);
  json summary = report_summary(r.report, vocab);
  summary["config"] = train_config_to_json(config);
  write_json_file(out / "summary.json", summary);
  save_checkpoint(out / "checkpoint.json",
                  {config.mode, vocab, config.formulas, r.params, r.model, config.prune_eps});
  std::cout << summary.dump(2) << '\n';
  if (r.report.aborted) {
    std::cerr << "training aborted: " << r.report.message << '\n';
    return 2;
  }
  return 0;
}

int cmd_predict(const std::string& checkpoint, const std::string& in, const std::string& out) {
  const Checkpoint c = load_checkpoint(checkpoint);
  auto scenes = load_scenes(in, c.vocab);
  const FormulaSet* f = c.formulas ? &*c.formulas : nullptr;
  for (auto& s : scenes) s.layout = predict(c.mode, s.graph, c.model, c.params, f, c.prune_eps);
  write_graphs(std::filesystem::path(out), scenes, c.vocab);
  return 0;
}

int cmd_eval(const std::string& vocab_path, const std::string& pred_path,
             const std::string& gt_path, const std::string& out) {
  const RelationVocab vocab = read_vocab(vocab_path);
  const auto pred = load_scenes(pred_path, vocab);
  const auto gt = load_scenes(gt_path, vocab);
  std::vector<Layout> p, g;
  for (const auto& s : pred) {
    if (!s.layout) throw InputError("prediction record without boxes");
    p.push_back(*s.layout);
  }
  for (const auto& s : gt) {
    if (!s.layout) throw InputError("ground-truth record without boxes");
    g.push_back(*s.layout);
  }
  const EvalResult r = evaluate(p, g);
  json j{{"miou", r.miou}, {"r03", r.r03}, {"r05", r.r05}, {"objects", r.objects}};
  json scenes = json::array();
  for (const auto& s : r.per_scene)
    scenes.push_back({{"miou", s.miou}, {"r03", s.r03}, {"r05", s.r05}, {"objects", s.objects}});
  j["per_scene"] = scenes;
  if (!out.empty()) write_json_file(out, j);
  std::cout << json{{"miou", r.miou}, {"r03", r.r03}, {"r05", r.r05}, {"objects", r.objects}}
                   .dump(2)
            << '\n';
  return 0;
}

int cmd_experiment(const std::string& spec_path, const std::string& out_dir,
                   std::optional<int> workers, std::optional<std::uint64_t> seed) {
  ExperimentSpec spec = experiment_from_json(read_json_file(spec_path));
  if (workers) spec.workers = *workers;
  if (seed) spec.seed = *seed;
  const ExperimentReport r = run_experiment(spec, out_dir);
  for (const auto& c : r.cells) {
    std::printf("%-10s L=%d n=%-4d %s", to_string(c.mode).c_str(), c.layers, c.objects,
                c.ok ? "ok" : "FAILED");
    if (c.ok)
      std::printf(" miou=%.4f r03=%.4f r05=%.4f\n", c.test.miou, c.test.r03, c.test.r05);
    else
      std::printf(" (%s)\n", c.error.c_str());
  }
  std::printf("%zu cells, %d failed\n", r.cells.size(), r.failures);
  return r.failures > 0 ? 2 : 0;
}

int cmd_render(const std::string& vocab_path, const std::string& in, const std::string& out_dir,
               int size) {
  const RelationVocab vocab = read_vocab(vocab_path);
  const auto scenes = load_scenes(in, vocab);
  std::filesystem::create_directories(out_dir);
  for (std::size_t i = 0; i < scenes.size(); ++i) {
    if (!scenes[i].layout) throw InputError("scene " + std::to_string(i) + " has no boxes");
    char name[32];
    std::snprintf(name, sizeof name, "scene_%05zu.svg", i);
    std::ofstream f(std::filesystem::path(out_dir) / name);
    f << rasterize(*scenes[i].layout, scenes[i].graph, vocab, size);
  }
  return 0;
}

int cmd_plot(const std::string& csv, const std::string& x, const std::string& y,
             const std::string& group, const std::string& out) {
  const Plot p = plot_from_table(read_csv(csv), x, y, group);
  std::ofstream f(out);
  if (!f) throw InputError("cannot write '" + out + "'");
  f << plot_svg(p);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Scene-graph canonicalization and layout prediction"};
  app.require_subcommand(1);
  std::function<int()> action;

  std::string vocab, in, out, formulas, params, mode = "sgc", kind, synth, config, spec,
                                                out_dir, pred, gt, checkpoint, csv, x_col,
                                                y_col, group;
  std::uint64_t seed = 0;
  std::optional<std::uint64_t> seed_opt;
  std::optional<int> workers;
  std::optional<std::string> out_opt;
  int count = 0, size = 256;
  double eps = 1e-4, fraction = 0.1;

  auto* gen = app.add_subcommand("gen-data", "Generate synthetic scenes");
  gen->add_option("--synth-config", config, "Synthetic config JSON")->required();
  gen->add_option("--count", count, "Number of scenes")->required();
  gen->add_option("--out", out, "Output JSON-lines")->required();
  gen->add_option("--vocab-out", vocab, "Also write the vocabulary here");
  gen->add_option("--seed", seed_opt, "Overrides the config seed");
  gen->callback([&] { action = [&] { return cmd_gen_data(config, count, out, vocab, seed_opt); }; });

  auto* canon = app.add_subcommand("canonicalize", "Complete scene graphs");
  canon->add_option("--mode", mode, "sgc | wsgc-e | wsgc-s")
      ->check(CLI::IsMember({"sgc", "wsgc-e", "wsgc-s"}));
  canon->add_option("--vocab", vocab)->required();
  canon->add_option("--formulas", formulas);
  canon->add_option("--params", params);
  canon->add_option("--seed", seed);
  canon->add_option("--eps", eps, "Pruning threshold");
  canon->add_option("--in", in)->required();
  canon->add_option("--out", out)->required();
  canon->callback([&] {
    action = [&] { return cmd_canonicalize(mode, vocab, formulas, params, seed, eps, in, out); };
  });

  auto* tr = app.add_subcommand("transform", "Equivalent or noisy graph variants");
  tr->add_option("--kind", kind)->required()->check(CLI::IsMember({"equivalent", "noise"}));
  tr->add_option("--vocab", vocab)->required();
  tr->add_option("--formulas", formulas);
  tr->add_option("--synth-config", synth, "Geometry thresholds for the equivalent transform");
  tr->add_option("--fraction", fraction, "Relabelled edge fraction for noise");
  tr->add_option("--seed", seed);
  tr->add_option("--in", in)->required();
  tr->add_option("--out", out)->required();
  tr->callback([&] {
    action = [&] { return cmd_transform(kind, vocab, formulas, synth, fraction, seed, in, out); };
  });

  auto* train_cmd = app.add_subcommand("train", "Train a layout model");
  train_cmd->add_option("--config", config)->required();
  train_cmd->add_option("--seed", seed_opt);
  train_cmd->add_option("--out-dir", out_opt);
  train_cmd->callback([&] { action = [&] { return cmd_train(config, seed_opt, out_opt); }; });

  auto* pr = app.add_subcommand("predict", "Predict layouts with a checkpoint");
  pr->add_option("--checkpoint", checkpoint)->required();
  pr->add_option("--in", in)->required();
  pr->add_option("--out", out)->required();
  pr->callback([&] { action = [&] { return cmd_predict(checkpoint, in, out); }; });

  auto* ev = app.add_subcommand("eval", "mIOU and recall of predicted layouts");
  ev->add_option("--vocab", vocab)->required();
  ev->add_option("--pred", pred)->required();
  ev->add_option("--gt", gt)->required();
  ev->add_option("--out", out, "Optional JSON with per-scene scores");
  ev->callback([&] { action = [&] { return cmd_eval(vocab, pred, gt, out); }; });

  auto* ex = app.add_subcommand("experiment", "Run an experiment grid");
  ex->add_option("--spec", spec)->required();
  ex->add_option("--out-dir", out_dir)->required();
  ex->add_option("--workers", workers);
  ex->add_option("--seed", seed_opt);
  ex->callback([&] { action = [&] { return cmd_experiment(spec, out_dir, workers, seed_opt); }; });

  auto* rd = app.add_subcommand("render", "Draw layouts as SVG");
  rd->add_option("--vocab", vocab)->required();
  rd->add_option("--in", in)->required();
  rd->add_option("--out-dir", out_dir)->required();
  rd->add_option("--size", size);
  rd->callback([&] { action = [&] { return cmd_render(vocab, in, out_dir, size); }; });

  auto* pl = app.add_subcommand("plot", "Line chart from a CSV");
  pl->add_option("--csv", csv)->required();
  pl->add_option("--x", x_col)->required();
  pl->add_option("--y", y_col)->required();
  pl->add_option("--group", group);
  pl->add_option("--out", out)->required();
  pl->callback([&] { action = [&] { return cmd_plot(csv, x_col, y_col, group, out); }; });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }
  try {
    return action ? action() : 1;
  } catch (const ValidationError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "failure: " << e.what() << '\n';
    return 2;
  }
}
