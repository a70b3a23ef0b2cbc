#include "sgcanon/experiment.hpp"

#include <atomic>
#include <fstream>
#include <map>
#include <mutex>
#include <set>
#include <thread>

#include "sgcanon/io.hpp"
#include "sgcanon/render.hpp"

namespace sgcanon {

using nlohmann::json;

ExperimentSpec experiment_from_json(const json& j) {
  ExperimentSpec s;
  try {
    s.name = j.value("name", s.name);
    s.seed = j.value("seed", s.seed);
    s.workers = j.value("workers", s.workers);
    if (j.contains("synth")) s.synth = synth_config_from_json(j.at("synth"));
    s.train_count = j.value("train_count", s.train_count);
    s.val_count = j.value("val_count", s.val_count);
    s.test_count = j.value("test_count", s.test_count);
    if (j.contains("train")) s.train = j.at("train");
    if (j.contains("grid")) {
      const auto& g = j.at("grid");
      for (const auto& m : g.value("modes", json::array()))
        s.modes.push_back(mode_from_string(m.get<std::string>()));
      s.layers = g.value("layers", std::vector<int>{});
      s.objects = g.value("objects", std::vector<int>{});
    }
    if (j.contains("generalization")) {
      const auto& g = j.at("generalization");
      ExperimentSpec::Generalization gen;
      gen.train_objects = g.value("train_objects", gen.train_objects);
      gen.eval_objects = g.value("eval_objects", std::vector<int>{});
      s.generalization = gen;
    }
    if (j.contains("robustness")) {
      ExperimentSpec::Robustness rob;
      rob.noise_fraction = j.at("robustness").value("noise_fraction", rob.noise_fraction);
      s.robustness = rob;
    }
    s.save_checkpoints = j.value("save_checkpoints", s.save_checkpoints);
    s.plots = j.value("plots", s.plots);
  } catch (const json::exception& e) {
    throw ParseError(std::string("malformed experiment spec: ") + e.what());
  }
  if (s.workers < 1) throw InputError("workers must be positive");
  if (s.train_count < 1 || s.val_count < 1 || s.test_count < 1)
    throw InputError("split sizes must be positive");
  for (int n : s.objects)
    if (n < 1) throw InputError("object counts must be positive");
  for (int l : s.layers)
    if (l < 0) throw InputError("layer counts must be non-negative");
  train_config_from_json(s.train);  // surface config errors before any work
  return s;
}

namespace {

std::vector<SceneRecord> split(const ExperimentSpec& spec, int objects, int which,
                               int count) {
  SynthConfig c = spec.synth;
  c.min_objects = c.max_objects = objects;
  c.seed = derive_seed(spec.seed, 0xDA7A0000ULL + objects, which);
  return synth_generate(c, count);
}

std::vector<Layout> layouts(const std::vector<SceneRecord>& scenes) {
  std::vector<Layout> out;
  for (const auto& s : scenes) out.push_back(*s.layout);
  return out;
}

std::string cell_name(Mode mode, int layers, int objects) {
  return to_string(mode) + "_L" + std::to_string(layers) + "_n" + std::to_string(objects);
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw InputError("cannot write '" + path.string() + "'");
  out << text;
}

struct Job {
  Mode mode;
  int layers;
  int objects;
};

struct Variants {
  std::vector<SceneRecord> equivalent;
  std::vector<SceneRecord> noisy;
};

}  // namespace

SplitData experiment_data(const ExperimentSpec& spec, int objects) {
  return {split(spec, objects, 0, spec.train_count), split(spec, objects, 1, spec.val_count),
          split(spec, objects, 2, spec.test_count)};
}

ExperimentReport run_experiment(const ExperimentSpec& spec,
                                const std::filesystem::path& out_dir) {
  std::filesystem::create_directories(out_dir);
  const RelationVocab vocab = synth_vocab(spec.synth);
  const FormulaSet formulas = synth_formulas(spec.synth);
  const TrainConfig base = train_config_from_json(spec.train);

  std::vector<Job> jobs;
  for (int n : spec.objects)
    for (int l : spec.layers)
      for (Mode m : spec.modes) jobs.push_back({m, l, n});

  // Shared read-only inputs, built before any worker starts.
  std::map<int, SplitData> data;
  std::map<int, Variants> variants;
  for (const auto& job : jobs) {
    if (data.count(job.objects)) continue;
    data[job.objects] = experiment_data(spec, job.objects);
    if (spec.robustness) {
      Variants v;
      SynthConfig sc = spec.synth;
      sc.min_objects = sc.max_objects = job.objects;
      const auto& test = data[job.objects].test;
      for (std::size_t i = 0; i < test.size(); ++i) {
        Rng rng(derive_seed(spec.seed, 0xE0000ULL + job.objects, i));
        v.equivalent.push_back(
            {semantic_equivalent_transform(test[i].graph, test[i].layout, formulas, sc, rng),
             test[i].layout});
        v.noisy.push_back({noise_transform(test[i].graph, vocab.num_relations(),
                                           spec.robustness->noise_fraction, rng),
                           test[i].layout});
      }
      variants[job.objects] = std::move(v);
    }
  }
  std::map<int, std::vector<SceneRecord>> gen_tests;
  if (spec.generalization)
    for (int n : spec.generalization->eval_objects)
      gen_tests[n] = split(spec, n, 2, spec.test_count);

  ExperimentReport report;
  report.cells.resize(jobs.size());
  std::vector<std::vector<GeneralizationRow>> gen_rows(jobs.size());
  std::vector<std::vector<RobustnessRow>> rob_rows(jobs.size());

  auto run_cell = [&](std::size_t index) {
    const Job& job = jobs[index];
    CellResult& cell = report.cells[index];
    cell.mode = job.mode;
    cell.layers = job.layers;
    cell.objects = job.objects;
    const auto dir = out_dir / "cells" / cell_name(job.mode, job.layers, job.objects);
    try {
      TrainConfig config = base;
      config.mode = job.mode;
      config.layers = job.layers;
      config.threads = 1;
      // Same initialization for every mode of a (layers, objects) pair.
      config.seed = derive_seed(spec.seed, job.layers, job.objects);
      config.formulas = formulas;
      const SplitData& d = data.at(job.objects);
      TrainResult r = train(config, vocab, d.train, d.val);
      if (r.report.aborted) throw NumericError(r.report.message);

      const FormulaSet* f = &formulas;
      auto eval_on = [&](const std::vector<SceneRecord>& scenes) {
        return evaluate(predict_all(job.mode, scenes, r.model, r.params, f, config.prune_eps),
                        layouts(scenes));
      };
      cell.test = eval_on(d.test);
      cell.val_miou = r.report.best_miou;
      cell.best_epoch = r.report.best_epoch;
      cell.epochs_run = static_cast<int>(r.report.epochs.size());
      if (!r.report.epochs.empty()) {
        cell.p_trans = r.report.epochs.back().p_trans;
        cell.p_conv = r.report.epochs.back().p_conv;
      }
      if (spec.robustness) {
        const Variants& v = variants.at(job.objects);
        rob_rows[index].push_back({job.mode, job.layers, job.objects, "clean", cell.test});
        rob_rows[index].push_back(
            {job.mode, job.layers, job.objects, "equivalent", eval_on(v.equivalent)});
        rob_rows[index].push_back(
            {job.mode, job.layers, job.objects, "noisy", eval_on(v.noisy)});
      }
      if (spec.generalization && job.objects == spec.generalization->train_objects) {
        for (const auto& [n, scenes] : gen_tests)
          gen_rows[index].push_back({job.mode, job.layers, job.objects, n, eval_on(scenes)});
      }

      write_report_csv(dir / "report.csv", r.report, vocab);
      json summary = report_summary(r.report, vocab);
      summary["test_miou"] = cell.test.miou;
      summary["test_r03"] = cell.test.r03;
      summary["test_r05"] = cell.test.r05;
      summary["config"] = train_config_to_json(config);
      write_json_file(dir / "summary.json", summary);
      if (spec.save_checkpoints)
        save_checkpoint(dir / "checkpoint.json",
                        {job.mode, vocab, formulas, r.params, r.model, config.prune_eps});
      cell.ok = true;
    } catch (const std::exception& e) {
      cell.ok = false;
      cell.error = e.what();
    }
  };

  const int workers = std::max(1, std::min<int>(spec.workers, static_cast<int>(jobs.size())));
  if (workers <= 1) {
    for (std::size_t i = 0; i < jobs.size(); ++i) run_cell(i);
  } else {
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> pool;
    for (int w = 0; w < workers; ++w)
      pool.emplace_back([&] {
        for (std::size_t i; (i = next++) < jobs.size();) run_cell(i);
      });
    for (auto& t : pool) t.join();
  }

  // Aggregation in job order, independent of scheduling.
  for (std::size_t i = 0; i < jobs.size(); ++i) {
    if (!report.cells[i].ok) ++report.failures;
    for (auto& row : gen_rows[i]) report.generalization.push_back(std::move(row));
    for (auto& row : rob_rows[i]) report.robustness.push_back(std::move(row));
  }

  std::ofstream grid(out_dir / "grid.csv");
  grid.precision(10);
  grid << "mode,layers,objects,status,val_miou,miou,r03,r05,best_epoch,epochs,error\n";
  for (const auto& c : report.cells) {
    std::string err = c.error;
    for (char& ch : err)
      if (ch == ',' || ch == '\n') ch = ' ';
    grid << to_string(c.mode) << ',' << c.layers << ',' << c.objects << ','
         << (c.ok ? "ok" : "failed") << ',' << c.val_miou << ',' << c.test.miou << ','
         << c.test.r03 << ',' << c.test.r05 << ',' << c.best_epoch << ',' << c.epochs_run << ',' << err << '\n';
  }
  grid.close();

  std::ofstream gen(out_dir / "generalization.csv");
  gen.precision(10);
  gen << "mode,layers,train_objects,eval_objects,miou,r03,r05\n";
  for (const auto& r : report.generalization)
    gen << to_string(r.mode) << ',' << r.layers << ',' << r.train_objects << ','
        << r.eval_objects << ',' << r.result.miou << ',' << r.result.r03 << ','
        << r.result.r05 << '\n';
  gen.close();

  std::ofstream rob(out_dir / "robustness.csv");
  rob.precision(10);
  rob << "mode,layers,objects,condition,miou,r03,r05\n";
  for (const auto& r : report.robustness)
    rob << to_string(r.mode) << ',' << r.layers << ',' << r.objects << ',' << r.condition
        << ',' << r.result.miou << ',' << r.result.r03 << ',' << r.result.r05 << '\n';
  rob.close();

  if (spec.plots) {
    // IOU against object count, one chart per layer count.
    std::set<int> layer_set(spec.layers.begin(), spec.layers.end());
    for (int l : layer_set) {
      Plot p{"mIOU vs objects, L=" + std::to_string(l), "objects", "mIOU", {}};
      for (Mode m : spec.modes) {
        Series s{to_string(m), {}, {}};
        for (const auto& c : report.cells)
          if (c.ok && c.mode == m && c.layers == l) {
            s.x.push_back(c.objects);
            s.y.push_back(c.test.miou);
          }
        p.series.push_back(std::move(s));
      }
      write_text(out_dir / ("miou_L" + std::to_string(l) + ".svg"), plot_svg(p));
    }
    if (!report.generalization.empty()) {
      Plot p{"generalization", "eval objects", "mIOU", {}};
      std::map<std::string, std::size_t> idx;
      for (const auto& r : report.generalization) {
        const std::string key = to_string(r.mode) + " L=" + std::to_string(r.layers);
        auto [it, fresh] = idx.emplace(key, p.series.size());
        if (fresh) p.series.push_back({key, {}, {}});
        p.series[it->second].x.push_back(r.eval_objects);
        p.series[it->second].y.push_back(r.result.miou);
      }
      write_text(out_dir / "generalization.svg", plot_svg(p));
    }
  }

  json summary;
  summary["name"] = spec.name;
  summary["cells"] = report.cells.size();
  summary["failures"] = report.failures;
  write_json_file(out_dir / "report.json", summary);
  return report;
}

}  // namespace sgcanon
