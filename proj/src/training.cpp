#include "sgcanon/training.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <thread>

#include "sgcanon/io.hpp"

namespace sgcanon {

using nlohmann::json;

std::string to_string(Mode mode) {
  switch (mode) {
    case Mode::baseline: return "baseline";
    case Mode::sgc_known: return "sgc-known";
    case Mode::wsgc_s: return "wsgc-s";
    case Mode::wsgc_e: return "wsgc-e";
  }
  return "?";
}

Mode mode_from_string(const std::string& name) {
  if (name == "baseline") return Mode::baseline;
  if (name == "sgc-known" || name == "sgc") return Mode::sgc_known;
  if (name == "wsgc-s") return Mode::wsgc_s;
  if (name == "wsgc-e") return Mode::wsgc_e;
  throw InputError("unknown mode '" + name + "'");
}

// ------------------------------------------------------------ TrainConfig

void TrainConfig::validate() const {
  if (!(lr_canon > 0.0) || !(lr_gcn > 0.0))
    throw DomainError("learning rates must be positive");
  if (layers < 0 || dim <= 0 || hidden <= 0 || box_hidden <= 0)
    throw ShapeError("invalid model dimensions");
  if (epochs < 0 || batch_size <= 0 || patience <= 0 || threads <= 0)
    throw InputError("epochs, batch size, patience and threads must be positive");
  if (mode == Mode::sgc_known && !formulas && formulas_path.empty())
    throw InputError("mode sgc-known requires a formula set");
  if (!(baseline_decay >= 0.0 && baseline_decay < 1.0))
    throw DomainError("baseline decay must lie in [0, 1)");
}

TrainConfig train_config_from_json(const json& j) {
  TrainConfig c;
  try {
    if (j.contains("mode")) c.mode = mode_from_string(j.at("mode").get<std::string>());
    c.layers = j.value("layers", c.layers);
    c.dim = j.value("dim", c.dim);
    c.hidden = j.value("hidden", c.hidden);
    c.box_hidden = j.value("box_hidden", c.box_hidden);
    c.epochs = j.value("epochs", c.epochs);
    c.batch_size = j.value("batch_size", c.batch_size);
    c.lr_canon = j.value("lr_canon", c.lr_canon);
    c.lr_gcn = j.value("lr_gcn", c.lr_gcn);
    c.seed = j.value("seed", c.seed);
    c.reinforce_baseline = j.value("reinforce_baseline", c.reinforce_baseline);
    c.baseline_decay = j.value("baseline_decay", c.baseline_decay);
    c.patience = j.value("patience", c.patience);
    c.prune_eps = j.value("prune_eps", c.prune_eps);
    c.threads = j.value("threads", c.threads);
    c.vocab_path = j.value("vocab", c.vocab_path);
    c.train_path = j.value("train", c.train_path);
    c.val_path = j.value("val", c.val_path);
    c.formulas_path = j.value("formulas", c.formulas_path);
    c.output_dir = j.value("output_dir", c.output_dir);
  } catch (const json::exception& e) {
    throw ParseError(std::string("malformed training config: ") + e.what());
  }
  return c;
}

json train_config_to_json(const TrainConfig& c) {
  return {{"mode", to_string(c.mode)},
          {"layers", c.layers},
          {"dim", c.dim},
          {"hidden", c.hidden},
          {"box_hidden", c.box_hidden},
          {"epochs", c.epochs},
          {"batch_size", c.batch_size},
          {"lr_canon", c.lr_canon},
          {"lr_gcn", c.lr_gcn},
          {"seed", c.seed},
          {"reinforce_baseline", c.reinforce_baseline},
          {"baseline_decay", c.baseline_decay},
          {"patience", c.patience},
          {"prune_eps", c.prune_eps},
          {"threads", c.threads}};
}

// ------------------------------------------------------------------ report

void write_report_csv(const std::filesystem::path& path, const TrainReport& report,
                      const RelationVocab& vocab) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw InputError("cannot write '" + path.string() + "'");
  const int nr = vocab.num_relations();
  out << "epoch,loss,miou,r03,r05";
  for (int r = 0; r < nr; ++r) out << ",p_trans:" << vocab.relation_name(r);
  for (int r = 0; r < nr; ++r) {
    for (int k = 0; k <= nr; ++k)
      out << ",p_conv:" << vocab.relation_name(r) << "|"
          << (k == nr ? std::string("none") : vocab.relation_name(k));
  }
  out << '\n';
  out.precision(10);
  for (const auto& e : report.epochs) {
    out << e.epoch << ',' << e.loss << ',' << e.miou << ',' << e.r03 << ',' << e.r05;
    for (int r = 0; r < nr; ++r) out << ',' << e.p_trans[r];
    for (int r = 0; r < nr; ++r)
      for (int k = 0; k <= nr; ++k) out << ',' << e.p_conv(r, k);
    out << '\n';
  }
}

json report_summary(const TrainReport& report, const RelationVocab& vocab) {
  json j;
  j["epochs"] = report.epochs.size();
  j["best_epoch"] = report.best_epoch;
  j["best_miou"] = report.best_miou;
  j["stopped_early"] = report.stopped_early;
  j["aborted"] = report.aborted;
  j["message"] = report.message;
  if (!report.epochs.empty()) {
    const auto& last = report.epochs.back();
    j["final_loss"] = last.loss;
    json pt = json::object();
    for (int r = 0; r < vocab.num_relations(); ++r)
      pt[vocab.relation_name(r)] = last.p_trans[r];
    j["p_trans"] = pt;
    json pc = json::object();
    for (int r = 0; r < vocab.num_relations(); ++r) {
      json row = json::object();
      for (int k = 0; k <= vocab.num_relations(); ++k)
        row[k == vocab.num_relations() ? "none" : vocab.relation_name(k)] =
            last.p_conv(r, k);
      pc[vocab.relation_name(r)] = row;
    }
    j["p_conv"] = pc;
  }
  return j;
}

// ------------------------------------------------------------------ losses

double l1_loss(const Layout& pred, const Layout& gt) {
  if (pred.size() != gt.size())
    throw ShapeError("L1 loss needs equal box counts: " + std::to_string(pred.size()) +
                     " vs " + std::to_string(gt.size()));
  if (gt.size() == 0) return 0.0;
  double sum = 0.0;
  for (std::size_t i = 0; i < gt.size(); ++i)
    for (int c = 0; c < 4; ++c) sum += std::abs(pred[i][c] - gt[i][c]);
  return sum / (4.0 * static_cast<double>(gt.size()));
}

Eigen::MatrixXd l1_loss_grad(const Layout& pred, const Layout& gt) {
  if (pred.size() != gt.size()) throw ShapeError("L1 loss needs equal box counts");
  const auto n = static_cast<Eigen::Index>(gt.size());
  Eigen::MatrixXd g(n, 4);
  const double scale = n > 0 ? 1.0 / (4.0 * static_cast<double>(n)) : 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    for (int c = 0; c < 4; ++c) {
      const double d = pred[i][c] - gt[i][c];
      g(i, c) = d > 0.0 ? scale : (d < 0.0 ? -scale : 0.0);
    }
  }
  return g;
}

Eigen::MatrixXd reinforce_grad(const SampleRecord& sample, double reward,
                               const CanonParams& params) {
  const int nr = params.num_relations();
  Eigen::MatrixXd grad = Eigen::MatrixXd::Zero(nr, nr + 1);
  if (sample.entries.empty() || reward == 0.0) return grad;
  std::vector<int> counts(nr, 0);
  for (const auto& s : sample.entries) {
    const int r = s.edge.relation;
    if (r < 0 || r >= nr || s.choice < 0 || s.choice > nr)
      throw VocabError("sample entry out of range");
    ++counts[r];
    grad(r, s.choice) += 1.0;
  }
  // sum_e (onehot(Z_e) - p(. | r_e)) grouped by relation
  for (int r = 0; r < nr; ++r) {
    if (counts[r] == 0) continue;
    grad.row(r) -= counts[r] * p_conv(params, r).transpose();
  }
  grad *= reward;
  tie_conv_gradient(grad);
  return grad;
}

// --------------------------------------------------------------- inference

WeightedSceneGraph canonicalize_for_inference(Mode mode, const SceneGraph& g,
                                              const CanonParams& params,
                                              const FormulaSet* formulas,
                                              double prune_eps) {
  switch (mode) {
    case Mode::baseline:
      return WeightedSceneGraph::from_unweighted(g);
    case Mode::sgc_known:
      if (!formulas) throw InputError("sgc-known needs a formula set");
      return WeightedSceneGraph::from_unweighted(sgc(g, *formulas));
    case Mode::wsgc_s: {
      const auto choices = most_likely_choices(g, params);
      return wsgc_s_assigned(g, params, choices, {prune_eps}).graph;
    }
    case Mode::wsgc_e:
      return wsgc_e(g, params, {prune_eps}).graph;
  }
  throw InputError("unknown mode");
}

Layout predict(Mode mode, const SceneGraph& g, const GcnModel& model,
               const CanonParams& params, const FormulaSet* formulas,
               double prune_eps) {
  return gcn_forward(canonicalize_for_inference(mode, g, params, formulas, prune_eps),
                     model)
      .first;
}

std::vector<Layout> predict_all(Mode mode, const std::vector<SceneRecord>& scenes,
                                const GcnModel& model, const CanonParams& params,
                                const FormulaSet* formulas, double prune_eps) {
  std::vector<Layout> out;
  out.reserve(scenes.size());
  for (const auto& s : scenes)
    out.push_back(predict(mode, s.graph, model, params, formulas, prune_eps));
  return out;
}

// ---------------------------------------------------------------- training

SceneStep scene_step(Mode mode, const SceneRecord& scene, const GcnModel& model,
                     const CanonParams& params, const FormulaSet* formulas,
                     Rng& rng, double prune_eps, double reward_offset) {
  if (!scene.layout) throw InputError("training scene has no ground-truth layout");
  const int nr = params.num_relations();
  SceneStep step;
  step.canon = CanonGradient::zeros(nr);

  std::optional<WsgcSResult> sampled;
  std::optional<WsgcEResult> exact;
  WeightedSceneGraph wg;
  switch (mode) {
    case Mode::baseline:
      wg = WeightedSceneGraph::from_unweighted(scene.graph);
      break;
    case Mode::sgc_known:
      if (!formulas) throw InputError("sgc-known needs a formula set");
      wg = WeightedSceneGraph::from_unweighted(sgc(scene.graph, *formulas));
      break;
    case Mode::wsgc_s:
      sampled = wsgc_s(scene.graph, params, rng, {prune_eps});
      wg = sampled->graph;
      break;
    case Mode::wsgc_e:
      exact = wsgc_e(scene.graph, params, {prune_eps});
      wg = exact->graph;
      break;
  }

  auto [layout, tape] = gcn_forward(wg, model);
  step.loss = l1_loss(layout, *scene.layout);
  step.gcn = gcn_backward(tape, model, l1_loss_grad(layout, *scene.layout));

  if (sampled) {
    step.canon.trans = trans_grad_wsgc_s(*sampled, params, step.gcn.edge_weights);
    step.canon.conv =
        reinforce_grad(sampled->sample, step.loss - reward_offset, params);
    step.sample = std::move(sampled->sample);
  } else if (exact) {
    step.canon = subgrad_wsgc_e(exact->trace, params, step.gcn.edge_weights);
  }
  return step;
}

namespace {

struct Accumulator {
  GcnModel gcn;
  CanonGradient canon;
  double loss = 0.0;
  bool finite = true;
};

Eigen::MatrixXd all_p_conv(const CanonParams& params) {
  const int nr = params.num_relations();
  Eigen::MatrixXd out(nr, nr + 1);
  for (int r = 0; r < nr; ++r) out.row(r) = p_conv(params, r).transpose();
  return out;
}

Eigen::VectorXd all_p_trans(const CanonParams& params) {
  Eigen::VectorXd out(params.num_relations());
  for (int r = 0; r < params.num_relations(); ++r) out[r] = p_trans(params, r);
  return out;
}

}  // namespace

TrainResult train(const TrainConfig& config, const RelationVocab& vocab,
                  const std::vector<SceneRecord>& train_set,
                  const std::vector<SceneRecord>& val_set) {
  config.validate();
  if (train_set.empty()) throw InputError("training set is empty");
  if (val_set.empty()) throw InputError("validation set is empty");
  for (const auto* set : {&train_set, &val_set})
    for (const auto& s : *set)
      if (!s.layout) throw InputError("every scene needs a ground-truth layout");
  const FormulaSet* formulas = config.formulas ? &*config.formulas : nullptr;
  if (config.mode == Mode::sgc_known && !formulas)
    throw InputError("mode sgc-known requires a formula set");

  const int nr = vocab.num_relations();
  GcnDims dims{vocab.num_categories(), nr, config.dim, config.hidden,
               config.box_hidden, config.layers};
  Rng init_rng(derive_seed(config.seed, 0x1417));
  TrainResult result{GcnModel::init(dims, init_rng), CanonParams::initial(nr), {}};
  GcnModel& model = result.model;
  CanonParams& params = result.params;

  std::vector<std::size_t> sizes;
  for (auto t : model.tensors()) sizes.push_back(t.size());
  Adam gcn_opt({config.lr_gcn}, sizes);
  Adam canon_opt({config.lr_canon},
                 {static_cast<std::size_t>(nr), static_cast<std::size_t>(nr * (nr + 1))});
  const bool learn_canon = config.mode == Mode::wsgc_s || config.mode == Mode::wsgc_e;

  GcnModel best_model = model;
  CanonParams best_params = params;
  double best_miou = -1.0;
  int since_best = 0;
  double reward_baseline = 0.0;
  bool baseline_ready = false;

  const auto n_train = static_cast<int>(train_set.size());
  std::vector<int> order(n_train);
  std::iota(order.begin(), order.end(), 0);
  auto& report = result.report;

  for (int epoch = 1; epoch <= config.epochs && !report.aborted; ++epoch) {
    Rng shuffle_rng(derive_seed(config.seed, 0x5e11, epoch));
    for (int i = n_train - 1; i > 0; --i)
      std::swap(order[i], order[uniform_int(shuffle_rng, i + 1)]);

    double epoch_loss = 0.0;
    for (int start = 0; start < n_train; start += config.batch_size) {
      const int stop = std::min(n_train, start + config.batch_size);
      const int count = stop - start;
      const double offset =
          config.reinforce_baseline && baseline_ready ? reward_baseline : 0.0;

      const int workers = std::min(config.threads, count);
      std::vector<Accumulator> acc(workers);
      auto run_slice = [&](int w) {
        Accumulator& a = acc[w];
        a.gcn = GcnModel::zeros_like(model);
        a.canon = CanonGradient::zeros(nr);
        const int lo = start + count * w / workers;
        const int hi = start + count * (w + 1) / workers;
        for (int b = lo; b < hi; ++b) {
          const int idx = order[b];
          Rng rng(derive_seed(config.seed, epoch, static_cast<std::uint64_t>(idx) + 1));
          SceneStep s;
          try {
            s = scene_step(config.mode, train_set[idx], model, params, formulas, rng,
                           config.prune_eps, offset);
          } catch (const NumericError&) {
            a.finite = false;
            return;
          }
          if (!std::isfinite(s.loss)) a.finite = false;
          a.loss += s.loss;
          a.gcn += s.gcn.model;
          a.canon += s.canon;
        }
      };
      if (workers == 1) {
        run_slice(0);
      } else {
        std::vector<std::thread> pool;
        for (int w = 0; w < workers; ++w) pool.emplace_back(run_slice, w);
        for (auto& t : pool) t.join();
      }
      Accumulator& total = acc[0];
      for (int w = 1; w < workers; ++w) {
        total.loss += acc[w].loss;
        total.finite = total.finite && acc[w].finite;
        total.gcn += acc[w].gcn;
        total.canon += acc[w].canon;
      }
      if (!total.finite || !std::isfinite(total.loss)) {
        report.aborted = true;
        report.message = "non-finite loss in epoch " + std::to_string(epoch);
        break;
      }
      const double inv = 1.0 / count;
      total.gcn *= inv;
      total.canon *= inv;
      epoch_loss += total.loss;

      try {
        const auto grads = static_cast<const GcnModel&>(total.gcn).tensors();
        gcn_opt.step(model.tensors(), grads);
        if (learn_canon) {
          canon_opt.step(
              {std::span<double>(params.theta_trans.data(), params.theta_trans.size()),
               std::span<double>(params.theta_conv.data(), params.theta_conv.size())},
              {std::span<const double>(total.canon.trans.data(), total.canon.trans.size()),
               std::span<const double>(total.canon.conv.data(), total.canon.conv.size())});
          params.symmetrize();
        }
      } catch (const NumericError& e) {
        report.aborted = true;
        report.message = std::string(e.what()) + " in epoch " + std::to_string(epoch);
        break;
      }

      const double batch_reward = total.loss * inv;
      reward_baseline = baseline_ready ? config.baseline_decay * reward_baseline +
                                             (1.0 - config.baseline_decay) * batch_reward
                                       : batch_reward;
      baseline_ready = true;
    }
    if (report.aborted) break;

    std::vector<Layout> preds;
    try {
      preds = predict_all(config.mode, val_set, model, params, formulas, config.prune_eps);
    } catch (const NumericError& e) {
      report.aborted = true;
      report.message = std::string(e.what()) + " in epoch " + std::to_string(epoch);
      break;
    }
    std::vector<Layout> gts;
    for (const auto& s : val_set) gts.push_back(*s.layout);
    const EvalResult ev = evaluate(preds, gts);

    EpochStats stats;
    stats.epoch = epoch;
    stats.loss = epoch_loss / n_train;
    stats.miou = ev.miou;
    stats.r03 = ev.r03;
    stats.r05 = ev.r05;
    stats.p_trans = all_p_trans(params);
    stats.p_conv = all_p_conv(params);
    report.epochs.push_back(std::move(stats));

    // Improvements below the threshold are rounding noise, not progress.
    if (ev.miou > best_miou + 1e-9) {
      best_miou = ev.miou;
      best_model = model;
      best_params = params;
      report.best_epoch = epoch;
      since_best = 0;
    } else if (++since_best >= config.patience) {
      report.stopped_early = true;
      break;
    }
  }

  report.best_miou = std::max(best_miou, 0.0);
  if (report.aborted) {
    // Current state is the last one that passed the finite checks.
    if (best_miou < 0.0) {
      best_model = model;
      best_params = params;
    }
  }
  if (best_miou >= 0.0 || report.aborted) {
    model = std::move(best_model);
    params = std::move(best_params);
  }
  return result;
}

// ------------------------------------------------------------ checkpoints

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt) {
  json j;
  j["format"] = "sgcanon-checkpoint";
  j["version"] = kCheckpointFormatVersion;
  j["mode"] = to_string(ckpt.mode);
  j["vocab"] = vocab_to_json(ckpt.vocab);
  if (ckpt.formulas) j["formulas"] = formulas_to_json(*ckpt.formulas, ckpt.vocab);
  j["canon"] = params_to_json(ckpt.params);
  j["prune_eps"] = ckpt.prune_eps;
  j["model"] = model_to_json(ckpt.model);
  write_json_file(path, j);
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  const json j = read_json_file(path);
  try {
    if (j.at("format") != "sgcanon-checkpoint")
      throw ParseError("'" + path.string() + "' is not a checkpoint");
    if (j.at("version").get<int>() != kCheckpointFormatVersion)
      throw ParseError("unsupported checkpoint version");
    Checkpoint c;
    c.mode = mode_from_string(j.at("mode").get<std::string>());
    c.vocab = vocab_from_json(j.at("vocab"));
    if (j.contains("formulas")) c.formulas = formulas_from_json(j.at("formulas"), c.vocab);
    c.params = params_from_json(j.at("canon"));
    c.prune_eps = j.value("prune_eps", 1e-4);
    c.model = model_from_json(j.at("model"));
    return c;
  } catch (const json::exception& e) {
    throw ParseError(std::string("malformed checkpoint: ") + e.what());
  }
}

}  // namespace sgcanon
