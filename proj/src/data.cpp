#include "sgcanon/data.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace sgcanon {

void SynthConfig::validate() const {
  if (min_objects < 1 || max_objects < min_objects)
    throw InputError("object count range is empty");
  auto in_unit = [](double v) { return v > 0.0 && v < 1.0; };
  if (!in_unit(small_size) || !in_unit(large_size))
    throw DomainError("object sizes must lie in (0, 1)");
  if (!in_unit(x_near_threshold))
    throw DomainError("x-near threshold must lie in (0, 1)");
  if (!(keep_probability >= 0.0 && keep_probability <= 1.0))
    throw DomainError("keep probability must lie in [0, 1]");
}

SynthConfig synth_config_from_json(const nlohmann::json& j) {
  SynthConfig c;
  try {
    if (j.contains("n_objects")) {
      c.min_objects = c.max_objects = j.at("n_objects").get<int>();
    }
    c.min_objects = j.value("min_objects", c.min_objects);
    c.max_objects = j.value("max_objects", c.max_objects);
    c.small_size = j.value("small_size", c.small_size);
    c.large_size = j.value("large_size", c.large_size);
    c.x_near_threshold = j.value("x_near_threshold", c.x_near_threshold);
    c.keep_probability = j.value("keep_probability", c.keep_probability);
    c.include_below = j.value("include_below", c.include_below);
    c.seed = j.value("seed", c.seed);
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("malformed synthetic config: ") + e.what());
  }
  c.validate();
  return c;
}

nlohmann::json synth_config_to_json(const SynthConfig& c) {
  return {{"min_objects", c.min_objects},
          {"max_objects", c.max_objects},
          {"small_size", c.small_size},
          {"large_size", c.large_size},
          {"x_near_threshold", c.x_near_threshold},
          {"keep_probability", c.keep_probability},
          {"include_below", c.include_below},
          {"seed", c.seed}};
}

RelationVocab synth_vocab(const SynthConfig& config) {
  std::vector<std::string> relations{"Above", "OppositeHorizontally", "XNear"};
  if (config.include_below) relations.push_back("Below");
  return RelationVocab(std::move(relations), {"small", "large"},
                       {{"size", {"small", "large"}}});
}

FormulaSet synth_formulas(const SynthConfig& config) {
  FormulaSet f;
  f.num_relations = config.include_below ? 4 : 3;
  f.transitive.insert(synth::kAbove);
  if (config.include_below) {
    f.transitive.insert(synth::kBelow);
    f.converse.insert({synth::kAbove, synth::kBelow});
    f.converse.insert({synth::kBelow, synth::kAbove});
  }
  return f;
}

namespace {

double center_x(const Box& b) { return 0.5 * (b[0] + b[2]); }
double center_y(const Box& b) { return 0.5 * (b[1] + b[3]); }

}  // namespace

EdgeSet geometric_relations(const Layout& layout, const SynthConfig& config) {
  EdgeSet out;
  const int n = static_cast<int>(layout.size());
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      if (i == j) continue;
      const double xi = center_x(layout[i]), xj = center_x(layout[j]);
      const double yi = center_y(layout[i]), yj = center_y(layout[j]);
      if (yi < yj) out.insert({i, synth::kAbove, j});
      if (config.include_below && yi > yj) out.insert({i, synth::kBelow, j});
      if ((xi - 0.5) * (xj - 0.5) < 0.0)
        out.insert({i, synth::kOppositeHorizontally, j});
      if (std::abs(xi - xj) <= config.x_near_threshold)
        out.insert({i, synth::kXNear, j});
    }
  }
  return out;
}

std::vector<SceneRecord> synth_generate(const SynthConfig& config, int count) {
  config.validate();
  Rng rng(config.seed);
  std::vector<SceneRecord> out;
  out.reserve(count);
  for (int s = 0; s < count; ++s) {
    const int n = config.min_objects +
                  uniform_int(rng, config.max_objects - config.min_objects + 1);
    std::vector<Object> objects;
    std::vector<Box> boxes;
    for (int i = 0; i < n; ++i) {
      const bool large = bernoulli(rng, 0.5);
      const double size = large ? config.large_size : config.small_size;
      const double half = 0.5 * size;
      // Centers uniform over the range that keeps the square inside the image.
      const double cx = half + uniform01(rng) * (1.0 - size);
      const double cy = half + uniform01(rng) * (1.0 - size);
      const std::string name = large ? "large" : "small";
      objects.push_back({large ? synth::kLarge : synth::kSmall, {{"size", name}}});
      boxes.push_back({cx - half, cy - half, cx + half, cy + half});
    }
    Layout layout(std::move(boxes));
    const EdgeSet full = geometric_relations(layout, config);

    SceneGraph g(std::move(objects));
    for (const auto& e : full) {
      if (e.relation == synth::kAbove) {
        // Transitive reduction: keep i -> j unless some k sits strictly between.
        const double yi = center_y(layout[e.subject]);
        const double yj = center_y(layout[e.object]);
        bool covered = false;
        for (int k = 0; k < n && !covered; ++k) {
          const double yk = center_y(layout[k]);
          covered = yi < yk && yk < yj;
        }
        if (covered) continue;
        if (config.include_below && bernoulli(rng, 0.5))
          g.insert({e.object, synth::kBelow, e.subject});
        else
          g.insert(e);
      } else if (e.relation == synth::kBelow) {
        continue;  // emitted only as the restatement of a reduced Above edge
      } else if (config.keep_probability >= 1.0 ||
                 bernoulli(rng, config.keep_probability)) {
        g.insert(e);
      }
    }
    out.push_back({std::move(g), std::move(layout)});
  }
  return out;
}

SceneGraph semantic_equivalent_transform(const SceneGraph& g,
                                         const std::optional<Layout>& layout,
                                         const FormulaSet& f,
                                         const SynthConfig& config, Rng& rng) {
  if (!layout) throw InputError("equivalent transform needs the scene layout");
  if (static_cast<int>(layout->size()) != g.num_nodes())
    throw ShapeError("layout size does not match the graph");
  f.validate();

  SceneGraph current = g.with_edges(geometric_relations(*layout, config));

  // Converse duplicates: drop one side of each stated pair with p = 0.5,
  // choosing among the sides implied by the other.
  const std::vector<Edge> snapshot(current.edges().begin(), current.edges().end());
  for (const auto& e : snapshot) {
    for (auto [r, rc] : f.converse) {
      if (e.relation != r) continue;
      const Edge partner{e.object, rc, e.subject};
      const bool reverse_formula = f.converse.count({rc, r}) > 0;
      if (reverse_formula && !(e < partner)) continue;  // pair seen from partner
      if (!current.contains(e) || !current.contains(partner)) continue;
      // The partner is always implied by e; e is implied back only when the
      // reverse pair is also a formula.
      const bool drop = bernoulli(rng, 0.5);
      const bool pick_e = reverse_formula && bernoulli(rng, 0.5);
      if (drop) current.erase(pick_e ? e : partner);
    }
  }

  // Implied edges: drop with p = 0.5 when the rest still implies them.
  const std::vector<Edge> remaining(current.edges().begin(), current.edges().end());
  for (const auto& e : remaining) {
    if (!bernoulli(rng, 0.5)) continue;
    current.erase(e);
    if (!sgc(current, f).contains(e)) current.insert(e);
  }
  return current;
}

SceneGraph noise_transform(const SceneGraph& g, int num_relations,
                           double fraction, Rng& rng) {
  if (!(fraction >= 0.0 && fraction <= 1.0))
    throw DomainError("noise fraction must lie in [0, 1]");
  const std::vector<Edge> edges(g.edges().begin(), g.edges().end());
  const auto m = static_cast<int>(edges.size());
  const int k = std::min(m, static_cast<int>(std::ceil(fraction * m - 1e-9)));
  if (k == 0 || num_relations < 2) return g;

  // Partial Fisher-Yates for a uniform k-subset.
  std::vector<int> idx(m);
  std::iota(idx.begin(), idx.end(), 0);
  for (int s = 0; s < k; ++s) std::swap(idx[s], idx[s + uniform_int(rng, m - s)]);
  std::vector<char> chosen(m, 0);
  for (int s = 0; s < k; ++s) chosen[idx[s]] = 1;

  EdgeSet out;
  for (int t = 0; t < m; ++t) {
    if (!chosen[t]) out.insert(edges[t]);
  }
  for (int t = 0; t < m; ++t) {
    if (!chosen[t]) continue;
    const Edge& e = edges[t];
    // Prefer labels that do not collide with an edge already on this pair.
    std::vector<int> free_labels, any_labels;
    for (int r = 0; r < num_relations; ++r) {
      if (r == e.relation) continue;
      any_labels.push_back(r);
      if (!out.count({e.subject, r, e.object}) && !g.contains({e.subject, r, e.object}))
        free_labels.push_back(r);
    }
    const auto& pool = free_labels.empty() ? any_labels : free_labels;
    out.insert({e.subject, pool[uniform_int(rng, static_cast<int>(pool.size()))],
                e.object});
  }
  return g.with_edges(out);
}

}  // namespace sgcanon
