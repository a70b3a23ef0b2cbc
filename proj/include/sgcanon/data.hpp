#pragma once

// Synthetic square-scene dataset plus the graph perturbations used by the
// robustness protocols.

#include <cstdint>
#include <optional>
#include <vector>

#include "json.hpp"
#include "sgcanon/canon.hpp"
#include "sgcanon/core.hpp"
#include "sgcanon/random.hpp"

namespace sgcanon {

// Relation ids of the synthetic vocabulary.
namespace synth {
inline constexpr int kAbove = 0;
inline constexpr int kOppositeHorizontally = 1;
inline constexpr int kXNear = 2;
inline constexpr int kBelow = 3;  // only with SynthConfig::include_below
inline constexpr int kSmall = 0;
inline constexpr int kLarge = 1;
}  // namespace synth

struct SynthConfig {
  int min_objects = 16;
  int max_objects = 16;
  double small_size = 0.15;
  double large_size = 0.3;
  double x_near_threshold = 0.10;
  // Keep probability for edges of the non-transitive relations.
  double keep_probability = 1.0;
  // Adds "Below", the exact converse of "Above". Not part of the original
  // three-relation testbed.
  bool include_below = false;
  std::uint64_t seed = 0;

  void validate() const;
};

SynthConfig synth_config_from_json(const nlohmann::json& j);
nlohmann::json synth_config_to_json(const SynthConfig& c);

RelationVocab synth_vocab(const SynthConfig& config);

// Above is transitive; with Below enabled, Above/Below are converses and
// both transitive.
FormulaSet synth_formulas(const SynthConfig& config);

// Every relation that holds geometrically between ordered object pairs.
// y grows downward, so Above means a smaller center y.
EdgeSet geometric_relations(const Layout& layout, const SynthConfig& config);

// Scenes with ground-truth layouts. Above edges are reduced to their
// transitive reduction; with Below enabled each reduced Above edge is
// stated either as Above(i, j) or Below(j, i).
std::vector<SceneRecord> synth_generate(const SynthConfig& config, int count);

// A graph with the same closure under `f` as the full geometric relation
// set of `layout`: converse duplicates and implied edges are dropped at
// random (p = 0.5 each).
SceneGraph semantic_equivalent_transform(const SceneGraph& g,
                                         const std::optional<Layout>& layout,
                                         const FormulaSet& f,
                                         const SynthConfig& config, Rng& rng);

// Relabels ceil(fraction * |E|) uniformly chosen edges to a different
// relation; endpoints are unchanged.
SceneGraph noise_transform(const SceneGraph& g, int num_relations,
                           double fraction, Rng& rng);

}  // namespace sgcanon
