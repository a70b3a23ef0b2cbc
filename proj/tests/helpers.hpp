#pragma once

#include <vector>

#include "sgcanon/canon.hpp"
#include "sgcanon/core.hpp"
#include "sgcanon/random.hpp"

namespace testutil {

using namespace sgcanon;

inline std::vector<Object> objects(int n, int categories = 1, Rng* rng = nullptr) {
  std::vector<Object> out(n);
  for (auto& o : out) o.category = rng ? uniform_int(*rng, categories) : 0;
  return out;
}

// Each ordered pair and relation present with probability `density`.
inline SceneGraph random_graph(Rng& rng, int n, int num_relations, double density,
                               int categories = 1) {
  SceneGraph g(objects(n, categories, &rng));
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      for (int r = 0; r < num_relations; ++r)
        if (i != j && bernoulli(rng, density)) g.insert({i, r, j});
  return g;
}

// Arbitrary formula set, not necessarily well formed.
inline FormulaSet random_formulas(Rng& rng, int num_relations) {
  FormulaSet f;
  f.num_relations = num_relations;
  for (int r = 0; r < num_relations; ++r)
    if (bernoulli(rng, 0.5)) f.transitive.insert(r);
  for (int r = 0; r < num_relations; ++r)
    for (int s = 0; s < num_relations; ++s)
      if (bernoulli(rng, 0.25)) f.converse.insert({r, s});
  return f;
}

// Symmetric converse pairing with at most one partner per relation and
// transitivity agreeing across each pair.
inline FormulaSet random_well_formed(Rng& rng, int num_relations) {
  FormulaSet f;
  f.num_relations = num_relations;
  std::vector<int> partner(num_relations, -1);
  for (int r = 0; r < num_relations; ++r) {
    if (partner[r] != -1 || !bernoulli(rng, 0.5)) continue;
    std::vector<int> free;
    for (int s = 0; s < num_relations; ++s)
      if (partner[s] == -1) free.push_back(s);
    const int s = free[uniform_int(rng, static_cast<int>(free.size()))];
    partner[r] = s;
    partner[s] = r;
    f.converse.insert({r, s});
    f.converse.insert({s, r});
  }
  for (int r = 0; r < num_relations; ++r) {
    if (partner[r] != -1 && partner[r] < r) continue;
    if (bernoulli(rng, 0.5)) {
      f.transitive.insert(r);
      if (partner[r] != -1) f.transitive.insert(partner[r]);
    }
  }
  return f;
}

// Random symmetric parameters with moderate magnitudes.
inline CanonParams random_params(Rng& rng, int num_relations, double scale = 1.5) {
  CanonParams p = CanonParams::initial(num_relations);
  for (int r = 0; r < num_relations; ++r) p.theta_trans[r] = scale * (2 * uniform01(rng) - 1);
  for (int r = 0; r < num_relations; ++r)
    for (int k = 0; k <= num_relations; ++k) p.theta_conv(r, k) = scale * (2 * uniform01(rng) - 1);
  p.symmetrize();
  return p;
}

inline double rel_error(double a, double b) {
  return std::abs(a - b) / std::max({1e-8, std::abs(a), std::abs(b)});
}

}  // namespace testutil
