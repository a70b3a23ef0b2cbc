#include "doctest.h"
#include "helpers.hpp"
#include "sgcanon/data.hpp"

using namespace sgcanon;
using namespace sgcanon::synth;

namespace {

Box square(double cx, double cy, double s) {
  return {cx - s / 2, cy - s / 2, cx + s / 2, cy + s / 2};
}

EdgeSet only(const EdgeSet& edges, int r) {
  EdgeSet out;
  for (const auto& e : edges)
    if (e.relation == r) out.insert(e);
  return out;
}

}  // namespace

TEST_CASE("geometric relations use y-down and the x-near threshold") {
  SynthConfig c;
  const EdgeSet a = geometric_relations(Layout({square(0.3, 0.2, 0.15), square(0.3, 0.8, 0.15)}), c);
  CHECK(a.count({0, kAbove, 1}));
  CHECK_FALSE(a.count({1, kAbove, 0}));
  CHECK(a.count({0, kXNear, 1}));
  CHECK(a.count({1, kXNear, 0}));
  CHECK(only(a, kOppositeHorizontally).empty());

  const EdgeSet b = geometric_relations(Layout({square(0.2, 0.5, 0.15), square(0.8, 0.5, 0.15)}), c);
  CHECK(b.count({0, kOppositeHorizontally, 1}));
  CHECK(b.count({1, kOppositeHorizontally, 0}));
  // Equal y: no Above either way.
  CHECK(only(b, kAbove).empty());
  CHECK(only(b, kXNear).empty());
}

TEST_CASE("synthetic scenes are consistent with their geometry") {
  SynthConfig c;
  c.min_objects = 3;
  c.max_objects = 12;
  c.seed = 9;
  const auto scenes = synth_generate(c, 100);
  const FormulaSet f = synth_formulas(c);
  for (const auto& s : scenes) {
    const int n = s.graph.num_nodes();
    CHECK((n >= 3 && n <= 12));
    REQUIRE(s.layout);
    const EdgeSet full = geometric_relations(*s.layout, c);
    for (const auto& e : s.graph.edges()) CHECK(full.count(e));
    CHECK(only(sgc(s.graph, f).edges(), kAbove) == only(full, kAbove));
    for (int i = 0; i < n; ++i) {
      const Box& b = (*s.layout)[i];
      const double side = b[2] - b[0];
      const bool large = s.graph.objects()[i].category == kLarge;
      CHECK(side == doctest::Approx(large ? c.large_size : c.small_size));
      CHECK(s.graph.objects()[i].attributes.at("size") == (large ? "large" : "small"));
    }
  }
  CHECK(synth_generate(c, 100) == scenes);
}

TEST_CASE("keep probability thins the non-transitive relations") {
  SynthConfig c;
  c.keep_probability = 0.0;
  c.seed = 2;
  for (const auto& s : synth_generate(c, 10))
    for (const auto& e : s.graph.edges()) CHECK(e.relation == kAbove);
}

TEST_CASE("with Below, reduced Above edges are stated in either direction") {
  SynthConfig c;
  c.include_below = true;
  c.seed = 4;
  const FormulaSet f = synth_formulas(c);
  CHECK(f.is_well_formed());
  int below = 0;
  for (const auto& s : synth_generate(c, 20)) {
    const EdgeSet full = geometric_relations(*s.layout, c);
    const EdgeSet closed = sgc(s.graph, f).edges();
    CHECK(only(closed, kAbove) == only(full, kAbove));
    CHECK(only(closed, kBelow) == only(full, kBelow));
    below += static_cast<int>(only(s.graph.edges(), kBelow).size());
  }
  CHECK(below > 0);
}

TEST_CASE("config validation and JSON") {
  SynthConfig c;
  c.small_size = 1.5;
  CHECK_THROWS_AS(c.validate(), DomainError);
  c = SynthConfig{};
  c.min_objects = 5;
  c.max_objects = 4;
  CHECK_THROWS_AS(c.validate(), InputError);
  const SynthConfig d = synth_config_from_json({{"n_objects", 7}, {"seed", 3}});
  CHECK(d.min_objects == 7);
  CHECK(d.max_objects == 7);
  CHECK(synth_config_to_json(synth_config_from_json(synth_config_to_json(d))) ==
        synth_config_to_json(d));
}

TEST_CASE("equivalent transform preserves the closure") {
  for (bool below : {false, true}) {
    SynthConfig c;
    c.min_objects = 4;
    c.max_objects = 10;
    c.include_below = below;
    c.seed = 17;
    const FormulaSet f = synth_formulas(c);
    Rng rng(5);
    int changed = 0;
    for (const auto& s : synth_generate(c, 100)) {
      const SceneGraph full = s.graph.with_edges(geometric_relations(*s.layout, c));
      const SceneGraph g2 = semantic_equivalent_transform(s.graph, s.layout, f, c, rng);
      CHECK(sgc(g2, f) == sgc(full, f));
      CHECK(sgc(g2, f) == sgc(s.graph, f).with_edges(sgc(full, f).edges()));
      changed += g2 != full;
    }
    CHECK(changed > 50);
  }
}

TEST_CASE("equivalent transform can drop an implied edge of a chain") {
  SynthConfig c;
  const Layout l({square(0.5, 0.1, 0.1), square(0.2, 0.5, 0.1), square(0.9, 0.9, 0.1)});
  SceneGraph g(testutil::objects(3), {{0, kAbove, 1}, {1, kAbove, 2}, {0, kAbove, 2}});
  const FormulaSet f = synth_formulas(c);
  bool dropped = false;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    Rng rng(seed);
    const SceneGraph out = semantic_equivalent_transform(g, l, f, c, rng);
    CHECK(sgc(out, f) == sgc(g.with_edges(geometric_relations(l, c)), f));
    dropped |= !out.contains({0, kAbove, 2});
  }
  CHECK(dropped);
  Rng rng(1);
  CHECK_THROWS_AS(semantic_equivalent_transform(g, std::nullopt, f, c, rng), InputError);
}

TEST_CASE("noise transform relabels exactly the requested fraction") {
  Rng rng(8);
  SceneGraph single(testutil::objects(2), {{0, 1, 1}});
  CHECK(noise_transform(single, 3, 0.0, rng) == single);
  const SceneGraph flipped = noise_transform(single, 3, 1.0, rng);
  REQUIRE(flipped.num_edges() == 1);
  CHECK(flipped.edges().begin()->relation != 1);
  CHECK(flipped.edges().begin()->subject == 0);

  for (int trial = 0; trial < 20; ++trial) {
    // 100 edges on distinct pairs so relabels never collide.
    SceneGraph g(testutil::objects(12));
    while (g.num_edges() < 100) {
      const int i = uniform_int(rng, 12), j = uniform_int(rng, 12);
      bool pair_used = false;
      for (int r = 0; r < 3; ++r) pair_used |= g.contains({i, r, j});
      if (i != j && !pair_used) g.insert({i, uniform_int(rng, 3), j});
    }
    const SceneGraph out = noise_transform(g, 3, 0.1, rng);
    CHECK(out.num_edges() == 100);
    int differ = 0;
    for (const auto& e : g.edges()) differ += !out.contains(e);
    CHECK(differ == 10);
  }
  CHECK_THROWS_AS(noise_transform(single, 3, 1.5, rng), DomainError);
}
