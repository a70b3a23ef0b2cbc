#include <sstream>

#include "doctest.h"
#include "helpers.hpp"
#include "sgcanon/data.hpp"
#include "sgcanon/io.hpp"

using namespace sgcanon;

namespace {

RelationVocab vocab() {
  return RelationVocab({"left", "right", "above"}, {"cat", "dog"}, {{"size", {"S", "L"}}});
}

}  // namespace

TEST_CASE("empty stream reads as an empty list") {
  std::istringstream in("");
  CHECK(read_graphs(in, vocab()).empty());
  std::istringstream blanks("\n  \n");
  CHECK(read_graphs(blanks, vocab()).empty());
}

TEST_CASE("one record survives a round trip") {
  SceneRecord r;
  r.graph = SceneGraph({{0, {{"size", "S"}}}, {1, {}}}, {{0, 2, 1}});
  r.layout = Layout({{0.1, 0.1, 0.3, 0.4}, {0.5, 0.5, 0.9, 0.8}});
  std::stringstream buf;
  write_graphs(buf, {r}, vocab());
  const auto back = read_graphs(buf, vocab());
  REQUIRE(back.size() == 1);
  CHECK(back[0] == r);
}

TEST_CASE("random records re-serialize byte for byte") {
  Rng rng(3);
  std::vector<SceneRecord> records;
  for (int i = 0; i < 100; ++i) {
    const int n = 1 + uniform_int(rng, 6);
    SceneRecord r{testutil::random_graph(rng, n, 3, 0.15, 2), std::nullopt};
    if (bernoulli(rng, 0.5)) {
      std::vector<Box> boxes;
      for (int k = 0; k < n; ++k) {
        const double a = uniform01(rng), b = uniform01(rng);
        boxes.push_back({a * 0.5, b * 0.5, 0.5 + a * 0.5, 0.5 + b * 0.5});
      }
      r.layout = Layout(boxes);
    }
    records.push_back(std::move(r));
  }
  std::stringstream first;
  write_graphs(first, records, vocab());
  const std::string text = first.str();
  std::istringstream in(text);
  const auto back = read_graphs(in, vocab());
  CHECK(back == records);
  std::stringstream second;
  write_graphs(second, back, vocab());
  CHECK(second.str() == text);
}

TEST_CASE("parse errors name the line; unknown names are vocabulary errors") {
  std::istringstream bad("{\"objects\": [], \"edges\": []}\n{not json\n");
  try {
    read_graphs(bad, vocab());
    FAIL("expected a parse error");
  } catch (const ParseError& e) {
    CHECK(std::string(e.what()).find("line 2") != std::string::npos);
  }
  std::istringstream unknown(
      "{\"objects\": [{\"category\": \"cat\"}, {\"category\": \"cat\"}], "
      "\"edges\": [[0, \"below\", 1]]}\n");
  CHECK_THROWS_AS(read_graphs(unknown, vocab()), VocabError);
  std::istringstream cat("{\"objects\": [{\"category\": \"cow\"}], \"edges\": []}\n");
  CHECK_THROWS_AS(read_graphs(cat, vocab()), VocabError);
  std::istringstream loop(
      "{\"objects\": [{\"category\": \"cat\"}], \"edges\": [[0, \"left\", 0]]}\n");
  CHECK_THROWS_AS(read_graphs(loop, vocab()), ParseError);
}

TEST_CASE("vocabulary, formulas and params round trip through JSON") {
  const RelationVocab v = vocab();
  CHECK(vocab_from_json(vocab_to_json(v)) == v);

  FormulaSet f;
  f.num_relations = 3;
  f.transitive = {2};
  f.converse = {{0, 1}, {1, 0}};
  CHECK(formulas_from_json(formulas_to_json(f, v), v) == f);

  Rng rng(1);
  const CanonParams p = testutil::random_params(rng, 3);
  CHECK(params_from_json(params_to_json(p)) == p);

  // Flat row-major theta_conv is accepted too.
  nlohmann::json flat = params_to_json(p);
  std::vector<double> rows;
  for (const auto& row : flat["theta_conv"])
    for (double x : row) rows.push_back(x);
  flat["theta_conv"] = rows;
  CHECK(params_from_json(flat) == p);

  nlohmann::json asym = params_to_json(p);
  asym["theta_conv"][0][1] = 5.0;
  CHECK_THROWS_AS(params_from_json(asym), ValidationError);
}

TEST_CASE("weighted records keep their weights") {
  std::vector<WeightedSceneRecord> recs(1);
  recs[0].graph = WeightedSceneGraph(testutil::objects(2));
  recs[0].graph.set({0, 0, 1}, 0.25);
  recs[0].graph.set({1, 1, 0}, 1.0);
  const auto path = std::filesystem::temp_directory_path() / "sgcanon_weighted.jsonl";
  write_weighted_graphs(path, recs, vocab());
  const auto back = read_weighted_graphs(path, vocab());
  REQUIRE(back.size() == 1);
  CHECK(back[0].graph == recs[0].graph);
  std::filesystem::remove(path);
}
