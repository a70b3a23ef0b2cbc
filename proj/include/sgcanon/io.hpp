#pragma once

// JSON and JSON-lines formats. One scene per line:
//   {"objects": [{"category": str, "attributes": {str: str}}...],
//    "edges": [[i, relation_name, j] | [i, relation_name, j, w] ...],
//    "boxes": [[x0, y0, x1, y1]...]}          ("boxes" optional)
// Names are resolved against a vocabulary file
//   {"relations": [...], "categories": [...], "attributes": {...}}.

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "sgcanon/canon.hpp"
#include "sgcanon/core.hpp"

namespace sgcanon {

struct WeightedSceneRecord {
  WeightedSceneGraph graph;
  std::optional<Layout> layout;

  bool operator==(const WeightedSceneRecord&) const = default;
};

// ------------------------------------------------------------ vocabulary

RelationVocab vocab_from_json(const nlohmann::json& j);
nlohmann::json vocab_to_json(const RelationVocab& vocab);
RelationVocab read_vocab(const std::filesystem::path& path);
void write_vocab(const std::filesystem::path& path, const RelationVocab& vocab);

// ----------------------------------------------------------------- scenes

nlohmann::json scene_to_json(const SceneRecord& record, const RelationVocab& vocab);
SceneRecord scene_from_json(const nlohmann::json& j, const RelationVocab& vocab);
nlohmann::json scene_to_json(const WeightedSceneRecord& record,
                             const RelationVocab& vocab);
WeightedSceneRecord weighted_scene_from_json(const nlohmann::json& j,
                                             const RelationVocab& vocab);

// Readers report malformed lines as ParseError("line N: ...").
std::vector<SceneRecord> read_graphs(std::istream& in, const RelationVocab& vocab);
std::vector<SceneRecord> read_graphs(const std::filesystem::path& path,
                                     const RelationVocab& vocab);
void write_graphs(std::ostream& out, const std::vector<SceneRecord>& records,
                  const RelationVocab& vocab);
void write_graphs(const std::filesystem::path& path,
                  const std::vector<SceneRecord>& records,
                  const RelationVocab& vocab);

// Weighted readers also accept 3-element edges (weight 1).
std::vector<WeightedSceneRecord> read_weighted_graphs(
    const std::filesystem::path& path, const RelationVocab& vocab);
void write_weighted_graphs(const std::filesystem::path& path,
                           const std::vector<WeightedSceneRecord>& records,
                           const RelationVocab& vocab);

// ------------------------------------------------- formulas and params

// {"transitive": [names], "converse": [[name, name]...]}
FormulaSet formulas_from_json(const nlohmann::json& j, const RelationVocab& vocab);
nlohmann::json formulas_to_json(const FormulaSet& f, const RelationVocab& vocab);
FormulaSet read_formulas(const std::filesystem::path& path,
                         const RelationVocab& vocab);

// {"theta_trans": [...], "theta_conv": [[row]...]}; a flat row-major
// theta_conv array is accepted as well.
CanonParams params_from_json(const nlohmann::json& j);
nlohmann::json params_to_json(const CanonParams& params);
CanonParams read_params(const std::filesystem::path& path);

// Whole-file JSON helpers with ParseError on failure.
nlohmann::json read_json_file(const std::filesystem::path& path);
void write_json_file(const std::filesystem::path& path, const nlohmann::json& j);

}  // namespace sgcanon
