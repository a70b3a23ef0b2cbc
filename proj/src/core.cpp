#include "sgcanon/core.hpp"

#include <algorithm>
#include <cmath>

namespace sgcanon {

RelationVocab::RelationVocab(std::vector<std::string> relations,
                             std::vector<std::string> categories,
                             AttributeSchema attributes)
    : relations_(std::move(relations)),
      categories_(std::move(categories)),
      attributes_(std::move(attributes)) {
  for (int r = 0; r < num_relations(); ++r) {
    if (!relation_index_.emplace(relations_[r], r).second)
      throw VocabError("duplicate relation name '" + relations_[r] + "'");
  }
  for (int c = 0; c < num_categories(); ++c) {
    if (!category_index_.emplace(categories_[c], c).second)
      throw VocabError("duplicate category name '" + categories_[c] + "'");
  }
}

int RelationVocab::relation_id(const std::string& name) const {
  auto it = relation_index_.find(name);
  if (it == relation_index_.end())
    throw VocabError("unknown relation '" + name + "'");
  return it->second;
}

int RelationVocab::category_id(const std::string& name) const {
  auto it = category_index_.find(name);
  if (it == category_index_.end())
    throw VocabError("unknown category '" + name + "'");
  return it->second;
}

const std::string& RelationVocab::relation_name(int r) const {
  check_relation(r);
  return relations_[r];
}

const std::string& RelationVocab::category_name(int c) const {
  check_category(c);
  return categories_[c];
}

void RelationVocab::check_relation(int r) const {
  if (r < 0 || r >= num_relations())
    throw VocabError("relation id " + std::to_string(r) + " out of range [0, " +
                     std::to_string(num_relations()) + ")");
}

void RelationVocab::check_category(int c) const {
  if (c < 0 || c >= num_categories())
    throw VocabError("category id " + std::to_string(c) + " out of range [0, " +
                     std::to_string(num_categories()) + ")");
}

void RelationVocab::check_attributes(
    const std::map<std::string, std::string>& attrs) const {
  if (attributes_.empty()) return;
  for (const auto& [key, value] : attrs) {
    auto it = attributes_.find(key);
    if (it == attributes_.end())
      throw VocabError("unknown attribute '" + key + "'");
    if (!it->second.count(value))
      throw VocabError("attribute '" + key + "' has no value '" + value + "'");
  }
}

// ------------------------------------------------------------ SceneGraph

SceneGraph::SceneGraph(std::vector<Object> objects)
    : objects_(std::move(objects)) {}

SceneGraph::SceneGraph(std::vector<Object> objects,
                       const std::vector<Edge>& edges)
    : objects_(std::move(objects)) {
  for (const auto& e : edges) insert(e);
}

bool SceneGraph::insert(const Edge& e) {
  const int n = num_nodes();
  if (e.subject < 0 || e.subject >= n || e.object < 0 || e.object >= n)
    throw InputError("edge endpoint out of range for " + std::to_string(n) +
                     " nodes");
  if (e.subject == e.object)
    throw InputError("self-loop on node " + std::to_string(e.subject));
  if (e.relation < 0) throw VocabError("negative relation id");
  return edges_.insert(e).second;
}

SceneGraph SceneGraph::with_edges(const EdgeSet& edges) const {
  SceneGraph out(objects_);
  for (const auto& e : edges) out.insert(e);
  return out;
}

// ---------------------------------------------------- WeightedSceneGraph

WeightedSceneGraph::WeightedSceneGraph(std::vector<Object> objects)
    : objects_(std::move(objects)) {}

WeightedSceneGraph WeightedSceneGraph::from_unweighted(const SceneGraph& g) {
  WeightedSceneGraph out(g.objects());
  for (const auto& e : g.edges()) out.edges_.emplace_hint(out.edges_.end(), e, 1.0);
  return out;
}

void WeightedSceneGraph::check(const Edge& e, double w) const {
  const int n = num_nodes();
  if (e.subject < 0 || e.subject >= n || e.object < 0 || e.object >= n)
    throw InputError("edge endpoint out of range for " + std::to_string(n) +
                     " nodes");
  if (e.subject == e.object)
    throw InputError("self-loop on node " + std::to_string(e.subject));
  if (!(w > 0.0 && w <= 1.0))
    throw DomainError("edge weight " + std::to_string(w) +
                      " outside (0, 1]");
}

void WeightedSceneGraph::set(const Edge& e, double w) {
  check(e, w);
  edges_[e] = w;
}

void WeightedSceneGraph::set_max(const Edge& e, double w) {
  check(e, w);
  auto [it, inserted] = edges_.emplace(e, w);
  if (!inserted) it->second = std::max(it->second, w);
}

double WeightedSceneGraph::weight(const Edge& e) const {
  auto it = edges_.find(e);
  return it == edges_.end() ? 0.0 : it->second;
}

SceneGraph WeightedSceneGraph::unweighted() const {
  SceneGraph out(objects_);
  for (const auto& [e, w] : edges_) out.insert(e);
  return out;
}

// ---------------------------------------------------------------- Layout

Layout::Layout(std::vector<Box> boxes) : boxes_(std::move(boxes)) {
  for (const auto& b : boxes_) {
    for (double v : b) {
      if (!(v >= 0.0 && v <= 1.0))
        throw DomainError("box coordinate " + std::to_string(v) +
                          " outside [0, 1]");
    }
  }
}

// ------------------------------------------------------------- utilities

Digraph per_relation_subgraph(const SceneGraph& g, int r, int num_relations) {
  if (r < 0 || r >= num_relations)
    throw VocabError("relation id " + std::to_string(r) + " out of range [0, " +
                     std::to_string(num_relations) + ")");
  Digraph d{g.num_nodes(), {}};
  for (const auto& e : g.edges()) {
    if (e.relation == r) d.arcs.emplace_back(e.subject, e.object);
  }
  std::sort(d.arcs.begin(), d.arcs.end());
  return d;
}

Digraph per_relation_subgraph(const SceneGraph& g, int r,
                              const RelationVocab& vocab) {
  return per_relation_subgraph(g, r, vocab.num_relations());
}

std::vector<std::vector<char>> transitive_closure(const Digraph& d) {
  const int n = d.num_nodes;
  std::vector<std::vector<char>> reach(n, std::vector<char>(n, 0));
  for (auto [i, j] : d.arcs) reach[i][j] = 1;
  for (int k = 0; k < n; ++k) {
    for (int i = 0; i < n; ++i) {
      if (!reach[i][k]) continue;
      const auto& row_k = reach[k];
      auto& row_i = reach[i];
      for (int j = 0; j < n; ++j) row_i[j] |= row_k[j];
    }
  }
  return reach;
}

}  // namespace sgcanon
