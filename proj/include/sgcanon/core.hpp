#pragma once

// Scene-graph data model shared by every other part of the library.

#include <array>
#include <cstddef>
#include <map>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace sgcanon {

// ---------------------------------------------------------------- errors

struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Validation-class errors: bad input that the caller can fix.
struct ValidationError : Error {
  using Error::Error;
};
struct VocabError : ValidationError {
  using ValidationError::ValidationError;
};
struct ParseError : ValidationError {
  using ValidationError::ValidationError;
};
struct ShapeError : ValidationError {
  using ValidationError::ValidationError;
};
struct SizeError : ValidationError {
  using ValidationError::ValidationError;
};
struct DomainError : ValidationError {
  using ValidationError::ValidationError;
};
struct InputError : ValidationError {
  using ValidationError::ValidationError;
};

// Internal inconsistencies between artifacts produced by different calls.
struct ConsistencyError : Error {
  using Error::Error;
};
struct NumericError : Error {
  using Error::Error;
};

// ------------------------------------------------------------ vocabulary

class RelationVocab {
 public:
  using AttributeSchema = std::map<std::string, std::set<std::string>>;

  RelationVocab() = default;
  RelationVocab(std::vector<std::string> relations,
                std::vector<std::string> categories,
                AttributeSchema attributes = {});

  const std::vector<std::string>& relations() const { return relations_; }
  const std::vector<std::string>& categories() const { return categories_; }
  const AttributeSchema& attributes() const { return attributes_; }

  int num_relations() const { return static_cast<int>(relations_.size()); }
  int num_categories() const { return static_cast<int>(categories_.size()); }

  int relation_id(const std::string& name) const;
  int category_id(const std::string& name) const;
  const std::string& relation_name(int r) const;
  const std::string& category_name(int c) const;

  void check_relation(int r) const;
  void check_category(int c) const;
  void check_attributes(const std::map<std::string, std::string>& attrs) const;

  bool operator==(const RelationVocab&) const = default;

 private:
  std::vector<std::string> relations_;
  std::vector<std::string> categories_;
  AttributeSchema attributes_;
  std::map<std::string, int> relation_index_;
  std::map<std::string, int> category_index_;
};

// ----------------------------------------------------------------- graphs

struct Object {
  int category = 0;
  std::map<std::string, std::string> attributes;

  bool operator==(const Object&) const = default;
};

// Directed labeled edge (subject, relation, object). Ordered by (i, r, j).
struct Edge {
  int subject = 0;
  int relation = 0;
  int object = 0;

  auto operator<=>(const Edge&) const = default;
};

using EdgeSet = std::set<Edge>;

class SceneGraph {
 public:
  SceneGraph() = default;
  explicit SceneGraph(std::vector<Object> objects);
  SceneGraph(std::vector<Object> objects, const std::vector<Edge>& edges);

  // Returns false when the edge was already present. Self-loops and
  // out-of-range endpoints throw.
  bool insert(const Edge& e);
  bool erase(const Edge& e) { return edges_.erase(e) > 0; }
  bool contains(const Edge& e) const { return edges_.count(e) > 0; }

  int num_nodes() const { return static_cast<int>(objects_.size()); }
  std::size_t num_edges() const { return edges_.size(); }
  const std::vector<Object>& objects() const { return objects_; }
  const EdgeSet& edges() const { return edges_; }

  // Same objects, replaced edge set.
  SceneGraph with_edges(const EdgeSet& edges) const;

  bool operator==(const SceneGraph&) const = default;

 private:
  std::vector<Object> objects_;
  EdgeSet edges_;
};

// Edges carry weights in (0, 1]; one weight per (i, r, j) key.
class WeightedSceneGraph {
 public:
  WeightedSceneGraph() = default;
  explicit WeightedSceneGraph(std::vector<Object> objects);

  // All edges of g with weight 1.
  static WeightedSceneGraph from_unweighted(const SceneGraph& g);

  // Sets the weight, replacing any existing one.
  void set(const Edge& e, double w);
  // Keeps the larger of the existing and the new weight.
  void set_max(const Edge& e, double w);

  double weight(const Edge& e) const;  // 0 when absent
  bool contains(const Edge& e) const { return edges_.count(e) > 0; }

  int num_nodes() const { return static_cast<int>(objects_.size()); }
  std::size_t num_edges() const { return edges_.size(); }
  const std::vector<Object>& objects() const { return objects_; }
  const std::map<Edge, double>& edges() const { return edges_; }

  // Drops weights; keeps the key set.
  SceneGraph unweighted() const;

  bool operator==(const WeightedSceneGraph&) const = default;

 private:
  void check(const Edge& e, double w) const;

  std::vector<Object> objects_;
  std::map<Edge, double> edges_;
};

// --------------------------------------------------------------- layouts

// (x0, y0, x1, y1) in normalized image coordinates.
using Box = std::array<double, 4>;

class Layout {
 public:
  Layout() = default;
  explicit Layout(std::vector<Box> boxes);

  std::size_t size() const { return boxes_.size(); }
  const std::vector<Box>& boxes() const { return boxes_; }
  const Box& operator[](std::size_t i) const { return boxes_[i]; }

  bool operator==(const Layout&) const = default;

 private:
  std::vector<Box> boxes_;
};

// A scene as stored on disk: graph plus optional ground-truth layout.
struct SceneRecord {
  SceneGraph graph;
  std::optional<Layout> layout;

  bool operator==(const SceneRecord&) const = default;
};

// ------------------------------------------------------ graph utilities

// Directed unlabeled graph on a fixed node count.
struct Digraph {
  int num_nodes = 0;
  std::vector<std::pair<int, int>> arcs;  // sorted (i, j)

  bool operator==(const Digraph&) const = default;
};

// The arcs of relation r, preserving the node count.
Digraph per_relation_subgraph(const SceneGraph& g, int r,
                              const RelationVocab& vocab);
Digraph per_relation_subgraph(const SceneGraph& g, int r, int num_relations);

// Dense reachability matrix (paths of length >= 1) via Floyd-Warshall.
// reach[i][i] is set only when i lies on a cycle.
std::vector<std::vector<char>> transitive_closure(const Digraph& d);

}  // namespace sgcanon
