#pragma once

// Scene-graph canonicalization under transitive and converse relation
// rules: exact closure (SGC), its fixed-point oracle, and the two weighted
// variants driven by learnable relation-property parameters.

#include <map>
#include <set>
#include <span>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "sgcanon/core.hpp"
#include "sgcanon/random.hpp"

namespace sgcanon {

// Known relation properties. (r, r') in `converse` means r(x,y) => r'(y,x).
struct FormulaSet {
  int num_relations = 0;
  std::set<int> transitive;
  std::set<std::pair<int, int>> converse;

  void validate() const;

  // Symmetric, at most one converse per relation, and both sides of each
  // converse pair agree on transitivity. For these sets a single
  // converse-then-transitive pass already reaches the closure.
  bool is_well_formed() const;

  bool operator==(const FormulaSet&) const = default;
};

// theta_conv is |R| x (|R|+1); column |R| is the "no converse" outcome.
// The |R| x |R| block is symmetric.
struct CanonParams {
  Eigen::VectorXd theta_trans;
  Eigen::MatrixXd theta_conv;

  static constexpr double kInitNoConverse = 2.0;

  // theta_trans = 0, relation-pair block = 0, no-converse column = +2.
  static CanonParams initial(int num_relations);

  // Probabilities exactly in {0, 1} replicating a well-formed formula set.
  // The magnitude is large enough that exp(-magnitude) underflows to 0.
  static CanonParams saturated(const FormulaSet& f, double magnitude = 800.0);

  int num_relations() const { return static_cast<int>(theta_trans.size()); }
  int no_converse() const { return num_relations(); }

  void validate() const;
  // Replaces tied entries by their mean.
  void symmetrize();

  bool operator==(const CanonParams& o) const {
    return theta_trans == o.theta_trans && theta_conv == o.theta_conv;
  }
};

// Gradient with respect to CanonParams, same shapes.
struct CanonGradient {
  Eigen::VectorXd trans;
  Eigen::MatrixXd conv;

  static CanonGradient zeros(int num_relations);
  CanonGradient& operator+=(const CanonGradient& o);
  CanonGradient& operator*=(double s);
};

double sigmoid(double x);

double p_trans(const CanonParams& params, int r);
Eigen::VectorXd p_conv(const CanonParams& params, int r);
Eigen::VectorXd log_p_conv(const CanonParams& params, int r);

// Folds the gradient of the tied pair (r, r') / (r', r) into one value and
// writes it to both entries. Diagonal and no-converse column are untouched.
void tie_conv_gradient(Eigen::MatrixXd& grad);

// Exact closure C(E). Runs the converse-completion and transitive-completion
// steps until nothing changes; for well-formed formula sets the first round
// is already the fixed point.
SceneGraph sgc(const SceneGraph& g, const FormulaSet& f);

// Naive forward chaining of both rule schemas to a fixed point. Guarded to
// small graphs.
SceneGraph closure_oracle(const SceneGraph& g, const FormulaSet& f,
                          int max_nodes = 12);

// ------------------------------------------------- max-product paths

struct WeightedArc {
  int from = 0;
  int to = 0;
  double weight = 1.0;
};

struct BestPaths {
  int num_nodes = 0;
  Eigen::MatrixXd best;  // 0 when unreachable, 1 on the diagonal
  // via(i, j): -1 for the direct arc, -2 unreachable, else an intermediate.
  std::vector<int> via;

  bool reachable(int i, int j) const { return via[i * num_nodes + j] != -2; }
  // Node sequence i, ..., j of one maximizing path.
  std::vector<int> path(int i, int j) const;
};

// All-pairs maximum product of weights over directed paths, computed by
// Floyd-Warshall on -log weights. Ties keep the smallest intermediate index.
BestPaths max_product_paths(int num_nodes, std::span<const WeightedArc> arcs);

// ------------------------------------------------------ weighted variants

struct WsgcOptions {
  // Completed edges at or below this weight are not added.
  double prune_eps = 1e-4;
};

struct EdgeOrigin {
  enum class Kind { input, converse, transitive };
  Kind kind = Kind::input;
  int source_relation = -1;  // converse: relation of the spawning edge
  std::vector<int> path;     // transitive: maximizing node path

  bool operator==(const EdgeOrigin&) const = default;
};

// Everything subgrad_wsgc_e needs to differentiate a forward pass.
struct WsgcETrace {
  CanonParams params;
  std::map<Edge, EdgeOrigin> converse_stage;  // graph after converse step
  std::map<Edge, double> converse_weights;
  std::map<Edge, EdgeOrigin> origins;  // final graph
};

struct WsgcEResult {
  WeightedSceneGraph graph;
  WsgcETrace trace;
};

WsgcEResult wsgc_e(const SceneGraph& g, const CanonParams& params,
                   const WsgcOptions& options = {});

// upstream[k] is dLoss/dweight for the k-th edge of the forward output in
// key order. Throws ConsistencyError when params differ from the forward
// pass or the sizes disagree.
CanonGradient subgrad_wsgc_e(const WsgcETrace& trace, const CanonParams& params,
                             std::span<const double> upstream);

struct SampleEntry {
  Edge edge;
  int choice = 0;  // == num_relations for "no converse"
  double log_prob = 0.0;
};

struct SampleRecord {
  int num_relations = 0;
  std::vector<SampleEntry> entries;
};

struct WsgcSResult {
  WeightedSceneGraph graph;
  SampleRecord sample;
  std::vector<Edge> transitive_edges;  // added with weight p_trans(r)
};

// One converse draw per input edge from `rng`.
WsgcSResult wsgc_s(const SceneGraph& g, const CanonParams& params, Rng& rng,
                   const WsgcOptions& options = {});

// Same procedure with the converse choices given, one per input edge in key
// order.
WsgcSResult wsgc_s_assigned(const SceneGraph& g, const CanonParams& params,
                            std::span<const int> choices,
                            const WsgcOptions& options = {});

// Most probable converse outcome per input edge (deterministic inference).
std::vector<int> most_likely_choices(const SceneGraph& g,
                                     const CanonParams& params);

// dLoss/dtheta_trans for a WSGC-S graph: only transitively completed edges
// depend on theta_trans, through w = p_trans(r).
Eigen::VectorXd trans_grad_wsgc_s(const WsgcSResult& result,
                                  const CanonParams& params,
                                  std::span<const double> upstream);

}  // namespace sgcanon
