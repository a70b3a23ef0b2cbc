#include "sgcanon/canon.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

namespace sgcanon {

namespace {

void check_relation_id(int r, int num_relations) {
  if (r < 0 || r >= num_relations)
    throw VocabError("relation id " + std::to_string(r) + " out of range [0, " +
                     std::to_string(num_relations) + ")");
}

void check_graph_relations(const SceneGraph& g, int num_relations) {
  for (const auto& e : g.edges()) check_relation_id(e.relation, num_relations);
}

// converse targets indexed by source relation
std::vector<std::vector<int>> converse_table(const FormulaSet& f) {
  std::vector<std::vector<int>> table(f.num_relations);
  for (auto [r, rc] : f.converse) table[r].push_back(rc);
  return table;
}

}  // namespace

// ------------------------------------------------------------ FormulaSet

void FormulaSet::validate() const {
  if (num_relations < 0) throw VocabError("negative relation count");
  for (int r : transitive) check_relation_id(r, num_relations);
  for (auto [r, rc] : converse) {
    check_relation_id(r, num_relations);
    check_relation_id(rc, num_relations);
  }
}

bool FormulaSet::is_well_formed() const {
  std::vector<int> seen(num_relations, 0);
  for (auto [r, rc] : converse) {
    if (++seen[r] > 1) return false;
    if (!converse.count({rc, r})) return false;
    if (transitive.count(r) != transitive.count(rc)) return false;
  }
  return true;
}

// ----------------------------------------------------------- CanonParams

CanonParams CanonParams::initial(int num_relations) {
  CanonParams p;
  p.theta_trans = Eigen::VectorXd::Zero(num_relations);
  p.theta_conv = Eigen::MatrixXd::Zero(num_relations, num_relations + 1);
  p.theta_conv.col(num_relations).setConstant(kInitNoConverse);
  return p;
}

CanonParams CanonParams::saturated(const FormulaSet& f, double magnitude) {
  f.validate();
  if (!f.is_well_formed())
    throw InputError("saturated parameters need a well-formed formula set");
  const int nr = f.num_relations;
  CanonParams p;
  p.theta_trans = Eigen::VectorXd::Constant(nr, -magnitude);
  for (int r : f.transitive) p.theta_trans[r] = magnitude;
  p.theta_conv = Eigen::MatrixXd::Constant(nr, nr + 1, -magnitude);
  p.theta_conv.col(nr).setConstant(magnitude);
  for (auto [r, rc] : f.converse) {
    p.theta_conv(r, rc) = magnitude;
    p.theta_conv(r, nr) = -magnitude;
  }
  return p;
}

void CanonParams::validate() const {
  const int nr = num_relations();
  if (theta_conv.rows() != nr || theta_conv.cols() != nr + 1)
    throw ShapeError("theta_conv must be " + std::to_string(nr) + " x " +
                     std::to_string(nr + 1));
  if (!theta_trans.allFinite() || !theta_conv.allFinite())
    throw DomainError("canonicalization parameters must be finite");
  for (int r = 0; r < nr; ++r) {
    for (int k = r + 1; k < nr; ++k) {
      if (theta_conv(r, k) != theta_conv(k, r))
        throw DomainError("theta_conv relation block is not symmetric");
    }
  }
}

void CanonParams::symmetrize() {
  const int nr = num_relations();
  for (int r = 0; r < nr; ++r) {
    for (int k = r + 1; k < nr; ++k) {
      const double mean = 0.5 * (theta_conv(r, k) + theta_conv(k, r));
      theta_conv(r, k) = mean;
      theta_conv(k, r) = mean;
    }
  }
}

CanonGradient CanonGradient::zeros(int num_relations) {
  return {Eigen::VectorXd::Zero(num_relations),
          Eigen::MatrixXd::Zero(num_relations, num_relations + 1)};
}

CanonGradient& CanonGradient::operator+=(const CanonGradient& o) {
  trans += o.trans;
  conv += o.conv;
  return *this;
}

CanonGradient& CanonGradient::operator*=(double s) {
  trans *= s;
  conv *= s;
  return *this;
}

// ---------------------------------------------------------- probabilities

double sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

double p_trans(const CanonParams& params, int r) {
  check_relation_id(r, params.num_relations());
  return sigmoid(params.theta_trans[r]);
}

Eigen::VectorXd p_conv(const CanonParams& params, int r) {
  check_relation_id(r, params.num_relations());
  Eigen::VectorXd row = params.theta_conv.row(r).transpose();
  row.array() = (row.array() - row.maxCoeff()).exp();
  return row / row.sum();
}

Eigen::VectorXd log_p_conv(const CanonParams& params, int r) {
  check_relation_id(r, params.num_relations());
  Eigen::VectorXd row = params.theta_conv.row(r).transpose();
  const double m = row.maxCoeff();
  const double lse = m + std::log((row.array() - m).exp().sum());
  return row.array() - lse;
}

void tie_conv_gradient(Eigen::MatrixXd& grad) {
  const int nr = static_cast<int>(grad.rows());
  for (int r = 0; r < nr; ++r) {
    for (int k = r + 1; k < nr; ++k) {
      const double sum = grad(r, k) + grad(k, r);
      grad(r, k) = sum;
      grad(k, r) = sum;
    }
  }
}

// -------------------------------------------------------------------- SGC

SceneGraph sgc(const SceneGraph& g, const FormulaSet& f) {
  f.validate();
  check_graph_relations(g, f.num_relations);
  const auto conv = converse_table(f);
  SceneGraph out = g;
  bool changed = true;
  while (changed) {
    changed = false;
    // Converse completion over the current edge set.
    std::vector<Edge> added;
    for (const auto& e : out.edges()) {
      for (int rc : conv[e.relation]) added.push_back({e.object, rc, e.subject});
    }
    for (const auto& e : added) changed |= out.insert(e);
    // Transitive completion per transitive relation.
    for (int r : f.transitive) {
      const auto reach =
          transitive_closure(per_relation_subgraph(out, r, f.num_relations));
      const int n = out.num_nodes();
      for (int i = 0; i < n; ++i) {
        for (int j = 0; j < n; ++j) {
          if (i != j && reach[i][j]) changed |= out.insert({i, r, j});
        }
      }
    }
  }
  return out;
}

SceneGraph closure_oracle(const SceneGraph& g, const FormulaSet& f,
                          int max_nodes) {
  if (g.num_nodes() > max_nodes)
    throw SizeError("closure oracle limited to " + std::to_string(max_nodes) +
                    " nodes, got " + std::to_string(g.num_nodes()));
  f.validate();
  check_graph_relations(g, f.num_relations);
  SceneGraph out = g;
  for (;;) {
    std::vector<Edge> derived;
    const auto& edges = out.edges();
    for (const auto& a : edges) {
      for (auto [r, rc] : f.converse) {
        if (a.relation == r) derived.push_back({a.object, rc, a.subject});
      }
      if (!f.transitive.count(a.relation)) continue;
      for (const auto& b : edges) {
        if (b.relation == a.relation && b.subject == a.object &&
            b.object != a.subject)
          derived.push_back({a.subject, a.relation, b.object});
      }
    }
    bool grew = false;
    for (const auto& e : derived) grew |= out.insert(e);
    if (!grew) return out;
  }
}

// ----------------------------------------------------- max-product paths

std::vector<int> BestPaths::path(int i, int j) const {
  if (!reachable(i, j)) return {};
  if (i == j) return {i};
  std::vector<int> nodes{i};
  // Expand (i, j) recursively through stored intermediates.
  std::vector<std::pair<int, int>> stack{{i, j}};
  while (!stack.empty()) {
    auto [a, b] = stack.back();
    stack.pop_back();
    const int k = via[a * num_nodes + b];
    if (k < 0) {
      nodes.push_back(b);
    } else {
      stack.emplace_back(k, b);
      stack.emplace_back(a, k);
    }
  }
  return nodes;
}

BestPaths max_product_paths(int num_nodes, std::span<const WeightedArc> arcs) {
  const int n = num_nodes;
  constexpr double inf = std::numeric_limits<double>::infinity();
  Eigen::MatrixXd dist = Eigen::MatrixXd::Constant(n, n, inf);
  BestPaths out;
  out.num_nodes = n;
  out.via.assign(static_cast<std::size_t>(n) * n, -2);
  for (int i = 0; i < n; ++i) {
    dist(i, i) = 0.0;
    out.via[i * n + i] = -1;
  }
  for (const auto& a : arcs) {
    if (a.from < 0 || a.from >= n || a.to < 0 || a.to >= n)
      throw InputError("arc endpoint out of range");
    if (!(a.weight > 0.0) || a.weight > 1.0)
      throw DomainError("arc weight " + std::to_string(a.weight) +
                        " outside (0, 1]");
    if (a.from == a.to) continue;
    const double d = -std::log(a.weight);
    if (d < dist(a.from, a.to)) {
      dist(a.from, a.to) = d;
      out.via[a.from * n + a.to] = -1;
    }
  }
  for (int k = 0; k < n; ++k) {
    for (int i = 0; i < n; ++i) {
      const double dik = dist(i, k);
      if (dik == inf || i == k) continue;
      for (int j = 0; j < n; ++j) {
        if (j == k || i == j) continue;
        const double cand = dik + dist(k, j);
        if (cand < dist(i, j)) {
          dist(i, j) = cand;
          out.via[i * n + j] = k;
        }
      }
    }
  }
  // Scalar exp: the vectorized one does not map -inf to exactly 0.
  out.best.resize(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      out.best(i, j) = dist(i, j) == inf ? 0.0 : std::exp(-dist(i, j));
  return out;
}

// ---------------------------------------------------------------- WSGC-E

WsgcEResult wsgc_e(const SceneGraph& g, const CanonParams& params,
                   const WsgcOptions& options) {
  params.validate();
  const int nr = params.num_relations();
  check_graph_relations(g, nr);
  const double eps = options.prune_eps;

  WsgcEResult result;
  auto& trace = result.trace;
  trace.params = params;

  // Converse completion: every input edge proposes every reversed relation.
  std::map<Edge, double> weights;
  for (const auto& e : g.edges()) {
    weights[e] = 1.0;
    trace.converse_stage[e] = EdgeOrigin{};
  }
  for (const auto& e : g.edges()) {
    const Eigen::VectorXd pc = p_conv(params, e.relation);
    for (int rc = 0; rc < nr; ++rc) {
      const double w = pc[rc];
      if (!(w > eps)) continue;
      const Edge rev{e.object, rc, e.subject};
      auto it = weights.find(rev);
      if (it == weights.end() || w > it->second) {
        weights[rev] = w;
        trace.converse_stage[rev] =
            EdgeOrigin{EdgeOrigin::Kind::converse, e.relation, {}};
      }
    }
  }
  trace.converse_weights = weights;
  trace.origins = trace.converse_stage;

  // Transitive completion per relation on its own weighted subgraph.
  const int n = g.num_nodes();
  std::vector<std::vector<WeightedArc>> arcs(nr);
  for (const auto& [e, w] : trace.converse_weights)
    arcs[e.relation].push_back({e.subject, e.object, w});
  for (int r = 0; r < nr; ++r) {
    if (arcs[r].empty()) continue;
    const double pt = p_trans(params, r);
    if (!(pt > eps)) continue;
    const BestPaths bp = max_product_paths(n, arcs[r]);
    for (int i = 0; i < n; ++i) {
      for (int j = 0; j < n; ++j) {
        if (i == j || !bp.reachable(i, j)) continue;
        std::vector<int> path = bp.path(i, j);
        double w = pt;
        for (std::size_t s = 0; s + 1 < path.size(); ++s)
          w *= trace.converse_weights.at({path[s], r, path[s + 1]});
        if (!(w > eps)) continue;
        const Edge key{i, r, j};
        auto it = weights.find(key);
        if (it == weights.end() || w > it->second) {
          weights[key] = w;
          trace.origins[key] =
              EdgeOrigin{EdgeOrigin::Kind::transitive, -1, std::move(path)};
        }
      }
    }
  }

  result.graph = WeightedSceneGraph(g.objects());
  for (const auto& [e, w] : weights) result.graph.set(e, w);
  return result;
}

CanonGradient subgrad_wsgc_e(const WsgcETrace& trace, const CanonParams& params,
                             std::span<const double> upstream) {
  if (!(trace.params == params))
    throw ConsistencyError(
        "WSGC-E trace was recorded with different parameters");
  if (upstream.size() != trace.origins.size())
    throw ConsistencyError("upstream gradient has " +
                           std::to_string(upstream.size()) +
                           " entries, trace has " +
                           std::to_string(trace.origins.size()) + " edges");
  const int nr = params.num_relations();
  CanonGradient grad = CanonGradient::zeros(nr);

  std::vector<Eigen::VectorXd> pc(nr);
  for (int r = 0; r < nr; ++r) pc[r] = p_conv(params, r);

  // d log p_conv(target | source) / d theta_conv(source, :) scaled by s.
  auto add_log_conv = [&](int source, int target, double s) {
    grad.conv.row(source) -= s * pc[source].transpose();
    grad.conv(source, target) += s;
  };

  std::size_t k = 0;
  for (const auto& [e, origin] : trace.origins) {
    const double up = upstream[k++];
    if (up == 0.0) continue;
    switch (origin.kind) {
      case EdgeOrigin::Kind::input:
        break;
      case EdgeOrigin::Kind::converse: {
        const double w = trace.converse_weights.at(e);
        add_log_conv(origin.source_relation, e.relation, up * w);
        break;
      }
      case EdgeOrigin::Kind::transitive: {
        const int r = e.relation;
        const double pt = sigmoid(params.theta_trans[r]);
        double w = pt;
        for (std::size_t s = 0; s + 1 < origin.path.size(); ++s)
          w *= trace.converse_weights.at({origin.path[s], r, origin.path[s + 1]});
        grad.trans[r] += up * w * (1.0 - pt);
        for (std::size_t s = 0; s + 1 < origin.path.size(); ++s) {
          const Edge hop{origin.path[s], r, origin.path[s + 1]};
          const auto& hop_origin = trace.converse_stage.at(hop);
          if (hop_origin.kind == EdgeOrigin::Kind::converse)
            add_log_conv(hop_origin.source_relation, r, up * w);
        }
        break;
      }
    }
  }
  tie_conv_gradient(grad.conv);
  return grad;
}

// ---------------------------------------------------------------- WSGC-S

WsgcSResult wsgc_s_assigned(const SceneGraph& g, const CanonParams& params,
                            std::span<const int> choices,
                            const WsgcOptions& options) {
  params.validate();
  const int nr = params.num_relations();
  check_graph_relations(g, nr);
  if (choices.size() != g.num_edges())
    throw ShapeError("expected one converse choice per input edge");

  WsgcSResult result;
  result.sample.num_relations = nr;
  result.graph = WeightedSceneGraph::from_unweighted(g);

  std::size_t k = 0;
  for (const auto& e : g.edges()) {
    const int z = choices[k++];
    if (z < 0 || z > nr) throw VocabError("converse choice out of range");
    const double lp = log_p_conv(params, e.relation)[z];
    result.sample.entries.push_back({e, z, lp});
    if (z != nr) result.graph.set({e.object, z, e.subject}, 1.0);
  }

  const SceneGraph sampled = result.graph.unweighted();
  const int n = g.num_nodes();
  for (int r = 0; r < nr; ++r) {
    const double pt = p_trans(params, r);
    if (!(pt > options.prune_eps)) continue;
    const auto reach =
        transitive_closure(per_relation_subgraph(sampled, r, nr));
    for (int i = 0; i < n; ++i) {
      for (int j = 0; j < n; ++j) {
        if (i == j || !reach[i][j] || sampled.contains({i, r, j})) continue;
        result.graph.set({i, r, j}, pt);
        result.transitive_edges.push_back({i, r, j});
      }
    }
  }
  std::sort(result.transitive_edges.begin(), result.transitive_edges.end());
  return result;
}

WsgcSResult wsgc_s(const SceneGraph& g, const CanonParams& params, Rng& rng,
                   const WsgcOptions& options) {
  params.validate();
  check_graph_relations(g, params.num_relations());
  std::vector<int> choices;
  choices.reserve(g.num_edges());
  std::vector<Eigen::VectorXd> pc(params.num_relations());
  for (int r = 0; r < params.num_relations(); ++r) pc[r] = p_conv(params, r);
  for (const auto& e : g.edges()) {
    const auto& probs = pc[e.relation];
    choices.push_back(sample_categorical(
        rng, std::span<const double>(probs.data(), probs.size())));
  }
  return wsgc_s_assigned(g, params, choices, options);
}

std::vector<int> most_likely_choices(const SceneGraph& g,
                                     const CanonParams& params) {
  check_graph_relations(g, params.num_relations());
  std::vector<int> choices;
  for (const auto& e : g.edges()) {
    Eigen::Index best = 0;
    params.theta_conv.row(e.relation).maxCoeff(&best);
    choices.push_back(static_cast<int>(best));
  }
  return choices;
}

Eigen::VectorXd trans_grad_wsgc_s(const WsgcSResult& result,
                                  const CanonParams& params,
                                  std::span<const double> upstream) {
  if (upstream.size() != result.graph.num_edges())
    throw ConsistencyError("upstream gradient size does not match graph");
  const int nr = params.num_relations();
  Eigen::VectorXd grad = Eigen::VectorXd::Zero(nr);
  std::size_t k = 0;
  auto next = result.transitive_edges.begin();
  for (const auto& [e, w] : result.graph.edges()) {
    const double up = upstream[k++];
    if (next == result.transitive_edges.end() || !(*next == e)) continue;
    ++next;
    const double pt = sigmoid(params.theta_trans[e.relation]);
    grad[e.relation] += up * pt * (1.0 - pt);
  }
  return grad;
}

}  // namespace sgcanon
