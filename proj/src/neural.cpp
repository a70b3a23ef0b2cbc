#include "sgcanon/neural.hpp"

#include <bit>
#include <cmath>
#include <string>

namespace sgcanon {

namespace {

struct TensorRef {
  std::string name;
  double* data;
  Eigen::Index rows;
  Eigen::Index cols;
};

template <typename Model, typename Fn>
void visit_tensors(Model& model, Fn&& fn) {
  auto mat = [&](const std::string& name, auto& m) {
    fn(TensorRef{name, const_cast<double*>(m.data()), m.rows(), m.cols()});
  };
  auto mlp = [&](const std::string& prefix, auto& net) {
    for (std::size_t l = 0; l < net.layers.size(); ++l) {
      mat(prefix + ".linear" + std::to_string(l) + ".weight", net.layers[l].weight);
      mat(prefix + ".linear" + std::to_string(l) + ".bias", net.layers[l].bias);
    }
  };
  mat("object_embeddings", model.object_embeddings);
  mat("relation_embeddings", model.relation_embeddings);
  for (std::size_t k = 0; k < model.edge_mlps.size(); ++k)
    mlp("gconv" + std::to_string(k), model.edge_mlps[k]);
  mlp("box_head", model.box_head);
}

Linear glorot_linear(int in, int out, Rng& rng) {
  Linear lin;
  const double limit = std::sqrt(6.0 / (in + out));
  lin.weight.resize(out, in);
  for (Eigen::Index c = 0; c < lin.weight.cols(); ++c)
    for (Eigen::Index r = 0; r < lin.weight.rows(); ++r)
      lin.weight(r, c) = (2.0 * uniform01(rng) - 1.0) * limit;
  lin.bias = Vector::Zero(out);
  return lin;
}

Mlp make_mlp(const std::vector<int>& widths, Rng& rng) {
  Mlp mlp;
  for (std::size_t l = 0; l + 1 < widths.size(); ++l)
    mlp.layers.push_back(glorot_linear(widths[l], widths[l + 1], rng));
  return mlp;
}

Matrix uniform_matrix(int rows, int cols, Rng& rng) {
  Matrix m(rows, cols);
  for (Eigen::Index c = 0; c < cols; ++c)
    for (Eigen::Index r = 0; r < rows; ++r) m(r, c) = 2.0 * uniform01(rng) - 1.0;
  return m;
}

void check_dims(const GcnDims& d) {
  if (d.dim <= 0 || d.hidden <= 0 || d.box_hidden <= 0 || d.layers < 0 ||
      d.num_categories <= 0 || d.num_relations < 0)
    throw ShapeError("invalid model dimensions");
}

}  // namespace

// -------------------------------------------------------------------- MLP

Matrix mlp_forward(const Mlp& mlp, const Matrix& x, MlpCache* cache) {
  if (x.cols() != mlp.input_dim())
    throw ShapeError("MLP input has " + std::to_string(x.cols()) +
                     " columns, expected " + std::to_string(mlp.input_dim()));
  if (cache) {
    cache->inputs.clear();
    cache->pre.clear();
  }
  Matrix h = x;
  const std::size_t last = mlp.layers.size() - 1;
  for (std::size_t l = 0; l < mlp.layers.size(); ++l) {
    const auto& lin = mlp.layers[l];
    Matrix z = h * lin.weight.transpose();
    z.rowwise() += lin.bias.transpose();
    if (cache) {
      cache->inputs.push_back(std::move(h));
      cache->pre.push_back(z);
    }
    h = (l == last) ? std::move(z) : Matrix(z.cwiseMax(0.0));
  }
  return h;
}

Matrix mlp_backward(const Mlp& mlp, const MlpCache& cache, const Matrix& dy,
                    Mlp& grad) {
  Matrix d = dy;
  const std::size_t last = mlp.layers.size() - 1;
  for (std::size_t l = mlp.layers.size(); l-- > 0;) {
    if (l != last) d = (cache.pre[l].array() > 0.0).select(d, 0.0);
    grad.layers[l].weight.noalias() += d.transpose() * cache.inputs[l];
    grad.layers[l].bias += d.colwise().sum().transpose();
    d = d * mlp.layers[l].weight;
  }
  return d;
}

// --------------------------------------------------------------- GcnModel

GcnModel GcnModel::init(const GcnDims& dims, Rng& rng) {
  check_dims(dims);
  GcnModel m;
  m.dims = dims;
  const int d = dims.dim;
  m.object_embeddings = uniform_matrix(dims.num_categories, d, rng);
  m.relation_embeddings = uniform_matrix(dims.num_relations, d, rng);
  for (int l = 0; l < dims.layers; ++l)
    m.edge_mlps.push_back(make_mlp({3 * d, dims.hidden, dims.hidden, 3 * d}, rng));
  m.box_head = make_mlp({d, dims.box_hidden, 4}, rng);
  return m;
}

GcnModel GcnModel::zeros_like(const GcnModel& model) {
  GcnModel z = model;
  for (auto t : z.tensors()) std::fill(t.begin(), t.end(), 0.0);
  return z;
}

std::vector<std::span<double>> GcnModel::tensors() {
  std::vector<std::span<double>> out;
  visit_tensors(*this, [&](const TensorRef& t) {
    out.emplace_back(t.data, static_cast<std::size_t>(t.rows * t.cols));
  });
  return out;
}

std::vector<std::span<const double>> GcnModel::tensors() const {
  std::vector<std::span<const double>> out;
  visit_tensors(*this, [&](const TensorRef& t) {
    out.emplace_back(t.data, static_cast<std::size_t>(t.rows * t.cols));
  });
  return out;
}

std::vector<std::string> GcnModel::tensor_names() const {
  std::vector<std::string> out;
  visit_tensors(*this, [&](const TensorRef& t) { out.push_back(t.name); });
  return out;
}

std::size_t GcnModel::num_parameters() const {
  std::size_t n = 0;
  for (auto t : tensors()) n += t.size();
  return n;
}

std::uint64_t GcnModel::fingerprint() const {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (auto t : tensors()) {
    h = (h ^ t.size()) * 0x100000001b3ULL;
    for (double v : t) {
      h ^= std::bit_cast<std::uint64_t>(v);
      h *= 0x100000001b3ULL;
      h ^= h >> 29;
    }
  }
  return h;
}

GcnModel& GcnModel::operator+=(const GcnModel& o) {
  auto dst = tensors();
  auto src = o.tensors();
  if (dst.size() != src.size()) throw ShapeError("model structure mismatch");
  for (std::size_t k = 0; k < dst.size(); ++k) {
    if (dst[k].size() != src[k].size()) throw ShapeError("tensor size mismatch");
    for (std::size_t i = 0; i < dst[k].size(); ++i) dst[k][i] += src[k][i];
  }
  return *this;
}

GcnModel& GcnModel::operator*=(double s) {
  for (auto t : tensors())
    for (double& v : t) v *= s;
  return *this;
}

// -------------------------------------------------------- graph convolution

namespace {

// Rows [v_subject, u_edge, v_object] for every edge.
Matrix gather_triples(const Matrix& nodes, const Matrix& edges_repr,
                      const std::vector<Edge>& edges, int d) {
  const auto m = static_cast<Eigen::Index>(edges.size());
  Matrix x(m, 3 * d);
  for (Eigen::Index k = 0; k < m; ++k) {
    x.row(k).segment(0, d) = nodes.row(edges[k].subject);
    x.row(k).segment(d, d) = edges_repr.row(k);
    x.row(k).segment(2 * d, d) = nodes.row(edges[k].object);
  }
  return x;
}

}  // namespace

std::pair<Layout, GcnTape> gcn_forward(const WeightedSceneGraph& g,
                                       const GcnModel& model) {
  const GcnDims& dims = model.dims;
  const int d = dims.dim;
  const int n = g.num_nodes();
  if (static_cast<int>(model.edge_mlps.size()) != dims.layers ||
      model.object_embeddings.cols() != d ||
      model.relation_embeddings.cols() != d)
    throw ShapeError("model tensors do not match its dimensions");

  GcnTape tape;
  tape.graph = g;
  tape.dims = dims;
  tape.model_fingerprint = model.fingerprint();
  for (const auto& [e, w] : g.edges()) {
    if (e.relation >= model.relation_embeddings.rows())
      throw ShapeError("relation id " + std::to_string(e.relation) +
                       " has no embedding");
    tape.edges.push_back(e);
    tape.weights.push_back(w);
  }
  const auto m = static_cast<Eigen::Index>(tape.edges.size());

  Matrix nodes(n, d);
  for (int i = 0; i < n; ++i) {
    const int c = g.objects()[i].category;
    if (c < 0 || c >= model.object_embeddings.rows())
      throw ShapeError("category id " + std::to_string(c) + " has no embedding");
    nodes.row(i) = model.object_embeddings.row(c);
  }
  Matrix edge_repr(m, d);
  for (Eigen::Index k = 0; k < m; ++k)
    edge_repr.row(k) = model.relation_embeddings.row(tape.edges[k].relation);

  tape.normalizer = Vector::Zero(n);
  for (Eigen::Index k = 0; k < m; ++k) {
    tape.normalizer[tape.edges[k].subject] += tape.weights[k];
    tape.normalizer[tape.edges[k].object] += tape.weights[k];
  }

  for (int t = 0; t < dims.layers; ++t) {
    const Mlp& mlp = model.edge_mlps[t];
    GcnTape::Layer layer;
    layer.nodes_in = nodes;
    layer.edges_in = edge_repr;

    layer.node_pass_out =
        mlp_forward(mlp, gather_triples(nodes, edge_repr, tape.edges, d),
                    &layer.node_pass);
    Matrix next = Matrix::Zero(n, d);
    for (Eigen::Index k = 0; k < m; ++k) {
      const double w = tape.weights[k];
      next.row(tape.edges[k].subject) += w * layer.node_pass_out.row(k).segment(0, d);
      next.row(tape.edges[k].object) += w * layer.node_pass_out.row(k).segment(2 * d, d);
    }
    for (int i = 0; i < n; ++i) {
      const double c = tape.normalizer[i];
      if (c > 0.0)
        next.row(i) /= c;
      else
        next.row(i) = nodes.row(i);  // isolated node keeps its state
    }
    layer.nodes_out = next;

    if (t + 1 < dims.layers) {
      const Matrix out = mlp_forward(mlp, gather_triples(next, edge_repr, tape.edges, d),
                                     &layer.edge_pass);
      edge_repr = out.middleCols(d, d);
    }
    nodes = std::move(next);
    tape.layers.push_back(std::move(layer));
  }

  const Matrix z = mlp_forward(model.box_head, nodes, &tape.head);
  tape.boxes = z.unaryExpr([](double v) {
    return v >= 0.0 ? 1.0 / (1.0 + std::exp(-v)) : std::exp(v) / (1.0 + std::exp(v));
  });

  if (!tape.boxes.allFinite()) throw NumericError("non-finite box prediction");
  std::vector<Box> boxes(n);
  for (int i = 0; i < n; ++i)
    for (int c = 0; c < 4; ++c) boxes[i][c] = tape.boxes(i, c);
  return {Layout(std::move(boxes)), std::move(tape)};
}

GcnGradient gcn_backward(const GcnTape& tape, const GcnModel& model,
                         const Matrix& grad_boxes) {
  if (!(tape.dims == model.dims) ||
      tape.model_fingerprint != model.fingerprint())
    throw ConsistencyError("tape was recorded with a different model");
  const int n = tape.graph.num_nodes();
  const int d = tape.dims.dim;
  if (grad_boxes.rows() != n || grad_boxes.cols() != 4)
    throw ConsistencyError("box gradient shape does not match the tape");
  const auto m = static_cast<Eigen::Index>(tape.edges.size());

  GcnGradient grad{GcnModel::zeros_like(model), std::vector<double>(m, 0.0)};

  const Matrix dz =
      grad_boxes.cwiseProduct(tape.boxes.cwiseProduct((1.0 - tape.boxes.array()).matrix()));
  Matrix d_nodes = mlp_backward(model.box_head, tape.head, dz, grad.model.box_head);
  Matrix d_edges = Matrix::Zero(m, d);

  for (int t = tape.dims.layers; t-- > 0;) {
    const auto& layer = tape.layers[t];
    const Mlp& mlp = model.edge_mlps[t];
    Mlp& mlp_grad = grad.model.edge_mlps[t];

    // Edge update u' = F_r(v'_s, u, v'_o); d_edges holds dL/du'.
    Matrix d_edges_in = Matrix::Zero(m, d);
    if (t + 1 < tape.dims.layers && m > 0) {
      Matrix dy = Matrix::Zero(m, 3 * d);
      dy.middleCols(d, d) = d_edges;
      const Matrix dx = mlp_backward(mlp, layer.edge_pass, dy, mlp_grad);
      for (Eigen::Index k = 0; k < m; ++k) {
        d_nodes.row(tape.edges[k].subject) += dx.row(k).segment(0, d);
        d_edges_in.row(k) += dx.row(k).segment(d, d);
        d_nodes.row(tape.edges[k].object) += dx.row(k).segment(2 * d, d);
      }
    }

    // Node update: weighted average of subject / object messages.
    Matrix d_nodes_in = Matrix::Zero(n, d);
    for (int i = 0; i < n; ++i) {
      if (!(tape.normalizer[i] > 0.0)) d_nodes_in.row(i) = d_nodes.row(i);
    }
    if (m > 0) {
      Matrix dy = Matrix::Zero(m, 3 * d);
      for (Eigen::Index k = 0; k < m; ++k) {
        const int s = tape.edges[k].subject;
        const int o = tape.edges[k].object;
        const double w = tape.weights[k];
        const double cs = tape.normalizer[s];
        const double co = tape.normalizer[o];
        const auto f_s = layer.node_pass_out.row(k).segment(0, d);
        const auto f_o = layer.node_pass_out.row(k).segment(2 * d, d);
        dy.row(k).segment(0, d) = (w / cs) * d_nodes.row(s);
        dy.row(k).segment(2 * d, d) = (w / co) * d_nodes.row(o);
        grad.edge_weights[k] +=
            d_nodes.row(s).dot(f_s - layer.nodes_out.row(s)) / cs +
            d_nodes.row(o).dot(f_o - layer.nodes_out.row(o)) / co;
      }
      const Matrix dx = mlp_backward(mlp, layer.node_pass, dy, mlp_grad);
      for (Eigen::Index k = 0; k < m; ++k) {
        d_nodes_in.row(tape.edges[k].subject) += dx.row(k).segment(0, d);
        d_edges_in.row(k) += dx.row(k).segment(d, d);
        d_nodes_in.row(tape.edges[k].object) += dx.row(k).segment(2 * d, d);
      }
    }
    d_nodes = std::move(d_nodes_in);
    d_edges = std::move(d_edges_in);
  }

  for (int i = 0; i < n; ++i)
    grad.model.object_embeddings.row(tape.graph.objects()[i].category) += d_nodes.row(i);
  for (Eigen::Index k = 0; k < m; ++k)
    grad.model.relation_embeddings.row(tape.edges[k].relation) += d_edges.row(k);
  return grad;
}

Layout replay(const GcnTape& tape, const GcnModel& model) {
  if (tape.model_fingerprint != model.fingerprint())
    throw ConsistencyError("tape was recorded with a different model");
  return gcn_forward(tape.graph, model).first;
}

// ------------------------------------------------------------------ Adam

Adam::Adam(AdamConfig config, const std::vector<std::size_t>& sizes)
    : config_(config) {
  if (!(config.lr > 0.0)) throw DomainError("learning rate must be positive");
  for (auto s : sizes) {
    m_.emplace_back(s, 0.0);
    v_.emplace_back(s, 0.0);
  }
}

void Adam::step(const std::vector<std::span<double>>& params,
                const std::vector<std::span<const double>>& grads) {
  if (params.size() != m_.size() || grads.size() != m_.size())
    throw ShapeError("optimizer tensor count mismatch");
  for (std::size_t k = 0; k < grads.size(); ++k) {
    if (params[k].size() != m_[k].size() || grads[k].size() != m_[k].size())
      throw ShapeError("optimizer tensor size mismatch");
    for (double g : grads[k]) {
      if (!std::isfinite(g))
        throw NumericError("non-finite gradient in tensor " + std::to_string(k));
    }
  }
  ++t_;
  const double b1 = config_.beta1;
  const double b2 = config_.beta2;
  const double c1 = 1.0 - std::pow(b1, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(b2, static_cast<double>(t_));
  for (std::size_t k = 0; k < grads.size(); ++k) {
    auto& m = m_[k];
    auto& v = v_[k];
    for (std::size_t i = 0; i < m.size(); ++i) {
      const double g = grads[k][i];
      m[i] = b1 * m[i] + (1.0 - b1) * g;
      v[i] = b2 * v[i] + (1.0 - b2) * g * g;
      params[k][i] -= config_.lr * (m[i] / c1) / (std::sqrt(v[i] / c2) + config_.eps);
    }
  }
}

// -------------------------------------------------------- serialization

nlohmann::json model_to_json(const GcnModel& model) {
  nlohmann::json j;
  j["format"] = "sgcanon-model";
  j["version"] = kModelFormatVersion;
  const auto& d = model.dims;
  j["dims"] = {{"num_categories", d.num_categories},
               {"num_relations", d.num_relations},
               {"dim", d.dim},
               {"hidden", d.hidden},
               {"box_hidden", d.box_hidden},
               {"layers", d.layers}};
  nlohmann::json tensors = nlohmann::json::array();
  visit_tensors(model, [&](const TensorRef& t) {
    std::vector<double> row_major(static_cast<std::size_t>(t.rows * t.cols));
    for (Eigen::Index r = 0; r < t.rows; ++r)
      for (Eigen::Index c = 0; c < t.cols; ++c)
        row_major[r * t.cols + c] = t.data[c * t.rows + r];
    tensors.push_back({{"name", t.name},
                       {"shape", {t.rows, t.cols}},
                       {"data", row_major}});
  });
  j["tensors"] = std::move(tensors);
  return j;
}

GcnModel model_from_json(const nlohmann::json& j) {
  try {
    if (j.at("format") != "sgcanon-model")
      throw ParseError("not a model checkpoint");
    if (j.at("version").get<int>() != kModelFormatVersion)
      throw ParseError("unsupported model format version " +
                       j.at("version").dump());
    GcnDims d;
    const auto& jd = j.at("dims");
    d.num_categories = jd.at("num_categories");
    d.num_relations = jd.at("num_relations");
    d.dim = jd.at("dim");
    d.hidden = jd.at("hidden");
    d.box_hidden = jd.at("box_hidden");
    d.layers = jd.at("layers");
    Rng rng(0);
    GcnModel model = GcnModel::init(d, rng);
    const auto& tensors = j.at("tensors");
    std::size_t k = 0;
    visit_tensors(model, [&](const TensorRef& t) {
      if (k >= tensors.size()) throw ParseError("checkpoint has too few tensors");
      const auto& jt = tensors[k++];
      if (jt.at("name") != t.name)
        throw ParseError("expected tensor '" + t.name + "', found " +
                         jt.at("name").dump());
      const auto shape = jt.at("shape").get<std::vector<Eigen::Index>>();
      if (shape.size() != 2 || shape[0] != t.rows || shape[1] != t.cols)
        throw ShapeError("tensor '" + t.name + "' has the wrong shape");
      const auto data = jt.at("data").get<std::vector<double>>();
      if (data.size() != static_cast<std::size_t>(t.rows * t.cols))
        throw ShapeError("tensor '" + t.name + "' has the wrong size");
      for (Eigen::Index r = 0; r < t.rows; ++r)
        for (Eigen::Index c = 0; c < t.cols; ++c)
          t.data[c * t.rows + r] = data[r * t.cols + c];
    });
    if (k != tensors.size()) throw ParseError("checkpoint has extra tensors");
    return model;
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("malformed model checkpoint: ") + e.what());
  }
}

}  // namespace sgcanon
