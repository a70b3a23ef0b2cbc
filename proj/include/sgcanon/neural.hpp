#pragma once

// Dense layout predictor: weighted graph convolution over a weighted scene
// graph followed by a sigmoid box head. Gradients are derived by hand and
// replayed from a tape recorded during the forward pass.

#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "json.hpp"
#include "sgcanon/core.hpp"
#include "sgcanon/random.hpp"

namespace sgcanon {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

struct Linear {
  Matrix weight;  // out x in
  Vector bias;    // out
};

// ReLU between layers, identity after the last one.
struct Mlp {
  std::vector<Linear> layers;

  int input_dim() const { return static_cast<int>(layers.front().weight.cols()); }
  int output_dim() const { return static_cast<int>(layers.back().weight.rows()); }
};

// Activations kept for the backward pass of one batched MLP application.
struct MlpCache {
  std::vector<Matrix> inputs;  // input to every layer (rows = batch)
  std::vector<Matrix> pre;     // pre-activation of every layer
};

Matrix mlp_forward(const Mlp& mlp, const Matrix& x, MlpCache* cache);
// Accumulates parameter gradients into `grad`; returns dLoss/dx.
Matrix mlp_backward(const Mlp& mlp, const MlpCache& cache, const Matrix& dy,
                    Mlp& grad);

struct GcnDims {
  int num_categories = 0;
  int num_relations = 0;
  int dim = 128;         // embedding width D
  int hidden = 512;      // edge MLP hidden width
  int box_hidden = 512;  // box head hidden width
  int layers = 5;        // graph convolution layers L

  bool operator==(const GcnDims&) const = default;
};

struct GcnModel {
  GcnDims dims;
  Matrix object_embeddings;    // |C| x D
  Matrix relation_embeddings;  // |R| x D
  // One 3-layer MLP per graph-convolution layer, 3D -> 3D, split into the
  // subject / relation / object outputs.
  std::vector<Mlp> edge_mlps;
  Mlp box_head;  // D -> box_hidden -> 4, followed by a sigmoid

  // Glorot-uniform weights, zero biases, uniform(-1, 1) embeddings.
  static GcnModel init(const GcnDims& dims, Rng& rng);
  static GcnModel zeros_like(const GcnModel& model);

  // Every parameter tensor as a flat view, in a fixed order.
  std::vector<std::span<double>> tensors();
  std::vector<std::span<const double>> tensors() const;
  std::vector<std::string> tensor_names() const;
  std::size_t num_parameters() const;

  // Order-sensitive hash of all parameter bits.
  std::uint64_t fingerprint() const;

  GcnModel& operator+=(const GcnModel& o);
  GcnModel& operator*=(double s);
};

// Forward intermediates of one graph.
struct GcnTape {
  struct Layer {
    Matrix nodes_in;   // n x D
    Matrix edges_in;   // m x D
    MlpCache node_pass;
    Matrix node_pass_out;  // m x 3D
    Matrix nodes_out;      // n x D
    MlpCache edge_pass;    // empty for the last layer
  };

  WeightedSceneGraph graph;
  std::vector<Edge> edges;      // key order
  std::vector<double> weights;  // aligned with edges
  Vector normalizer;            // c_i per node
  std::vector<Layer> layers;
  MlpCache head;
  Matrix boxes;  // n x 4 sigmoid outputs
  GcnDims dims;
  std::uint64_t model_fingerprint = 0;
};

struct GcnGradient {
  GcnModel model;
  std::vector<double> edge_weights;  // aligned with the graph's edge order
};

// Throws NumericError when a predicted coordinate is not finite.
std::pair<Layout, GcnTape> gcn_forward(const WeightedSceneGraph& g,
                                       const GcnModel& model);

// grad_boxes is n x 4, dLoss/dbox coordinates. Throws ConsistencyError when
// the model is not the one that produced the tape.
GcnGradient gcn_backward(const GcnTape& tape, const GcnModel& model,
                         const Matrix& grad_boxes);

// Recomputes the forward value from the graph stored on the tape.
Layout replay(const GcnTape& tape, const GcnModel& model);

// ------------------------------------------------------------------ Adam

struct AdamConfig {
  double lr = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

class Adam {
 public:
  Adam() = default;
  Adam(AdamConfig config, const std::vector<std::size_t>& sizes);

  // Throws NumericError (before touching any parameter) if a gradient is
  // not finite.
  void step(const std::vector<std::span<double>>& params,
            const std::vector<std::span<const double>>& grads);

  long steps() const { return t_; }
  const AdamConfig& config() const { return config_; }

 private:
  AdamConfig config_;
  std::vector<std::vector<double>> m_;
  std::vector<std::vector<double>> v_;
  long t_ = 0;
};

// -------------------------------------------------------- serialization

inline constexpr int kModelFormatVersion = 1;

nlohmann::json model_to_json(const GcnModel& model);
GcnModel model_from_json(const nlohmann::json& j);

}  // namespace sgcanon
