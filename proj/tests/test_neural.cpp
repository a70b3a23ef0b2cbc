#include <cmath>

#include "doctest.h"
#include "helpers.hpp"
#include "sgcanon/neural.hpp"

using namespace sgcanon;
using testutil::objects;

namespace {

GcnDims small_dims(int layers = 2) { return {2, 2, 4, 6, 5, layers}; }

WeightedSceneGraph random_weighted(Rng& rng, int n, int nr, double density) {
  WeightedSceneGraph g(testutil::objects(n, 2, &rng));
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      for (int r = 0; r < nr; ++r)
        if (i != j && bernoulli(rng, density)) g.set({i, r, j}, 0.1 + 0.9 * uniform01(rng));
  return g;
}

Matrix random_upstream(Rng& rng, int n) {
  Matrix m(n, 4);
  for (int i = 0; i < n; ++i)
    for (int c = 0; c < 4; ++c) m(i, c) = 2 * uniform01(rng) - 1;
  return m;
}

double linear_loss(const Layout& l, const Matrix& c) {
  double s = 0;
  for (std::size_t i = 0; i < l.size(); ++i)
    for (int k = 0; k < 4; ++k) s += c(i, k) * l[i][k];
  return s;
}

void randomize_biases(GcnModel& m, Rng& rng) {
  for (auto& mlp : m.edge_mlps)
    for (auto& lin : mlp.layers)
      for (auto& b : lin.bias) b = 0.2 * (2 * uniform01(rng) - 1);
  for (auto& lin : m.box_head.layers)
    for (auto& b : lin.bias) b = 0.2 * (2 * uniform01(rng) - 1);
}

bool close(double fd, double an) {
  const double diff = std::abs(fd - an);
  return diff < 1e-9 || diff <= 1e-4 * std::max(std::abs(fd), std::abs(an));
}

}  // namespace

TEST_CASE("mlp forward applies relu between layers only") {
  Mlp m;
  m.layers.push_back({Matrix::Identity(2, 2), Vector::Zero(2)});
  m.layers.push_back({Matrix::Identity(2, 2), Vector::Constant(2, -1.0)});
  Matrix x(1, 2);
  x << -3.0, 2.0;
  const Matrix y = mlp_forward(m, x, nullptr);
  CHECK(y(0, 0) == -1.0);  // relu(-3) - 1
  CHECK(y(0, 1) == 1.0);
}

TEST_CASE("gcn gradients match central differences") {
  Rng rng(17);
  int checked = 0, bad = 0;
  for (int trial = 0; trial < 20; ++trial) {
    GcnModel model = GcnModel::init(small_dims(1 + trial % 3), rng);
    // Nonzero biases keep pre-activations off the ReLU kink at exactly 0.
    randomize_biases(model, rng);
    const WeightedSceneGraph g = random_weighted(rng, 5, 2, 0.25);
    const Matrix up = random_upstream(rng, 5);
    auto [layout, tape] = gcn_forward(g, model);
    const GcnGradient grad = gcn_backward(tape, model, up);
    const double h = 1e-5;

    auto params = model.tensors();
    const auto grads = static_cast<const GcnModel&>(grad.model).tensors();
    for (std::size_t t = 0; t < params.size(); ++t) {
      for (std::size_t k = 0; k < params[t].size(); ++k) {
        const double keep = params[t][k];
        params[t][k] = keep + h;
        const double lp = linear_loss(gcn_forward(g, model).first, up);
        params[t][k] = keep - h;
        const double lm = linear_loss(gcn_forward(g, model).first, up);
        params[t][k] = keep;
        const double fd = (lp - lm) / (2 * h);
        ++checked;
        if (!close(fd, grads[t][k])) {
          ++bad;
          MESSAGE(model.tensor_names()[t] << "[" << k << "] fd=" << fd << " an=" << grads[t][k]);
        }
      }
    }
    std::size_t idx = 0;
    for (const auto& [e, w] : g.edges()) {
      if (w + h > 1.0) {
        ++idx;
        continue;
      }
      WeightedSceneGraph gp = g, gm = g;
      gp.set(e, w + h);
      gm.set(e, w - h);
      const double fd = (linear_loss(gcn_forward(gp, model).first, up) -
                         linear_loss(gcn_forward(gm, model).first, up)) /
                        (2 * h);
      ++checked;
      if (!close(fd, grad.edge_weights[idx])) ++bad;
      ++idx;
    }
  }
  CHECK(checked > 1000);
  CHECK(bad == 0);
}

TEST_CASE("nodes without edges depend only on their category") {
  Rng rng(2);
  const GcnModel model = GcnModel::init(small_dims(), rng);
  WeightedSceneGraph g(std::vector<Object>{{0, {}}, {1, {}}, {0, {}}});
  const Layout l = gcn_forward(g, model).first;
  CHECK(l[0] == l[2]);
  CHECK(l[0] != l[1]);
}

TEST_CASE("zero weights give sigmoid of the head bias") {
  Rng rng(2);
  GcnModel model = GcnModel::init(small_dims(), rng);
  for (auto t : model.tensors())
    for (double& x : t) x = 0.0;
  model.box_head.layers.back().bias << 0.5, -1.0, 2.0, 0.0;
  WeightedSceneGraph g = random_weighted(rng, 4, 2, 0.4);
  const Layout l = gcn_forward(g, model).first;
  for (std::size_t i = 0; i < l.size(); ++i) {
    CHECK(l[i][0] == doctest::Approx(1 / (1 + std::exp(-0.5))));
    CHECK(l[i][1] == doctest::Approx(1 / (1 + std::exp(1.0))));
    CHECK(l[i][3] == doctest::Approx(0.5));
  }
}

TEST_CASE("a single incident edge cancels its own weight") {
  Rng rng(9);
  GcnModel model = GcnModel::init(small_dims(1), rng);
  // Constant edge MLP: only biases survive.
  for (auto& lin : model.edge_mlps[0].layers) lin.weight.setZero();
  model.edge_mlps[0].layers.back().bias.setRandom();
  WeightedSceneGraph g(objects(2));
  g.set({0, 0, 1}, 0.4);
  auto [layout, tape] = gcn_forward(g, model);
  const GcnGradient grad = gcn_backward(tape, model, random_upstream(rng, 2));
  REQUIRE(grad.edge_weights.size() == 1);
  CHECK(std::abs(grad.edge_weights[0]) < 1e-15);
  WeightedSceneGraph g2 = g;
  g2.set({0, 0, 1}, 0.9);
  CHECK(gcn_forward(g2, model).first == layout);
}

TEST_CASE("zero upstream gives zero gradients") {
  Rng rng(4);
  const GcnModel model = GcnModel::init(small_dims(), rng);
  const WeightedSceneGraph g = random_weighted(rng, 5, 2, 0.3);
  auto [layout, tape] = gcn_forward(g, model);
  const GcnGradient grad = gcn_backward(tape, model, Matrix::Zero(5, 4));
  for (auto t : static_cast<const GcnModel&>(grad.model).tensors())
    for (double x : t) CHECK(x == 0.0);
  for (double x : grad.edge_weights) CHECK(x == 0.0);
}

TEST_CASE("backward rejects a tape from another model") {
  Rng rng(4);
  GcnModel model = GcnModel::init(small_dims(), rng);
  const WeightedSceneGraph g = random_weighted(rng, 3, 2, 0.5);
  auto [layout, tape] = gcn_forward(g, model);
  model.box_head.layers[0].bias[0] += 1e-3;
  CHECK_THROWS_AS(gcn_backward(tape, model, Matrix::Zero(3, 4)), ConsistencyError);
}

TEST_CASE("graph and model dimensions must agree") {
  Rng rng(4);
  const GcnModel model = GcnModel::init(small_dims(), rng);
  WeightedSceneGraph g(std::vector<Object>{{5, {}}});
  CHECK_THROWS_AS(gcn_forward(g, model), ShapeError);
  WeightedSceneGraph h(objects(2));
  h.set({0, 3, 1}, 1.0);
  CHECK_THROWS_AS(gcn_forward(h, model), ShapeError);
}

TEST_CASE("replay is bit exact and outputs stay inside the unit box") {
  Rng rng(21);
  const GcnModel model = GcnModel::init(small_dims(3), rng);
  const WeightedSceneGraph g = random_weighted(rng, 7, 2, 0.3);
  auto [layout, tape] = gcn_forward(g, model);
  CHECK(replay(tape, model) == layout);
  CHECK(gcn_forward(g, model).first == layout);
  for (const auto& b : layout.boxes())
    for (double x : b) CHECK((x > 0.0 && x < 1.0));
}

TEST_CASE("relabelling nodes permutes the boxes") {
  Rng rng(13);
  const GcnModel model = GcnModel::init(small_dims(2), rng);
  const int n = 6;
  const WeightedSceneGraph g = random_weighted(rng, n, 2, 0.3);
  std::vector<int> perm{3, 0, 5, 1, 4, 2};
  std::vector<Object> objs(n);
  for (int i = 0; i < n; ++i) objs[perm[i]] = g.objects()[i];
  WeightedSceneGraph pg(objs);
  for (const auto& [e, w] : g.edges()) pg.set({perm[e.subject], e.relation, perm[e.object]}, w);
  const Layout a = gcn_forward(g, model).first, b = gcn_forward(pg, model).first;
  for (int i = 0; i < n; ++i)
    for (int c = 0; c < 4; ++c) CHECK(b[perm[i]][c] == doctest::Approx(a[i][c]).epsilon(1e-12));
}

TEST_CASE("adam basics") {
  std::vector<double> x{1.0, -2.0};
  Adam opt({1e-2}, {2});
  std::vector<double> zero{0.0, 0.0};
  opt.step({std::span<double>(x)}, {std::span<const double>(zero)});
  CHECK(x[0] == 1.0);
  CHECK(x[1] == -2.0);

  // Constant gradient: steps approach lr in magnitude.
  std::vector<double> y{0.0};
  Adam c({1e-3}, {1});
  std::vector<double> g{3.0};
  double last = 0.0;
  for (int k = 0; k < 100; ++k) {
    const double before = y[0];
    c.step({std::span<double>(y)}, {std::span<const double>(g)});
    last = before - y[0];
  }
  CHECK(last == doctest::Approx(1e-3).epsilon(1e-4));
}

TEST_CASE("adam minimizes a quadratic bowl") {
  std::vector<double> x{1.0};
  Adam opt({1e-2}, {1});
  for (int k = 0; k < 2000; ++k) {
    std::vector<double> g{2.0 * x[0]};
    opt.step({std::span<double>(x)}, {std::span<const double>(g)});
  }
  CHECK(std::abs(x[0]) < 1e-3);
}

TEST_CASE("adam refuses non-finite gradients without touching parameters") {
  std::vector<double> a{1.0}, b{2.0};
  Adam opt({1e-2}, {1, 1});
  std::vector<double> ga{1.0}, gb{std::nan("")};
  CHECK_THROWS_AS(opt.step({std::span<double>(a), std::span<double>(b)},
                           {std::span<const double>(ga), std::span<const double>(gb)}),
                  NumericError);
  CHECK(a[0] == 1.0);
  CHECK(b[0] == 2.0);
  CHECK(opt.steps() == 0);
}

TEST_CASE("model JSON round trip is exact") {
  Rng rng(8);
  const GcnModel model = GcnModel::init(small_dims(2), rng);
  const GcnModel back = model_from_json(model_to_json(model));
  CHECK(back.fingerprint() == model.fingerprint());
  CHECK(back.dims == model.dims);
  nlohmann::json j = model_to_json(model);
  j["version"] = 99;
  CHECK_THROWS(model_from_json(j));
}

TEST_CASE("parameter count matches the layer shapes") {
  Rng rng(1);
  const GcnDims d{3, 4, 8, 16, 12, 2};
  const GcnModel m = GcnModel::init(d, rng);
  const std::size_t per_layer = (24 * 16 + 16) + (16 * 16 + 16) + (16 * 24 + 24);
  const std::size_t head = (8 * 12 + 12) + (12 * 4 + 4);
  CHECK(m.num_parameters() == 3 * 8 + 4 * 8 + 2 * per_layer + head);
  CHECK(m.tensor_names().size() == m.tensors().size());
}
