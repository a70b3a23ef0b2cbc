#pragma once

#include <vector>

#include "sgcanon/core.hpp"

namespace sgcanon {

// Intersection over union of two (x0, y0, x1, y1) boxes. Boxes with
// non-positive width or height score 0.
double iou(const Box& a, const Box& b);

struct SceneScore {
  double miou = 0.0;
  double r03 = 0.0;
  double r05 = 0.0;
  int objects = 0;
};

struct EvalResult {
  double miou = 0.0;  // mean over all objects of all scenes
  double r03 = 0.0;   // fraction of objects with IoU > 0.3
  double r05 = 0.0;   // fraction of objects with IoU > 0.5
  int objects = 0;
  std::vector<SceneScore> per_scene;
};

EvalResult evaluate(const std::vector<Layout>& pred, const std::vector<Layout>& gt);

}  // namespace sgcanon
