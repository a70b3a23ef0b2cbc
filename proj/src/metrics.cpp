#include "sgcanon/metrics.hpp"

#include <algorithm>
#include <string>

namespace sgcanon {

double iou(const Box& a, const Box& b) {
  const double wa = a[2] - a[0], ha = a[3] - a[1];
  const double wb = b[2] - b[0], hb = b[3] - b[1];
  if (!(wa > 0.0 && ha > 0.0 && wb > 0.0 && hb > 0.0)) return 0.0;
  const double iw = std::min(a[2], b[2]) - std::max(a[0], b[0]);
  const double ih = std::min(a[3], b[3]) - std::max(a[1], b[1]);
  if (!(iw > 0.0 && ih > 0.0)) return 0.0;
  const double inter = iw * ih;
  return inter / (wa * ha + wb * hb - inter);
}

EvalResult evaluate(const std::vector<Layout>& pred, const std::vector<Layout>& gt) {
  if (pred.size() != gt.size())
    throw ShapeError("evaluation needs aligned scene lists: " +
                     std::to_string(pred.size()) + " vs " + std::to_string(gt.size()));
  EvalResult out;
  double sum = 0.0;
  int above03 = 0, above05 = 0;
  for (std::size_t s = 0; s < pred.size(); ++s) {
    if (pred[s].size() != gt[s].size())
      throw ShapeError("scene " + std::to_string(s) + " has " +
                       std::to_string(pred[s].size()) + " predicted and " +
                       std::to_string(gt[s].size()) + " ground-truth boxes");
    SceneScore scene;
    scene.objects = static_cast<int>(gt[s].size());
    int s03 = 0, s05 = 0;
    double ssum = 0.0;
    for (std::size_t i = 0; i < gt[s].size(); ++i) {
      const double v = iou(pred[s][i], gt[s][i]);
      ssum += v;
      s03 += v > 0.3;
      s05 += v > 0.5;
    }
    if (scene.objects > 0) {
      scene.miou = ssum / scene.objects;
      scene.r03 = static_cast<double>(s03) / scene.objects;
      scene.r05 = static_cast<double>(s05) / scene.objects;
    }
    sum += ssum;
    above03 += s03;
    above05 += s05;
    out.objects += scene.objects;
    out.per_scene.push_back(scene);
  }
  if (out.objects > 0) {
    out.miou = sum / out.objects;
    out.r03 = static_cast<double>(above03) / out.objects;
    out.r05 = static_cast<double>(above05) / out.objects;
  }
  return out;
}

}  // namespace sgcanon
