#include "sgcanon/render.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <map>
#include <sstream>

namespace sgcanon {

namespace {

std::string escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

// Fixed-precision formatting keeps output byte-stable across platforms.
std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

std::string hsv_hex(double h, double s, double v) {
  const double c = v * s;
  const double hp = std::fmod(h, 1.0) * 6.0;
  const double x = c * (1.0 - std::abs(std::fmod(hp, 2.0) - 1.0));
  double r = 0, g = 0, b = 0;
  switch (static_cast<int>(hp)) {
    case 0: r = c; g = x; break;
    case 1: r = x; g = c; break;
    case 2: g = c; b = x; break;
    case 3: g = x; b = c; break;
    case 4: r = x; b = c; break;
    default: r = c; b = x; break;
  }
  const double m = v - c;
  char buf[8];
  std::snprintf(buf, sizeof buf, "#%02x%02x%02x",
                static_cast<int>(std::lround((r + m) * 255)),
                static_cast<int>(std::lround((g + m) * 255)),
                static_cast<int>(std::lround((b + m) * 255)));
  return buf;
}

}  // namespace

std::string category_color(int category) {
  // Golden-angle hue steps spread neighbouring ids apart.
  const double hue = std::fmod(0.6180339887498949 * category, 1.0);
  return hsv_hex(hue, 0.55, 0.9);
}

std::string rasterize(const Layout& layout, const SceneGraph& graph,
                      const RelationVocab& vocab, int size) {
  if (layout.size() != static_cast<std::size_t>(graph.num_nodes()))
    throw ShapeError("layout and graph sizes differ");
  std::ostringstream out;
  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << size
      << "\" height=\"" << size << "\" viewBox=\"0 0 " << size << ' ' << size
      << "\">\n";
  out << "<rect x=\"0\" y=\"0\" width=\"" << size << "\" height=\"" << size
      << "\" fill=\"white\" stroke=\"black\"/>\n";
  const double s = size;
  for (std::size_t i = 0; i < layout.size(); ++i) {
    const Box& b = layout[i];
    const Object& o = graph.objects()[i];
    std::string label = vocab.category_name(o.category);
    for (const auto& [k, v] : o.attributes) label += " " + k + "=" + v;
    out << "<g class=\"object\" data-index=\"" << i << "\">"
        << "<rect x=\"" << num(b[0] * s) << "\" y=\"" << num(b[1] * s)
        << "\" width=\"" << num(std::max(0.0, b[2] - b[0]) * s) << "\" height=\""
        << num(std::max(0.0, b[3] - b[1]) * s) << "\" fill=\""
        << category_color(o.category) << "\" fill-opacity=\"0.5\" stroke=\"black\"/>"
        << "<text x=\"" << num(b[0] * s + 2) << "\" y=\"" << num(b[1] * s + 10)
        << "\" font-size=\"8\" font-family=\"sans-serif\">" << escape(label)
        << "</text></g>\n";
  }
  out << "</svg>\n";
  return out.str();
}

std::string plot_svg(const Plot& plot, int width, int height) {
  const double left = 56, right = 120, top = 28, bottom = 40;
  const double pw = width - left - right, ph = height - top - bottom;
  double x0 = std::numeric_limits<double>::infinity(), x1 = -x0;
  double y0 = x0, y1 = -x0;
  for (const auto& s : plot.series) {
    for (std::size_t i = 0; i < std::min(s.x.size(), s.y.size()); ++i) {
      if (!std::isfinite(s.x[i]) || !std::isfinite(s.y[i])) continue;
      x0 = std::min(x0, s.x[i]);
      x1 = std::max(x1, s.x[i]);
      y0 = std::min(y0, s.y[i]);
      y1 = std::max(y1, s.y[i]);
    }
  }
  if (!std::isfinite(x0)) x0 = 0, x1 = 1, y0 = 0, y1 = 1;
  if (x1 == x0) x1 = x0 + 1;
  if (y1 == y0) y1 = y0 + 1;
  auto px = [&](double x) { return left + (x - x0) / (x1 - x0) * pw; };
  auto py = [&](double y) { return top + (1.0 - (y - y0) / (y1 - y0)) * ph; };

  std::ostringstream out;
  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width
      << "\" height=\"" << height << "\" font-family=\"sans-serif\" font-size=\"10\">\n";
  out << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  out << "<text x=\"" << num(left) << "\" y=\"16\" font-size=\"12\">"
      << escape(plot.title) << "</text>\n";
  out << "<rect x=\"" << num(left) << "\" y=\"" << num(top) << "\" width=\"" << num(pw)
      << "\" height=\"" << num(ph) << "\" fill=\"none\" stroke=\"black\"/>\n";
  for (int t = 0; t <= 4; ++t) {
    const double xv = x0 + (x1 - x0) * t / 4.0, yv = y0 + (y1 - y0) * t / 4.0;
    out << "<text x=\"" << num(px(xv)) << "\" y=\"" << num(top + ph + 14)
        << "\" text-anchor=\"middle\">" << num(xv) << "</text>\n";
    out << "<text x=\"" << num(left - 4) << "\" y=\"" << num(py(yv) + 3)
        << "\" text-anchor=\"end\">" << num(yv) << "</text>\n";
  }
  out << "<text x=\"" << num(left + pw / 2) << "\" y=\"" << num(height - 6)
      << "\" text-anchor=\"middle\">" << escape(plot.x_label) << "</text>\n";
  out << "<text x=\"12\" y=\"" << num(top + ph / 2) << "\" transform=\"rotate(-90 12 "
      << num(top + ph / 2) << ")\" text-anchor=\"middle\">" << escape(plot.y_label)
      << "</text>\n";
  for (std::size_t k = 0; k < plot.series.size(); ++k) {
    const auto& s = plot.series[k];
    const std::string color = category_color(static_cast<int>(k));
    out << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"1.5\" points=\"";
    bool first = true;
    for (std::size_t i = 0; i < std::min(s.x.size(), s.y.size()); ++i) {
      if (!std::isfinite(s.x[i]) || !std::isfinite(s.y[i])) continue;
      out << (first ? "" : " ") << num(px(s.x[i])) << ',' << num(py(s.y[i]));
      first = false;
    }
    out << "\"/>\n";
    const double ly = top + 12 + 14.0 * k;
    out << "<line x1=\"" << num(left + pw + 8) << "\" y1=\"" << num(ly - 3) << "\" x2=\""
        << num(left + pw + 22) << "\" y2=\"" << num(ly - 3) << "\" stroke=\"" << color
        << "\" stroke-width=\"2\"/><text x=\"" << num(left + pw + 26) << "\" y=\""
        << num(ly) << "\">" << escape(s.name) << "</text>\n";
  }
  out << "</svg>\n";
  return out.str();
}

int Table::column(const std::string& name) const {
  const auto it = std::find(header.begin(), header.end(), name);
  return it == header.end() ? -1 : static_cast<int>(it - header.begin());
}

Table read_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open '" + path.string() + "'");
  auto split = [](const std::string& line) {
    std::vector<std::string> cells;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    if (!line.empty() && line.back() == ',') cells.emplace_back();
    return cells;
  };
  Table t;
  std::string line;
  if (std::getline(in, line)) t.header = split(line);
  while (std::getline(in, line))
    if (!line.empty()) t.rows.push_back(split(line));
  return t;
}

Plot plot_from_table(const Table& table, const std::string& x_col,
                     const std::string& y_col, const std::string& group_col) {
  const int xi = table.column(x_col), yi = table.column(y_col);
  const int gi = group_col.empty() ? -1 : table.column(group_col);
  if (xi < 0 || yi < 0 || (!group_col.empty() && gi < 0))
    throw InputError("plot column missing from table");
  auto value = [](const std::vector<std::string>& row, int c) {
    if (c >= static_cast<int>(row.size())) return std::nan("");
    char* end = nullptr;
    const double v = std::strtod(row[c].c_str(), &end);
    return end != row[c].c_str() ? v : std::nan("");
  };
  Plot plot{y_col + " vs " + x_col, x_col, y_col, {}};
  std::map<std::string, std::size_t> index;
  for (const auto& row : table.rows) {
    const std::string key = gi >= 0 && gi < static_cast<int>(row.size()) ? row[gi] : y_col;
    auto [it, fresh] = index.emplace(key, plot.series.size());
    if (fresh) plot.series.push_back({key, {}, {}});
    auto& s = plot.series[it->second];
    s.x.push_back(value(row, xi));
    s.y.push_back(value(row, yi));
  }
  return plot;
}

}  // namespace sgcanon
