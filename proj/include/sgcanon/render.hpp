#pragma once

// SVG output: layout rasterization and a small line-chart plotter.

#include <filesystem>
#include <string>
#include <vector>

#include "sgcanon/core.hpp"

namespace sgcanon {

// Fill color for a category id, "#rrggbb". Fixed per id.
std::string category_color(int category);

// One <rect> per box scaled to a square canvas of `size` pixels, labelled
// with the category name and attribute values.
std::string rasterize(const Layout& layout, const SceneGraph& graph,
                      const RelationVocab& vocab, int size = 256);

struct Series {
  std::string name;
  std::vector<double> x;
  std::vector<double> y;
};

struct Plot {
  std::string title;
  std::string x_label;
  std::string y_label;
  std::vector<Series> series;
};

std::string plot_svg(const Plot& plot, int width = 480, int height = 320);

// Reads a header-first CSV. Non-numeric cells become NaN.
struct Table {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  int column(const std::string& name) const;  // -1 if absent
};

Table read_csv(const std::filesystem::path& path);

// One series per distinct value of `group_col` (or a single series when it
// is empty), x and y read from the named columns.
Plot plot_from_table(const Table& table, const std::string& x_col,
                     const std::string& y_col, const std::string& group_col = "");

}  // namespace sgcanon
