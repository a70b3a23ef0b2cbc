#include "sgcanon/io.hpp"

#include <fstream>
#include <sstream>

namespace sgcanon {

using nlohmann::json;

namespace {

std::ifstream open_in(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open '" + path.string() + "' for reading");
  return in;
}

std::ofstream open_out(const std::filesystem::path& path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw InputError("cannot open '" + path.string() + "' for writing");
  return out;
}

std::vector<Object> objects_from_json(const json& j, const RelationVocab& vocab) {
  std::vector<Object> objects;
  for (const auto& jo : j.at("objects")) {
    Object o;
    o.category = vocab.category_id(jo.at("category").get<std::string>());
    if (jo.contains("attributes"))
      o.attributes = jo.at("attributes").get<std::map<std::string, std::string>>();
    vocab.check_attributes(o.attributes);
    objects.push_back(std::move(o));
  }
  return objects;
}

json objects_to_json(const std::vector<Object>& objects, const RelationVocab& vocab) {
  json out = json::array();
  for (const auto& o : objects)
    out.push_back({{"category", vocab.category_name(o.category)},
                   {"attributes", o.attributes}});
  return out;
}

std::optional<Layout> layout_from_json(const json& j, int num_nodes) {
  if (!j.contains("boxes") || j.at("boxes").is_null()) return std::nullopt;
  std::vector<Box> boxes;
  for (const auto& jb : j.at("boxes")) {
    const auto v = jb.get<std::vector<double>>();
    if (v.size() != 4) throw ParseError("box must have 4 coordinates");
    boxes.push_back({v[0], v[1], v[2], v[3]});
  }
  if (static_cast<int>(boxes.size()) != num_nodes)
    throw ShapeError("scene has " + std::to_string(num_nodes) + " objects but " +
                     std::to_string(boxes.size()) + " boxes");
  return Layout(std::move(boxes));
}

json layout_to_json(const Layout& layout) {
  json out = json::array();
  for (const auto& b : layout.boxes()) out.push_back({b[0], b[1], b[2], b[3]});
  return out;
}

Edge edge_from_json(const json& je, const RelationVocab& vocab) {
  if (!je.is_array() || (je.size() != 3 && je.size() != 4))
    throw ParseError("edge must be [i, relation, j] or [i, relation, j, w]");
  return {je[0].get<int>(), vocab.relation_id(je[1].get<std::string>()),
          je[2].get<int>()};
}

template <typename Record, typename Parse>
std::vector<Record> read_lines(std::istream& in, Parse&& parse) {
  std::vector<Record> out;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const std::string where = "line " + std::to_string(line_no) + ": ";
    try {
      out.push_back(parse(json::parse(line)));
    } catch (const json::exception& e) {
      throw ParseError(where + e.what());
    } catch (const VocabError& e) {
      throw VocabError(where + e.what());
    } catch (const ValidationError& e) {
      throw ParseError(where + e.what());
    }
  }
  return out;
}

}  // namespace

// ------------------------------------------------------------ vocabulary

RelationVocab vocab_from_json(const json& j) {
  try {
    RelationVocab::AttributeSchema schema;
    if (j.contains("attributes")) {
      for (const auto& [name, values] : j.at("attributes").items())
        schema[name] = values.get<std::set<std::string>>();
    }
    return RelationVocab(j.at("relations").get<std::vector<std::string>>(),
                         j.at("categories").get<std::vector<std::string>>(),
                         std::move(schema));
  } catch (const json::exception& e) {
    throw ParseError(std::string("malformed vocabulary: ") + e.what());
  }
}

json vocab_to_json(const RelationVocab& vocab) {
  json attrs = json::object();
  for (const auto& [name, values] : vocab.attributes()) attrs[name] = values;
  return {{"relations", vocab.relations()},
          {"categories", vocab.categories()},
          {"attributes", attrs}};
}

RelationVocab read_vocab(const std::filesystem::path& path) {
  return vocab_from_json(read_json_file(path));
}

void write_vocab(const std::filesystem::path& path, const RelationVocab& vocab) {
  write_json_file(path, vocab_to_json(vocab));
}

// ----------------------------------------------------------------- scenes

json scene_to_json(const SceneRecord& record, const RelationVocab& vocab) {
  json j;
  j["objects"] = objects_to_json(record.graph.objects(), vocab);
  json edges = json::array();
  for (const auto& e : record.graph.edges())
    edges.push_back({e.subject, vocab.relation_name(e.relation), e.object});
  j["edges"] = std::move(edges);
  if (record.layout) j["boxes"] = layout_to_json(*record.layout);
  return j;
}

SceneRecord scene_from_json(const json& j, const RelationVocab& vocab) {
  SceneRecord rec;
  rec.graph = SceneGraph(objects_from_json(j, vocab));
  for (const auto& je : j.at("edges")) {
    if (je.size() == 4 && je[3].get<double>() != 1.0)
      throw ParseError("unweighted scene has an edge with weight != 1");
    rec.graph.insert(edge_from_json(je, vocab));
  }
  rec.layout = layout_from_json(j, rec.graph.num_nodes());
  return rec;
}

json scene_to_json(const WeightedSceneRecord& record, const RelationVocab& vocab) {
  json j;
  j["objects"] = objects_to_json(record.graph.objects(), vocab);
  json edges = json::array();
  for (const auto& [e, w] : record.graph.edges())
    edges.push_back({e.subject, vocab.relation_name(e.relation), e.object, w});
  j["edges"] = std::move(edges);
  if (record.layout) j["boxes"] = layout_to_json(*record.layout);
  return j;
}

WeightedSceneRecord weighted_scene_from_json(const json& j,
                                             const RelationVocab& vocab) {
  WeightedSceneRecord rec;
  rec.graph = WeightedSceneGraph(objects_from_json(j, vocab));
  for (const auto& je : j.at("edges")) {
    const Edge e = edge_from_json(je, vocab);
    const double w = je.size() == 4 ? je[3].get<double>() : 1.0;
    if (rec.graph.contains(e)) throw ParseError("duplicate weighted edge");
    rec.graph.set(e, w);
  }
  rec.layout = layout_from_json(j, rec.graph.num_nodes());
  return rec;
}

std::vector<SceneRecord> read_graphs(std::istream& in, const RelationVocab& vocab) {
  return read_lines<SceneRecord>(
      in, [&](const json& j) { return scene_from_json(j, vocab); });
}

std::vector<SceneRecord> read_graphs(const std::filesystem::path& path,
                                     const RelationVocab& vocab) {
  auto in = open_in(path);
  return read_graphs(in, vocab);
}

void write_graphs(std::ostream& out, const std::vector<SceneRecord>& records,
                  const RelationVocab& vocab) {
  for (const auto& r : records) out << scene_to_json(r, vocab).dump() << '\n';
}

void write_graphs(const std::filesystem::path& path,
                  const std::vector<SceneRecord>& records,
                  const RelationVocab& vocab) {
  auto out = open_out(path);
  write_graphs(out, records, vocab);
}

std::vector<WeightedSceneRecord> read_weighted_graphs(
    const std::filesystem::path& path, const RelationVocab& vocab) {
  auto in = open_in(path);
  return read_lines<WeightedSceneRecord>(
      in, [&](const json& j) { return weighted_scene_from_json(j, vocab); });
}

void write_weighted_graphs(const std::filesystem::path& path,
                           const std::vector<WeightedSceneRecord>& records,
                           const RelationVocab& vocab) {
  auto out = open_out(path);
  for (const auto& r : records) out << scene_to_json(r, vocab).dump() << '\n';
}

// ------------------------------------------------- formulas and params

FormulaSet formulas_from_json(const json& j, const RelationVocab& vocab) {
  try {
    FormulaSet f;
    f.num_relations = vocab.num_relations();
    if (j.contains("transitive")) {
      for (const auto& name : j.at("transitive"))
        f.transitive.insert(vocab.relation_id(name.get<std::string>()));
    }
    if (j.contains("converse")) {
      for (const auto& pair : j.at("converse")) {
        if (!pair.is_array() || pair.size() != 2)
          throw ParseError("converse entry must be a [name, name] pair");
        f.converse.emplace(vocab.relation_id(pair[0].get<std::string>()),
                           vocab.relation_id(pair[1].get<std::string>()));
      }
    }
    return f;
  } catch (const json::exception& e) {
    throw ParseError(std::string("malformed formula set: ") + e.what());
  }
}

json formulas_to_json(const FormulaSet& f, const RelationVocab& vocab) {
  json trans = json::array();
  for (int r : f.transitive) trans.push_back(vocab.relation_name(r));
  json conv = json::array();
  for (auto [r, rc] : f.converse)
    conv.push_back({vocab.relation_name(r), vocab.relation_name(rc)});
  return {{"transitive", trans}, {"converse", conv}};
}

FormulaSet read_formulas(const std::filesystem::path& path,
                         const RelationVocab& vocab) {
  return formulas_from_json(read_json_file(path), vocab);
}

CanonParams params_from_json(const json& j) {
  try {
    CanonParams p;
    const auto trans = j.at("theta_trans").get<std::vector<double>>();
    const int nr = static_cast<int>(trans.size());
    p.theta_trans = Eigen::Map<const Eigen::VectorXd>(trans.data(), nr);
    p.theta_conv.resize(nr, nr + 1);
    const auto& jc = j.at("theta_conv");
    if (jc.size() == static_cast<std::size_t>(nr) && (nr == 0 || jc[0].is_array())) {
      for (int r = 0; r < nr; ++r) {
        const auto row = jc[r].get<std::vector<double>>();
        if (row.size() != static_cast<std::size_t>(nr + 1))
          throw ShapeError("theta_conv row has wrong length");
        for (int k = 0; k <= nr; ++k) p.theta_conv(r, k) = row[k];
      }
    } else {
      const auto flat = jc.get<std::vector<double>>();
      if (flat.size() != static_cast<std::size_t>(nr * (nr + 1)))
        throw ShapeError("theta_conv must hold |R| x (|R|+1) values");
      for (int r = 0; r < nr; ++r)
        for (int k = 0; k <= nr; ++k) p.theta_conv(r, k) = flat[r * (nr + 1) + k];
    }
    p.validate();
    return p;
  } catch (const json::exception& e) {
    throw ParseError(std::string("malformed parameter file: ") + e.what());
  }
}

json params_to_json(const CanonParams& params) {
  const int nr = params.num_relations();
  std::vector<double> trans(params.theta_trans.data(), params.theta_trans.data() + nr);
  json rows = json::array();
  for (int r = 0; r < nr; ++r) {
    std::vector<double> row(nr + 1);
    for (int k = 0; k <= nr; ++k) row[k] = params.theta_conv(r, k);
    rows.push_back(row);
  }
  return {{"theta_trans", trans}, {"theta_conv", rows}};
}

CanonParams read_params(const std::filesystem::path& path) {
  return params_from_json(read_json_file(path));
}

json read_json_file(const std::filesystem::path& path) {
  auto in = open_in(path);
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw ParseError("'" + path.string() + "': " + e.what());
  }
}

void write_json_file(const std::filesystem::path& path, const json& j) {
  auto out = open_out(path);
  out << j.dump(2) << '\n';
}

}  // namespace sgcanon
