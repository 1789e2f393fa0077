#pragma once

#include <fstream>
#include <sstream>
#include <string>

#include "json.hpp"

#include "qgraph/graph.hpp"

namespace qg {

using json = nlohmann::json;

inline constexpr int kGraphDocumentVersion = 1;

/// Parse the "vertices"/"edges" part of a graph document.
inline MetricGraph build_graph(const json& doc) {
  try {
    if (!doc.is_object()) throw InputError("graph document must be an object");
    const int version = doc.value("version", kGraphDocumentVersion);
    if (version != kGraphDocumentVersion) throw InputError("unsupported graph document version");
    std::vector<Vertex> vs;
    for (const auto& v : doc.at("vertices")) vs.push_back({v.at("id").get<std::string>(),
                                                          parse_condition(v.at("condition").get<std::string>())});
    std::map<std::string, int> index;
    for (std::size_t i = 0; i < vs.size(); ++i) index[vs[i].id] = static_cast<int>(i);
    auto lookup = [&](const std::string& id) {
      auto it = index.find(id);
      if (it == index.end()) throw InputError("edge endpoint '" + id + "' does not exist");
      return it->second;
    };
    std::vector<Edge> es;
    for (const auto& e : doc.at("edges")) {
      Edge ed;
      ed.id = e.at("id").get<std::string>();
      ed.from = lookup(e.at("from").get<std::string>());
      ed.to = lookup(e.at("to").get<std::string>());
      const json& len = e.at("length");
      if (len.is_number()) {
        ed.length = EdgeLength::numeric(len.get<double>());
      } else {
        if (len.contains("expr")) ed.length.expr = LengthExpr::parse(len.at("expr").get<std::string>());
        if (len.contains("float"))
          ed.length.value = len.at("float").get<double>();
        else if (ed.length.expr)
          ed.length.value = ed.length.expr->value();
        else
          throw InputError("edge '" + ed.id + "' has neither float nor expr length");
      }
      es.push_back(std::move(ed));
    }
    return MetricGraph(std::move(vs), std::move(es), doc.value("disjoint", false));
  } catch (const json::exception& ex) {
    throw InputError(std::string("malformed graph document: ") + ex.what());
  }
}

inline json serialize(const MetricGraph& g) {
  json doc;
  doc["version"] = kGraphDocumentVersion;
  if (g.disjoint_family()) doc["disjoint"] = true;
  doc["vertices"] = json::array();
  for (const auto& v : g.vertices()) doc["vertices"].push_back({{"id", v.id}, {"condition", condition_tag(v.condition)}});
  doc["edges"] = json::array();
  for (const auto& e : g.edges()) {
    json len;
    len["float"] = e.length.value;
    if (e.length.expr) len["expr"] = e.length.expr->text();
    doc["edges"].push_back({{"id", e.id}, {"from", g.vertex(e.from).id}, {"to", g.vertex(e.to).id}, {"length", len}});
  }
  return doc;
}

inline json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open '" + path + "'");
  try {
    return json::parse(in);
  } catch (const json::exception& ex) {
    throw InputError("cannot parse '" + path + "': " + ex.what());
  }
}

inline MetricGraph load_graph(const std::string& path) { return build_graph(read_json_file(path)); }

}  // namespace qg
