#pragma once

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstring>
#include <cstdint>
#include <limits>
#include <map>
#include <numeric>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "qgraph/errors.hpp"

namespace qg {

enum class Condition { Dirichlet, Neumann, NeumannKirchhoff };

inline const char* condition_tag(Condition c) {
  switch (c) {
    case Condition::Dirichlet: return "D";
    case Condition::Neumann: return "N";
    case Condition::NeumannKirchhoff: return "NK";
  }
  return "?";
}

inline Condition parse_condition(const std::string& s) {
  if (s == "D" || s == "Dirichlet") return Condition::Dirichlet;
  if (s == "N" || s == "Neumann") return Condition::Neumann;
  if (s == "NK" || s == "NeumannKirchhoff") return Condition::NeumannKirchhoff;
  throw InputError("unknown vertex condition '" + s + "'");
}

/// Length written as r * sqrt(s) with positive rationals r and s.
/// Grammar: factor ('*' factor)*, factor := INT ['/' INT] | 'sqrt(' INT ['/' INT] ')'.
class LengthExpr {
 public:
  static LengthExpr parse(const std::string& text) {
    LengthExpr e;
    e.text_ = text;
    std::size_t pos = 0;
    auto fail = [&](const std::string& why) -> void {
      throw InputError("bad length expression '" + text + "': " + why);
    };
    auto skip = [&] {
      while (pos < text.size() && text[pos] == ' ') ++pos;
    };
    auto integer = [&]() -> std::int64_t {
      skip();
      std::size_t start = pos;
      while (pos < text.size() && std::isdigit(static_cast<unsigned char>(text[pos]))) ++pos;
      if (pos == start) fail("expected integer");
      if (pos - start > 12) fail("integer too large");
      return std::stoll(text.substr(start, pos - start));
    };
    auto optional_denominator = [&]() -> std::int64_t {
      skip();
      if (pos < text.size() && text[pos] == '/') {
        ++pos;
        return integer();
      }
      return 1;
    };
    auto expect = [&](char c) {
      skip();
      if (pos >= text.size() || text[pos] != c) fail(std::string("expected '") + c + "'");
      ++pos;
    };
    bool first = true;
    while (true) {
      skip();
      if (!first) {
        if (pos >= text.size()) break;
        expect('*');
        skip();
      }
      first = false;
      if (text.compare(pos, 5, "sqrt(") == 0) {
        pos += 5;
        std::int64_t p = integer();
        std::int64_t q = optional_denominator();
        expect(')');
        if (p <= 0 || q <= 0) fail("nonpositive rational");
        e.sn_ = mul(e.sn_, p);
        e.sd_ = mul(e.sd_, q);
      } else {
        std::int64_t p = integer();
        std::int64_t q = optional_denominator();
        if (p <= 0 || q <= 0) fail("nonpositive rational");
        e.rn_ = mul(e.rn_, p);
        e.rd_ = mul(e.rd_, q);
      }
      reduce(e.rn_, e.rd_);
      reduce(e.sn_, e.sd_);
    }
    // Pull square factors of s into r so that s is a reduced, square-free quotient.
    std::int64_t sq = largest_square_divisor(e.sn_);
    e.rn_ = mul(e.rn_, sq);
    e.sn_ /= sq * sq;
    std::int64_t sq2 = largest_square_divisor(e.sd_);
    e.rd_ = mul(e.rd_, sq2);
    e.sd_ /= sq2 * sq2;
    reduce(e.rn_, e.rd_);
    return e;
  }

  const std::string& text() const { return text_; }

  double value() const {
    long double r = static_cast<long double>(rn_) / static_cast<long double>(rd_);
    long double s = std::sqrt(static_cast<long double>(sn_) / static_cast<long double>(sd_));
    return static_cast<double>(r * s);
  }

  /// Square-free integer q with r*sqrt(s) in Q*sqrt(q).
  std::int64_t squarefree_class() const {
    std::int64_t n = mul(sn_, sd_);
    std::int64_t sq = largest_square_divisor(n);
    return n / (sq * sq);
  }

  bool operator==(const LengthExpr& o) const { return text_ == o.text_; }

 private:
  static std::int64_t mul(std::int64_t a, std::int64_t b) {
    __int128 p = static_cast<__int128>(a) * b;
    if (p > std::numeric_limits<std::int64_t>::max()) throw InputError("length expression overflow");
    return static_cast<std::int64_t>(p);
  }
  static void reduce(std::int64_t& n, std::int64_t& d) {
    std::int64_t g = std::gcd(n, d);
    n /= g;
    d /= g;
  }
  static std::int64_t largest_square_divisor(std::int64_t n) {
    std::int64_t out = 1;
    for (std::int64_t p = 2; p * p <= n; ++p) {
      while (n % (p * p) == 0) {
        n /= p * p;
        out *= p;
      }
      while (n % p == 0) n /= p;
    }
    return out;
  }

  std::string text_;
  std::int64_t rn_ = 1, rd_ = 1, sn_ = 1, sd_ = 1;
};

struct EdgeLength {
  double value = 0.0;
  std::optional<LengthExpr> expr;

  static EdgeLength exact(const std::string& text) {
    EdgeLength l;
    l.expr = LengthExpr::parse(text);
    l.value = l.expr->value();
    return l;
  }
  static EdgeLength numeric(double v) { return EdgeLength{v, std::nullopt}; }

  bool operator==(const EdgeLength& o) const {
    return std::memcmp(&value, &o.value, sizeof(double)) == 0 && expr == o.expr;
  }
};

struct Vertex {
  std::string id;
  Condition condition = Condition::NeumannKirchhoff;
  bool operator==(const Vertex&) const = default;
};

/// Edge from `from` (x = 0) to `to` (x = L). A loop has from == to.
struct Edge {
  std::string id;
  int from = 0;
  int to = 0;
  EdgeLength length;
  bool is_loop() const { return from == to; }
  bool operator==(const Edge&) const = default;
};

/// One endpoint of an edge; `far` is the x = L end.
struct EdgeEnd {
  int edge = 0;
  bool far = false;
};

class MetricGraph {
 public:
  MetricGraph() = default;

  MetricGraph(std::vector<Vertex> vertices, std::vector<Edge> edges, bool disjoint_family = false)
      : vertices_(std::move(vertices)), edges_(std::move(edges)), disjoint_(disjoint_family) {
    validate();
  }

  const std::vector<Vertex>& vertices() const { return vertices_; }
  const std::vector<Edge>& edges() const { return edges_; }
  const Vertex& vertex(int v) const { return vertices_[v]; }
  const Edge& edge(int e) const { return edges_[e]; }
  int vertex_count() const { return static_cast<int>(vertices_.size()); }
  int edge_count() const { return static_cast<int>(edges_.size()); }
  double length(int e) const { return edges_[e].length.value; }
  bool disjoint_family() const { return disjoint_; }

  /// Incident edge ends N(v); a loop appears twice.
  const std::vector<EdgeEnd>& incident(int v) const { return adjacency_[v]; }
  int degree(int v) const { return static_cast<int>(adjacency_[v].size()); }
  bool is_external(int v) const { return degree(v) == 1; }

  int vertex_index(const std::string& id) const {
    auto it = index_.find(id);
    if (it == index_.end()) throw InputError("unknown vertex id '" + id + "'");
    return it->second;
  }

  /// Connected-component label per vertex, labels in order of first appearance.
  std::vector<int> vertex_components() const {
    std::vector<int> parent(vertices_.size());
    std::iota(parent.begin(), parent.end(), 0);
    auto find = [&](int x) {
      while (parent[x] != x) x = parent[x] = parent[parent[x]];
      return x;
    };
    for (const auto& e : edges_) parent[find(e.from)] = find(e.to);
    std::vector<int> label(vertices_.size(), -1);
    std::map<int, int> root_label;
    for (int v = 0; v < vertex_count(); ++v) {
      int r = find(v);
      auto it = root_label.find(r);
      if (it == root_label.end()) it = root_label.emplace(r, static_cast<int>(root_label.size())).first;
      label[v] = it->second;
    }
    return label;
  }

  int component_count() const {
    auto c = vertex_components();
    int n = 0;
    for (int x : c) n = std::max(n, x + 1);
    return n;
  }

  bool operator==(const MetricGraph& o) const {
    return vertices_ == o.vertices_ && edges_ == o.edges_ && disjoint_ == o.disjoint_;
  }

 private:
  void validate() {
    if (vertices_.empty() || edges_.empty()) throw InputError("graph needs at least one vertex and one edge");
    index_.clear();
    for (int v = 0; v < vertex_count(); ++v) {
      if (!index_.emplace(vertices_[v].id, v).second)
        throw InputError("duplicate vertex id '" + vertices_[v].id + "'");
    }
    adjacency_.assign(vertices_.size(), {});
    std::map<std::string, int> edge_ids;
    for (int e = 0; e < edge_count(); ++e) {
      const Edge& ed = edges_[e];
      if (!edge_ids.emplace(ed.id, e).second) throw InputError("duplicate edge id '" + ed.id + "'");
      if (ed.from < 0 || ed.from >= vertex_count() || ed.to < 0 || ed.to >= vertex_count())
        throw InputError("edge '" + ed.id + "' has a dangling endpoint");
      if (!(ed.length.value > 0.0) || !std::isfinite(ed.length.value))
        throw InputError("edge '" + ed.id + "' has nonpositive length");
      if (ed.length.expr) {
        double ev = ed.length.expr->value();
        if (std::abs(ev - ed.length.value) > 8.0 * std::numeric_limits<double>::epsilon() * ev)
          throw InputError("edge '" + ed.id + "': float length disagrees with expression '" +
                           ed.length.expr->text() + "'");
      }
      adjacency_[ed.from].push_back({e, false});
      adjacency_[ed.to].push_back({e, true});
    }
    for (int v = 0; v < vertex_count(); ++v) {
      const int n = degree(v);
      const Condition c = vertices_[v].condition;
      if (n == 0) throw InputError("vertex '" + vertices_[v].id + "' has no incident edge");
      if (n == 1 && c == Condition::NeumannKirchhoff)
        throw InputError("NK condition on degree-1 vertex '" + vertices_[v].id + "'");
      if (n >= 2 && c != Condition::NeumannKirchhoff)
        throw InputError("D/N condition on internal vertex '" + vertices_[v].id + "'");
    }
    if (!disjoint_ && component_count() != 1)
      throw InputError("graph is disconnected and not flagged as a disjoint-interval family");
  }

  std::vector<Vertex> vertices_;
  std::vector<Edge> edges_;
  bool disjoint_ = false;
  std::vector<std::vector<EdgeEnd>> adjacency_;
  std::map<std::string, int> index_;
};

struct VertexClasses {
  std::vector<int> external;
  std::vector<int> internal;
};

inline VertexClasses classify_vertices(const MetricGraph& g) {
  VertexClasses out;
  for (int v = 0; v < g.vertex_count(); ++v) (g.is_external(v) ? out.external : out.internal).push_back(v);
  return out;
}

inline double total_length(const MetricGraph& g) {
  double s = 0.0;
  for (const auto& e : g.edges()) s += e.length.value;
  return s;
}

/// What the symbolic length declarations say about the AL(N) class.
struct LengthArithmetic {
  bool declared = false;             // every edge carries an expression
  bool ratios_irrational = false;    // all L_k / L_j irrational (algebraic by construction)
  bool independent_with_one = false; // {1, L_1, ..., L_N} linearly independent over Q
  std::vector<std::pair<int, int>> rational_pairs;
};

/// r*sqrt(q) for square-free q: ratios are rational iff the classes agree, and
/// distinct square roots of square-free integers are Q-independent.
inline LengthArithmetic declared_arithmetic(const MetricGraph& g) {
  LengthArithmetic out;
  out.declared = true;
  for (const auto& e : g.edges()) out.declared = out.declared && e.length.expr.has_value();
  if (!out.declared) return out;
  std::vector<std::int64_t> cls;
  for (const auto& e : g.edges()) cls.push_back(e.length.expr->squarefree_class());
  for (std::size_t a = 0; a < cls.size(); ++a)
    for (std::size_t b = a + 1; b < cls.size(); ++b)
      if (cls[a] == cls[b]) out.rational_pairs.emplace_back(static_cast<int>(a), static_cast<int>(b));
  out.ratios_irrational = out.rational_pairs.empty();
  bool has_rational = false;
  for (auto c : cls) has_rational = has_rational || c == 1;
  out.independent_with_one = out.ratios_irrational && !has_rational;
  return out;
}

// Builders for the standard families. Vertices are named so documents stay readable.

inline MetricGraph make_interval(EdgeLength L, Condition left, Condition right) {
  return MetricGraph({{"v0", left}, {"v1", right}}, {{"e1", 0, 1, std::move(L)}});
}

/// Star with leaf i at x = 0 of edge i and the center at x = L_i.
inline MetricGraph make_star(const std::vector<EdgeLength>& lengths, Condition leaf = Condition::Dirichlet) {
  std::vector<Vertex> vs;
  std::vector<Edge> es;
  const int n = static_cast<int>(lengths.size());
  vs.push_back({"c", n >= 2 ? Condition::NeumannKirchhoff : leaf});
  for (int i = 0; i < n; ++i) {
    vs.push_back({"v" + std::to_string(i + 1), leaf});
    es.push_back({"e" + std::to_string(i + 1), i + 1, 0, lengths[i]});
  }
  return MetricGraph(std::move(vs), std::move(es));
}

/// Loop e1 at v, tail e2 from the external vertex (x = 0) to v (x = L2).
inline MetricGraph make_tadpole(EdgeLength L1, EdgeLength L2, Condition tail_end = Condition::Dirichlet) {
  return MetricGraph({{"v", Condition::NeumannKirchhoff}, {"w", tail_end}},
                     {{"e1", 0, 0, std::move(L1)}, {"e2", 1, 0, std::move(L2)}});
}

inline MetricGraph make_disjoint_intervals(const std::vector<EdgeLength>& lengths, Condition left,
                                           Condition right) {
  std::vector<Vertex> vs;
  std::vector<Edge> es;
  for (std::size_t i = 0; i < lengths.size(); ++i) {
    const int a = static_cast<int>(vs.size());
    vs.push_back({"a" + std::to_string(i + 1), left});
    vs.push_back({"b" + std::to_string(i + 1), right});
    es.push_back({"e" + std::to_string(i + 1), a, a + 1, lengths[i]});
  }
  return MetricGraph(std::move(vs), std::move(es), true);
}

}  // namespace qg
