#include "sspn/model_io.hpp"

#include <charconv>
#include <cstdio>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>

#include "sspn/error.hpp"

namespace sspn {

std::string format_real(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

void write_model(const Spn& spn, std::ostream& out) {
  out << "spn-model v1\n";
  out << "root " << spn.root() << "\n";
  out << "classes " << spn.num_classes() << "\n";
  out << "features " << spn.num_features() << "\n";
  out << "classvar " << spn.class_var() << "\n";
  for (NodeId id = 0; id < spn.size(); ++id) {
    out << "node " << id << ' ';
    const Node& node = spn.node(id);
    if (const auto* s = std::get_if<SumNode>(&node)) {
      out << "SUM ";
      for (std::size_t j = 0; j < s->children.size(); ++j) {
        if (j) out << ',';
        out << s->children[j] << ':' << format_real(j < s->weights.size() ? s->weights[j] : 0.0);
      }
    } else if (const auto* p = std::get_if<ProductNode>(&node)) {
      out << "PROD ";
      for (std::size_t j = 0; j < p->children.size(); ++j) {
        if (j) out << ',';
        out << p->children[j];
      }
    } else if (const auto* g = std::get_if<GaussianLeaf>(&node)) {
      out << "GAUSS " << g->var << ' ' << format_real(g->mean) << ' ' << format_real(g->variance);
    } else {
      const auto& ind = std::get<IndicatorLeaf>(node);
      out << "IND " << ind.var << ' ' << ind.state + 1;
    }
    out << '\n';
  }
}

std::string write_model(const Spn& spn) {
  std::ostringstream os;
  write_model(spn, os);
  return os.str();
}

void save_model(const Spn& spn, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::IoError, "cannot write " + path);
  write_model(spn, out);
}

namespace {

class LineParser {
 public:
  explicit LineParser(std::size_t line) : line_(line) {}

  [[noreturn]] void fail(const std::string& what) const {
    throw Error(ErrorCode::ParseError, "line " + std::to_string(line_) + ": " + what);
  }

  template <typename T>
  T number(std::string_view token) const {
    T value{};
    if constexpr (std::is_floating_point_v<T>) {
      // strtod accepts everything %.17g writes, including inf/nan spellings.
      std::string s(token);
      char* end = nullptr;
      value = std::strtod(s.c_str(), &end);
      if (s.empty() || end != s.c_str() + s.size()) fail("bad number '" + s + "'");
    } else {
      auto [ptr, ec] = std::from_chars(token.data(), token.data() + token.size(), value);
      if (ec != std::errc() || ptr != token.data() + token.size()) fail("bad integer '" + std::string(token) + "'");
    }
    return value;
  }

 private:
  std::size_t line_;
};

std::vector<std::string_view> split(std::string_view s, char sep) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (start <= s.size()) {
    std::size_t pos = s.find(sep, start);
    if (pos == std::string_view::npos) pos = s.size();
    out.push_back(s.substr(start, pos - start));
    start = pos + 1;
  }
  return out;
}

}  // namespace

Spn read_model(std::istream& in) {
  std::string line;
  std::size_t line_no = 0;
  bool seen_magic = false;
  std::optional<long> root, classes, features, class_var;
  std::map<NodeId, Node> nodes;

  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line.front() == '#') continue;
    LineParser p(line_no);
    std::istringstream ls(line);
    std::string key;
    ls >> key;
    if (!seen_magic) {
      std::string version;
      ls >> version;
      if (key != "spn-model" || version != "v1") p.fail("expected 'spn-model v1' header");
      seen_magic = true;
      continue;
    }
    if (key == "root" || key == "classes" || key == "features" || key == "classvar") {
      std::string v;
      if (!(ls >> v)) p.fail("missing value for " + key);
      long value = p.number<long>(v);
      (key == "root" ? root : key == "classes" ? classes : key == "features" ? features : class_var) = value;
      continue;
    }
    if (key != "node") p.fail("unknown record '" + key + "'");

    std::string id_token, kind, rest;
    if (!(ls >> id_token >> kind)) p.fail("incomplete node record");
    const auto id = p.number<NodeId>(id_token);
    if (nodes.count(id)) p.fail("duplicate node id " + id_token);
    std::getline(ls >> std::ws, rest);

    if (kind == "SUM" || kind == "PROD") {
      if (rest.empty()) p.fail(kind + " node without children");
      SumNode sum;
      ProductNode prod;
      for (std::string_view item : split(rest, ',')) {
        if (kind == "SUM") {
          auto parts = split(item, ':');
          if (parts.size() != 2) p.fail("expected child:weight, got '" + std::string(item) + "'");
          sum.children.push_back(p.number<NodeId>(parts[0]));
          sum.weights.push_back(p.number<double>(parts[1]));
        } else {
          prod.children.push_back(p.number<NodeId>(item));
        }
      }
      if (kind == "SUM")
        nodes.emplace(id, std::move(sum));
      else
        nodes.emplace(id, std::move(prod));
    } else if (kind == "GAUSS") {
      std::istringstream rs(rest);
      std::string var, mean, variance, extra;
      if (!(rs >> var >> mean >> variance) || (rs >> extra)) p.fail("GAUSS expects <var> <mean> <variance>");
      nodes.emplace(id, GaussianLeaf{p.number<int>(var), p.number<double>(mean), p.number<double>(variance)});
    } else if (kind == "IND") {
      std::istringstream rs(rest);
      std::string var, state, extra;
      if (!(rs >> var >> state) || (rs >> extra)) p.fail("IND expects <var> <state>");
      const int s = p.number<int>(state);
      if (s < 1) p.fail("indicator state is 1-based");
      nodes.emplace(id, IndicatorLeaf{p.number<int>(var), s - 1});
    } else {
      p.fail("unknown node kind '" + kind + "'");
    }
  }

  if (!seen_magic) throw Error(ErrorCode::ParseError, "empty model");
  if (!root || !classes || !features || !class_var)
    throw Error(ErrorCode::ParseError, "missing one of root/classes/features/classvar");
  std::vector<Node> dense;
  dense.reserve(nodes.size());
  for (const auto& [id, node] : nodes) {
    if (id != dense.size())
      throw Error(ErrorCode::ParseError, "node ids must be dense from 0; missing id " + std::to_string(dense.size()));
    dense.push_back(node);
  }
  return Spn(std::move(dense), static_cast<NodeId>(*root), static_cast<int>(*features),
             static_cast<int>(*classes), static_cast<int>(*class_var));
}

Spn parse_model(const std::string& text) {
  std::istringstream in(text);
  return read_model(in);
}

Spn load_model(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::IoError, "cannot read " + path);
  return read_model(in);
}

}  // namespace sspn
