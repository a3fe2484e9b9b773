#include "txlab/io.hpp"

#include <fstream>
#include <sstream>

namespace txlab::io {
namespace {

std::string type_name(const json& j) { return j.type_name(); }

const json& field(const json& obj, const char* key, const std::string& path) {
  if (!obj.is_object()) throw InputError(path, "expected object, got " + type_name(obj));
  auto it = obj.find(key);
  if (it == obj.end()) throw InputError(path.empty() ? key : path + "." + key, "missing field");
  return *it;
}

std::string join(const std::string& path, const char* key) { return path.empty() ? key : path + "." + key; }

double number(const json& obj, const char* key, const std::string& path) {
  const json& v = field(obj, key, path);
  if (!v.is_number()) throw InputError(join(path, key), "expected number, got " + type_name(v));
  return v.get<double>();
}

int integer(const json& obj, const char* key, const std::string& path) {
  const json& v = field(obj, key, path);
  if (!v.is_number_integer()) throw InputError(join(path, key), "expected integer, got " + type_name(v));
  const auto x = v.get<long long>();
  if (x < -1 || x > 100'000'000) throw InputError(join(path, key), "integer out of range");
  return static_cast<int>(x);
}

std::pair<int, int> line_column(std::string_view text, std::size_t byte) {
  int line = 1, col = 1;
  for (std::size_t i = 0; i + 1 < byte && i < text.size(); ++i) {
    if (text[i] == '\n') {
      ++line;
      col = 1;
    } else {
      ++col;
    }
  }
  return {line, col};
}

}  // namespace

json parse(std::string_view text, const std::string& source) {
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    auto [line, col] = line_column(text, e.byte);
    std::string msg = e.what();
    // strip the library prefix "[json.exception.parse_error.101] "
    if (auto p = msg.find("] "); p != std::string::npos) msg = msg.substr(p + 2);
    if (auto p = msg.find(": "); msg.rfind("parse error", 0) == 0 && p != std::string::npos) msg = msg.substr(p + 2);
    throw InputError(source + ":" + std::to_string(line) + ":" + std::to_string(col), msg);
  }
}

std::string read_text(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError(path.string(), "cannot open file");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

json read_json(const std::filesystem::path& path) { return parse(read_text(path), path.string()); }

ScenarioTree tree_from_json(const json& j) {
  const int horizon = integer(j, "horizon", "");
  const json& arr = field(j, "nodes", "");
  if (!arr.is_array()) throw InputError("nodes", "expected array, got " + type_name(arr));
  if (arr.empty()) throw InputError("nodes", "empty node list");
  const int n = static_cast<int>(arr.size());
  std::vector<TreeNode> nodes(n);
  std::vector<char> seen(n, 0);
  for (int i = 0; i < n; ++i) {
    const std::string path = "nodes[" + std::to_string(i) + "]";
    const json& e = arr[i];
    TreeNode node;
    node.id = integer(e, "id", path);
    if (node.id < 0 || node.id >= n) throw InputError(path + ".id", "id outside 0.." + std::to_string(n - 1));
    if (seen[node.id]) throw InputError(path + ".id", "duplicate id " + std::to_string(node.id));
    seen[node.id] = 1;
    const json& par = field(e, "parent", path);
    if (par.is_null()) {
      node.parent = -1;
    } else {
      node.parent = integer(e, "parent", path);
      if (node.parent < 0 || node.parent >= n) throw InputError(path + ".parent", "unknown parent id");
    }
    node.t = integer(e, "t", path);
    node.p = number(e, "p", path);
    nodes[node.id] = node;
  }
  return ScenarioTree(std::move(nodes), horizon);
}

json to_json(const ScenarioTree& tree) {
  json nodes = json::array();
  for (const auto& n : tree.nodes()) {
    json e = {{"id", n.id}, {"parent", nullptr}, {"t", n.t}, {"p", n.p}};
    if (n.parent >= 0) e["parent"] = n.parent;
    nodes.push_back(std::move(e));
  }
  return {{"horizon", tree.horizon()}, {"nodes", std::move(nodes)}};
}

Market market_from_json(const json& j) {
  ScenarioTree tree = tree_from_json(j);
  const double lambda = number(j, "lambda", "");
  const json& s = field(j, "S", "");
  if (!s.is_array()) throw InputError("S", "expected array, got " + type_name(s));
  if (static_cast<int>(s.size()) != tree.size()) {
    throw InputError("S", "expected " + std::to_string(tree.size()) + " prices, got " + std::to_string(s.size()));
  }
  Process price(tree.size());
  for (int i = 0; i < tree.size(); ++i) {
    if (!s[i].is_number()) {
      throw InputError("S[" + std::to_string(i) + "]", "expected number, got " + type_name(s[i]));
    }
    price[i] = s[i].get<double>();
  }
  return Market(std::move(tree), std::move(price), lambda);
}

json to_json(const Market& market) {
  json j = to_json(market.tree());
  j["lambda"] = market.lambda();
  j["S"] = to_json(market.price());
  return j;
}

Market read_market(const std::filesystem::path& path) {
  const json j = read_json(path);
  try {
    return market_from_json(j);
  } catch (const InputError& e) {
    throw InputError(path.string() + ": " + e.where(), std::string(e.what()).substr(e.where().size() + 2));
  }
}

ScenarioTree read_tree(const std::filesystem::path& path) {
  const json j = read_json(path);
  try {
    return tree_from_json(j);
  } catch (const InputError& e) {
    throw InputError(path.string() + ": " + e.where(), std::string(e.what()).substr(e.where().size() + 2));
  }
}

void write_text(const std::filesystem::path& path, std::string_view text) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path.string());
  out << text;
}

void write_json(const std::filesystem::path& path, const json& j) { write_text(path, j.dump(2) + "\n"); }

json to_json(const Check& c) {
  return {{"name", c.name}, {"residual", c.residual}, {"tolerance", c.tolerance}, {"pass", c.pass}};
}

json to_json(const std::vector<Check>& checks) {
  json a = json::array();
  for (const auto& c : checks) a.push_back(to_json(c));
  return a;
}

json to_json(const Eigen::VectorXd& v) {
  json a = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(v[i]);
  return a;
}

}  // namespace txlab::io
