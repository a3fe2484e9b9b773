#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "txlab/check.hpp"
#include "txlab/error.hpp"
#include "txlab/market.hpp"

namespace txlab::io {

using nlohmann::json;

/// Malformed input file. `where()` is "line:column" for syntax errors or a
/// field path such as "nodes[3].p" for schema errors.
class InputError : public Error {
 public:
  InputError(const std::string& where, const std::string& what) : Error(where + ": " + what), where_(where) {}
  const std::string& where() const noexcept { return where_; }

 private:
  std::string where_;
};

/// Parses text, reporting syntax errors as InputError with line and column.
json parse(std::string_view text, const std::string& source = "<input>");
json read_json(const std::filesystem::path& path);

/// {"horizon": T, "nodes": [{"id", "parent" (null at the root), "t", "p"}]}
ScenarioTree tree_from_json(const json& j);
json to_json(const ScenarioTree& tree);

/// Tree fields plus {"lambda": λ, "S": [price per node]}.
Market market_from_json(const json& j);
json to_json(const Market& market);

Market read_market(const std::filesystem::path& path);
ScenarioTree read_tree(const std::filesystem::path& path);

/// Pretty-printed, newline-terminated; creates parent directories.
void write_json(const std::filesystem::path& path, const json& j);
void write_text(const std::filesystem::path& path, std::string_view text);
std::string read_text(const std::filesystem::path& path);

json to_json(const Check& c);
json to_json(const std::vector<Check>& checks);
json to_json(const Eigen::VectorXd& v);

}  // namespace txlab::io
