#include "txlab/generate.hpp"

#include <cmath>
#include <random>
#include <string>
#include <vector>

#include "txlab/error.hpp"

namespace txlab {

namespace {

// Uniform in [0,1) from the top 53 bits; identical on every standard library.
double unit(std::mt19937_64& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

}  // namespace

TreeKind parse_tree_kind(std::string_view text) {
  if (text == "binomial") return TreeKind::binomial;
  if (text == "trinomial") return TreeKind::trinomial;
  if (text == "random") return TreeKind::random;
  throw ConfigError("unknown tree kind '" + std::string(text) + "'");
}

Market generate_market(const GeneratorConfig& cfg) {
  if (cfg.depth < 1) throw ConfigError("depth must be at least 1");
  if (!(cfg.vol > 0.0) || !std::isfinite(cfg.vol)) throw ConfigError("vol must be positive");
  if (!(cfg.lambda >= 0.0 && cfg.lambda < 1.0)) throw ConfigError("lambda must lie in [0,1)");
  if (!(cfg.s0 > 0.0)) throw ConfigError("initial price must be positive");
  if (cfg.kind == TreeKind::random && cfg.branching < 2) throw ConfigError("branching must be at least 2");

  std::mt19937_64 rng(cfg.seed);
  std::vector<TreeNode> nodes{{0, -1, 0, 1.0}};
  std::vector<double> price{cfg.s0};
  std::vector<int> frontier{0};
  for (int t = 1; t <= cfg.depth; ++t) {
    std::vector<int> next;
    for (int v : frontier) {
      std::vector<double> ret, w;
      switch (cfg.kind) {
        case TreeKind::binomial:
          ret = {cfg.vol, -cfg.vol};
          w = {0.5, 0.5};
          break;
        case TreeKind::trinomial:
          ret = {cfg.vol, 0.0, -cfg.vol};
          w = {0.25, 0.5, 0.25};
          break;
        case TreeKind::random: {
          const int k = 2 + static_cast<int>(unit(rng) * (cfg.branching - 1));
          double total = 0.0;
          for (int i = 0; i < k; ++i) {
            w.push_back(0.2 + unit(rng));
            total += w.back();
            ret.push_back(cfg.vol * (2.0 * unit(rng) - 1.0));
          }
          for (double& x : w) x /= total;
          ret[0] = cfg.vol * (0.2 + 0.8 * unit(rng));
          ret[1] = -cfg.vol * (0.2 + 0.8 * unit(rng));
          break;
        }
      }
      for (std::size_t i = 0; i < ret.size(); ++i) {
        const int id = static_cast<int>(nodes.size());
        nodes.push_back({id, v, t, w[i]});
        price.push_back(price[v] * std::exp(ret[i]));
        next.push_back(id);
      }
    }
    frontier = std::move(next);
  }
  return Market(ScenarioTree(std::move(nodes), cfg.depth),
                Eigen::Map<const Eigen::VectorXd>(price.data(), price.size()), cfg.lambda);
}

}  // namespace txlab
