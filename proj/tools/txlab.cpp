// txlab command-line front end.
//
// Exit codes: 0 all checks pass, 1 a check failed (or the market admits
// arbitrage), 2 usage or input error, 3 solver non-convergence.
//
// Option precedence, highest first: command line, --config file (TOML),
// TXLAB_* environment variables, built-in defaults.

#include <chrono>
#include <cstdint>
#include <deque>
#include <filesystem>
#include <functional>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "report.hpp"
#include "txlab/cps.hpp"
#include "txlab/generate.hpp"

namespace fs = std::filesystem;
using txlab::io::json;

namespace {

constexpr const char* kVersion = "1.0.0";

enum Exit { ok = 0, check_failed = 1, input_error = 2, solver_failure = 3 };

struct Common {
  std::string market;
  std::string utility = "log";
  double x = 1.0;
  std::optional<double> y;
  double tol = 1e-8;
  int max_iter = 2000;
  double barrier_decay = 0.2;
  double start_eps = 1e-6;
  std::uint64_t seed = 1;
  std::string out = ".";
  int parallel = 1;

  txlab::SolverOptions solver() const {
    txlab::SolverOptions o;
    o.tol = tol;
    o.max_iter = max_iter;
    o.barrier_decay = barrier_decay;
    o.start_eps = start_eps;
    return o;
  }

  json config() const {
    json j = {{"market", market},       {"utility", utility},         {"x", x},
              {"y", nullptr},           {"tol", tol},                 {"max_iter", max_iter},
              {"barrier_decay", barrier_decay}, {"start_eps", start_eps}, {"seed", seed},
              {"out", out},             {"parallel", parallel}};
    if (y) j["y"] = *y;
    return j;
  }
};

void add_common(CLI::App* app, Common& c, bool with_market = true) {
  if (with_market) {
    app->add_option("--market", c.market, "market JSON file")->envname("TXLAB_MARKET")->required();
  }
  app->add_option("--utility", c.utility, "log | crra:<gamma>")->envname("TXLAB_UTILITY")->capture_default_str();
  app->add_option("--x", c.x, "initial wealth")->envname("TXLAB_X")->capture_default_str();
  app->add_option("--y", c.y, "dual argument (default u'(x))")->envname("TXLAB_Y");
  app->add_option("--tol", c.tol, "solver KKT tolerance")->envname("TXLAB_TOL")->capture_default_str();
  app->add_option("--max-iter", c.max_iter, "solver Newton iteration cap")->capture_default_str();
  app->add_option("--barrier-decay", c.barrier_decay, "barrier reduction factor")->capture_default_str();
  app->add_option("--start-eps", c.start_eps, "initial symmetric trade")->capture_default_str();
  app->add_option("--seed", c.seed, "random seed")->envname("TXLAB_SEED")->capture_default_str();
  app->add_option("--out", c.out, "output directory")->envname("TXLAB_OUT")->capture_default_str();
  app->add_option("--parallel", c.parallel, "worker threads")
      ->envname("TXLAB_PARALLEL")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
}

/// Everything a command needs to build and write its report.
struct Run {
  std::string command;
  std::string stem;  ///< report file name without extension
  fs::path out;
  json report;
  std::optional<txlab::Market> market;

  Run(std::string cmd, std::string file_stem, const std::string& dir, json config)
      : command(std::move(cmd)), stem(std::move(file_stem)), out(dir) {
    report = {{"command", command}, {"version", kVersion}, {"config", std::move(config)},
              {"pass", false},      {"exit_code", 0},      {"checks", json::array()},
              {"results", json::object()}, {"warnings", json::array()}};
  }

  fs::path file(const std::string& name) const { return out / name; }

  int finish(const std::vector<txlab::Check>& checks, int code = ok) {
    report["checks"] = txlab::io::to_json(checks);
    const bool pass = txlab::all_pass(checks) && code == ok;
    if (code == ok && !pass) code = check_failed;
    return write(code, pass);
  }

  int fail(int code, const std::string& kind, const std::string& message) {
    report["error"] = {{"kind", kind}, {"message", message}};
    std::cerr << command << ": " << kind << ": " << message << "\n";
    return write(code, false);
  }

  int write(int code, bool pass) {
    report["pass"] = pass;
    report["exit_code"] = code;
    const fs::path path = file(stem + ".json");
    txlab::io::write_json(path, report);
    std::cerr << command << ": " << (pass ? "pass" : "FAIL") << " -> " << path.string() << "\n";
    return code;
  }
};

void require_feasible(const txlab::Market& market) { (void)txlab::strictly_consistent_prices(market); }

double default_y(const Common& c, const txlab::Market& market, const txlab::UtilitySpec& u) {
  if (c.y) return *c.y;
  return txlab::solve_primal(market, u, c.x, c.solver()).marginal;
}

/// Maps library exceptions onto exit codes; writes a report for codes 1 and 3.
int guarded(Run& run, const std::function<int(Run&)>& body) {
  try {
    return body(run);
  } catch (const txlab::InfeasibilityError& e) {
    json cert = {{"node", e.node()}, {"attainable_lo", e.attainable_lo()}, {"attainable_hi", e.attainable_hi()}};
    if (run.market && e.node() >= 0 && e.node() < run.market->tree().size()) {
      cert["t"] = run.market->tree().time(e.node());
      cert["bid"] = run.market->bid(e.node());
      cert["ask"] = run.market->ask(e.node());
    }
    run.report["certificate"] = cert;
    run.report["checks"] = txlab::io::to_json(std::vector<txlab::Check>{txlab::make_check("cps_exists", 1.0, 0.0)});
    return run.fail(check_failed, "infeasible", e.what());
  } catch (const txlab::SolverError& e) {
    run.report["results"]["best_objective"] = e.best_objective();
    run.report["results"]["iterations"] = e.iterations();
    return run.fail(solver_failure, "solver", e.what());
  } catch (const txlab::TiltTooLargeError& e) {
    std::cerr << run.command << ": error: " << e.what() << "\n";
    return input_error;
  } catch (const txlab::NumericError& e) {
    return run.fail(solver_failure, "numeric", e.what());
  } catch (const txlab::ExtractionError& e) {
    return run.fail(check_failed, "extraction", e.what());
  } catch (const txlab::ConstructionError& e) {
    return run.fail(check_failed, "construction", e.what());
  } catch (const txlab::Error& e) {
    // input, structural, domain, precondition and configuration errors
    std::cerr << run.command << ": error: " << e.what() << "\n";
    return input_error;
  }
}

txlab::Market load_market(Run& run, const Common& c) {
  run.market = txlab::io::read_market(c.market);
  return *run.market;
}

int cmd_gen_tree(const Common& c, const txlab::GeneratorConfig& base, const std::string& kind,
                 const std::string& name) {
  json config = {{"kind", kind},       {"depth", base.depth},   {"branching", base.branching},
                 {"vol", base.vol},    {"lambda", base.lambda}, {"s0", base.s0},
                 {"seed", c.seed},     {"out", c.out},          {"name", name}};
  Run run("gen-tree", "gen-tree", c.out, config);
  return guarded(run, [&](Run& r) {
    txlab::GeneratorConfig g = base;
    g.kind = txlab::parse_tree_kind(kind);
    g.seed = c.seed;
    const txlab::Market market = txlab::generate_market(g);
    r.market = market;
    txlab::io::write_json(r.file(name), txlab::io::to_json(market));
    r.report["results"] = {{"file", r.file(name).string()},
                           {"nodes", market.tree().size()},
                           {"leaves", market.tree().leaves().size()},
                           {"horizon", market.tree().horizon()}};
    require_feasible(market);
    return r.finish({txlab::make_check("cps_exists", 0.0, 0.0)});
  });
}

int cmd_solve_primal(const Common& c) {
  Run run("solve-primal", "solve-primal", c.out, c.config());
  return guarded(run, [&](Run& r) {
    const auto market = load_market(r, c);
    const auto u = txlab::UtilitySpec::parse(c.utility);
    require_feasible(market);
    const auto s = txlab::solve_primal(market, u, c.x, c.solver());
    const auto adm = txlab::is_admissible(market, s.strategy, c.x, 1e-9 * c.x);
    r.report["results"] = txcli::to_json(s);
    r.report["results"]["admissibility"] = txcli::to_json(adm);
    txlab::io::write_text(r.file("primal_nodes.csv"), txcli::primal_csv(market, s));
    return r.finish({txlab::make_check("admissible", std::max(0.0, -adm.worst_value) / c.x, 1e-9),
                     txlab::make_check("kkt_residual", s.diagnostics.kkt_residual, c.tol)});
  });
}

int cmd_solve_dual(const Common& c) {
  Run run("solve-dual", "solve-dual", c.out, c.config());
  return guarded(run, [&](Run& r) {
    const auto market = load_market(r, c);
    const auto u = txlab::UtilitySpec::parse(c.utility);
    require_feasible(market);
    const double y = c.y.value_or(1.0);
    r.report["config"]["y"] = y;
    const auto s = txlab::solve_dual(market, u, y, c.solver());
    const auto cps = txlab::is_cps(market, s.price_system, 1e-10);
    r.report["results"] = txcli::to_json(s);
    r.report["results"]["cps"] = txcli::to_json(cps);
    txlab::io::write_text(r.file("dual_nodes.csv"), txcli::dual_csv(market, s));
    return r.finish({txlab::make_check("martingale", cps.martingale_residual, 1e-10),
                     txlab::make_check("spread", cps.spread_violation, 1e-10),
                     txlab::make_check("root", cps.root_violation, 1e-12),
                     txlab::make_check("kkt_residual", s.diagnostics.kkt_residual, c.tol)});
  });
}

int cmd_verify_duality(const Common& c, const txlab::DualityTolerances& tol) {
  json config = c.config();
  config["gap_tol"] = tol.gap;
  config["first_order_tol"] = tol.first_order;
  config["complementarity_tol"] = tol.complementarity;
  config["product_martingale_tol"] = tol.product_martingale;
  config["grid_levels"] = tol.grid_levels;
  Run run("verify-duality", "verify-duality", c.out, config);
  return guarded(run, [&](Run& r) {
    const auto market = load_market(r, c);
    const auto u = txlab::UtilitySpec::parse(c.utility);
    require_feasible(market);
    const auto rep = txlab::verify_duality(market, u, c.x, c.solver(), tol);
    r.report["results"] = txcli::to_json(rep);
    txlab::io::write_text(r.file("duality_leaves.csv"), txcli::duality_csv(market, u, rep));
    return r.finish(rep.checks);
  });
}

int cmd_shadow(const Common& c, double value_tol, double wealth_tol) {
  json config = c.config();
  config["value_tol"] = value_tol;
  config["wealth_tol"] = wealth_tol;
  Run run("shadow", "shadow", c.out, config);
  return guarded(run, [&](Run& r) {
    const auto market = load_market(r, c);
    const auto u = txlab::UtilitySpec::parse(c.utility);
    require_feasible(market);
    const auto primal = txlab::solve_primal(market, u, c.x, c.solver());
    const double y = c.y.value_or(primal.marginal);
    r.report["config"]["y"] = y;
    const auto dual = txlab::solve_dual(market, u, y, c.solver());
    const auto sp = txlab::extract_shadow(market, dual);
    const auto rep = txlab::verify_shadow(market, u, c.x, sp, primal, value_tol, wealth_tol, c.solver());
    r.report["results"] = txcli::to_json(rep);
    r.report["results"]["shadow_price"] = txlab::io::to_json(sp.ratio);
    txlab::io::write_text(r.file("shadow_nodes.csv"), txcli::shadow_csv(market, sp));
    return r.finish(rep.checks);
  });
}

struct ScheduleArgs {
  double a = 0.2, b = 0.2, kappa = 0.5, rate = 0.5;
  std::vector<double> theta{0.3};
  int N = 10;

  json config() const { return {{"a", a}, {"b", b}, {"kappa", kappa}, {"rate", rate}, {"theta", theta}, {"N", N}}; }

  txlab::PerturbationSchedule build(const txlab::Market& market, const txlab::UtilitySpec& u, double x,
                                    double y) const {
    txlab::PerturbationSchedule s;
    s.x = x;
    s.y = y;
    s.base = u;
    s.a = a;
    s.b = b;
    s.kappa = kappa;
    s.rate = rate;
    s.N = N;
    const auto k = static_cast<Eigen::Index>(market.tree().interior().size());
    if (theta.size() == 1) {
      s.theta = Eigen::VectorXd::Constant(k, theta[0]);
    } else {
      s.theta = Eigen::Map<const Eigen::VectorXd>(theta.data(), static_cast<Eigen::Index>(theta.size()));
    }
    s.validate(market.tree());
    return s;
  }
};

void add_schedule(CLI::App* app, ScheduleArgs& s) {
  app->add_option("--a", s.a, "wealth perturbation amplitude")->capture_default_str();
  app->add_option("--b", s.b, "dual argument perturbation amplitude")->capture_default_str();
  app->add_option("--kappa", s.kappa, "risk aversion perturbation amplitude")->capture_default_str();
  app->add_option("--rate", s.rate, "geometric decay per step")->capture_default_str();
  app->add_option("--theta", s.theta, "tilt, one value or one per interior node")
      ->delimiter(',')
      ->capture_default_str();
  app->add_option("--N", s.N, "schedule length")->capture_default_str();
}

int cmd_stability_static(const Common& c, const ScheduleArgs& sa) {
  json config = c.config();
  config["schedule"] = sa.config();
  Run run("stability static", "stability-static", c.out, config);
  return guarded(run, [&](Run& r) {
    const auto market = load_market(r, c);
    const auto u = txlab::UtilitySpec::parse(c.utility);
    require_feasible(market);
    const double y = default_y(c, market, u);
    r.report["config"]["y"] = y;
    const auto schedule = sa.build(market, u, c.x, y);
    const auto rep = txlab::run_static(market, schedule, {c.solver(), c.parallel});
    r.report["results"] = txcli::to_json(rep);
    txlab::io::write_text(r.file("stability.csv"), txlab::stability_csv(rep));
    if (sa.N < 10) r.report["warnings"].push_back("decay checks need N >= 10 and were skipped");
    return r.finish(rep.checks);
  });
}

int cmd_stability_dynamic(const Common& c, const ScheduleArgs& sa, const txlab::DynamicOptions& base,
                          double shadow_tol) {
  json config = c.config();
  config["schedule"] = sa.config();
  config["deflator_tol"] = base.deflator_tol;
  config["value_tol"] = base.value_tol;
  config["terminal_ratio"] = base.terminal_ratio;
  config["shadow_tol"] = shadow_tol;
  Run run("stability dynamic", "stability-dynamic", c.out, config);
  return guarded(run, [&](Run& r) {
    const auto market = load_market(r, c);
    const auto u = txlab::UtilitySpec::parse(c.utility);
    require_feasible(market);
    const double y = default_y(c, market, u);
    r.report["config"]["y"] = y;
    const auto schedule = sa.build(market, u, c.x, y);
    txlab::DynamicOptions opts = base;
    opts.solver = c.solver();
    opts.threads = c.parallel;
    const auto dyn = txlab::run_dynamic(market, schedule, opts);
    const auto sh = txlab::shadow_stability(market, schedule, opts, shadow_tol);
    r.report["results"] = txcli::to_json(dyn);
    r.report["results"]["shadow"] = txcli::to_json(sh);
    txlab::io::write_text(r.file("dynamic.csv"), txcli::dynamic_csv(dyn));
    std::vector<txlab::Check> checks = dyn.checks;
    for (auto ch : sh.checks) {
      ch.name = "shadow_" + ch.name;
      checks.push_back(std::move(ch));
    }
    return r.finish(checks);
  });
}

int cmd_counterexample(const Common& c, txlab::CxConfig cfg) {
  cfg.seed = c.seed;
  cfg.threads = c.parallel;
  json config = {{"lambda", cfg.lambda},         {"delta", cfg.delta},
                 {"m", cfg.m},                   {"depth", cfg.depth},
                 {"eps_low", cfg.eps_low},       {"paths", cfg.paths},
                 {"seed", cfg.seed},             {"x", c.x},
                 {"out", c.out},                 {"parallel", c.parallel},
                 {"dump_paths", cfg.dump_paths}, {"dump_stride", cfg.dump_stride},
                 {"dump_max_rows", cfg.dump_max_rows}};
  Run run("counterexample", "counterexample", c.out, config);
  return guarded(run, [&](Run& r) {
    if (!(c.x > 0.0)) throw txlab::ConfigError("x must be positive");
    const auto ens = txlab::simulate_hat(cfg);
    const auto rep = txlab::verify_nonuniqueness(ens, c.x);
    r.report["results"] = txcli::to_json(rep);
    r.report["results"]["lattice"] = {{"h", ens.lattice.h},         {"h_d", ens.lattice.h_d},
                                      {"m", ens.lattice.m},         {"m_d", ens.lattice.m_d},
                                      {"lower", ens.lattice.lower}, {"m_hat", ens.lattice.m_hat}};
    for (const auto& w : rep.warnings) r.report["warnings"].push_back(w);
    txlab::io::write_text(r.file("counterexample.csv"), txlab::counterexample_csv(rep));
    if (cfg.dump_paths > 0) txlab::io::write_text(r.file("paths.csv"), txlab::path_dump_csv(ens));
    return r.finish(rep.checks);
  });
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Utility maximisation under proportional transaction costs on scenario trees"};
  app.set_version_flag("--version", kVersion);
  app.set_config("--config", "", "TOML file with option values (sections per subcommand)")->envname("TXLAB_CONFIG");
  app.require_subcommand(1);

  std::deque<Common> commons;
  std::function<int()> action;

  {
    auto* sub = app.add_subcommand("gen-tree", "generate a random market file");
    auto& c = commons.emplace_back();
    static txlab::GeneratorConfig g;
    static std::string kind = "binomial", name = "market.json";
    sub->add_option("--kind", kind, "binomial | trinomial | random")
        ->check(CLI::IsMember({"binomial", "trinomial", "random"}))
        ->capture_default_str();
    sub->add_option("--depth", g.depth, "number of periods")->capture_default_str();
    sub->add_option("--branching", g.branching, "maximum children per node (random)")->capture_default_str();
    sub->add_option("--vol", g.vol, "one-step log-return scale")->capture_default_str();
    sub->add_option("--lambda", g.lambda, "proportional transaction cost")->capture_default_str();
    sub->add_option("--s0", g.s0, "initial price")->capture_default_str();
    sub->add_option("--name", name, "market file name inside --out")->capture_default_str();
    sub->add_option("--seed", c.seed, "random seed")->envname("TXLAB_SEED")->capture_default_str();
    sub->add_option("--out", c.out, "output directory")->envname("TXLAB_OUT")->capture_default_str();
    sub->callback([&] { action = [&] { return cmd_gen_tree(c, g, kind, name); }; });
  }
  {
    auto* sub = app.add_subcommand("solve-primal", "maximise expected utility of terminal liquidation value");
    auto& c = commons.emplace_back();
    add_common(sub, c);
    sub->callback([&] { action = [&] { return cmd_solve_primal(c); }; });
  }
  {
    auto* sub = app.add_subcommand("solve-dual", "minimise the dual objective over consistent price systems");
    auto& c = commons.emplace_back();
    add_common(sub, c);
    sub->callback([&] { action = [&] { return cmd_solve_dual(c); }; });
  }
  {
    auto* sub = app.add_subcommand("verify-duality", "solve both problems and check the duality relations");
    auto& c = commons.emplace_back();
    static txlab::DualityTolerances tol;
    add_common(sub, c);
    sub->add_option("--gap-tol", tol.gap)->capture_default_str();
    sub->add_option("--first-order-tol", tol.first_order)->capture_default_str();
    sub->add_option("--complementarity-tol", tol.complementarity)->capture_default_str();
    sub->add_option("--product-martingale-tol", tol.product_martingale)->capture_default_str();
    sub->add_option("--grid-levels", tol.grid_levels)->capture_default_str();
    sub->callback([&] { action = [&] { return cmd_verify_duality(c, tol); }; });
  }
  {
    auto* sub = app.add_subcommand("shadow", "extract and verify a shadow price");
    auto& c = commons.emplace_back();
    static double value_tol = 1e-5, wealth_tol = 1e-4;
    add_common(sub, c);
    sub->add_option("--value-tol", value_tol)->capture_default_str();
    sub->add_option("--wealth-tol", wealth_tol)->capture_default_str();
    sub->callback([&] { action = [&] { return cmd_shadow(c, value_tol, wealth_tol); }; });
  }
  {
    auto* stab = app.add_subcommand("stability", "stability under perturbation of (x, y, U, P)");
    stab->require_subcommand(1);
    auto* st = stab->add_subcommand("static", "solve every perturbed problem and fit decay rates");
    auto& cs = commons.emplace_back();
    static ScheduleArgs ss;
    add_common(st, cs);
    add_schedule(st, ss);
    st->callback([&] { action = [&] { return cmd_stability_static(cs, ss); }; });

    auto* dy = stab->add_subcommand("dynamic", "Cesaro limit of dual optimisers under the perturbed measures");
    auto& cd = commons.emplace_back();
    static ScheduleArgs sd;
    static txlab::DynamicOptions dopts;
    static double shadow_tol = 1e-4;
    sd.N = 100'000;
    add_common(dy, cd);
    add_schedule(dy, sd);
    dy->add_option("--deflator-tol", dopts.deflator_tol)->capture_default_str();
    dy->add_option("--value-tol", dopts.value_tol)->capture_default_str();
    dy->add_option("--terminal-ratio", dopts.terminal_ratio)->capture_default_str();
    dy->add_option("--shadow-tol", shadow_tol)->capture_default_str();
    dy->callback([&] { action = [&] { return cmd_stability_dynamic(cd, sd, dopts, shadow_tol); }; });
  }
  {
    auto* sub = app.add_subcommand("counterexample", "Monte Carlo market with two dual optimisers");
    auto& c = commons.emplace_back();
    static txlab::CxConfig cfg;
    sub->add_option("--lambda", cfg.lambda)->capture_default_str();
    sub->add_option("--delta", cfg.delta)->capture_default_str();
    sub->add_option("--m", cfg.m, "lattice steps to the upper barrier")->capture_default_str();
    sub->add_option("--depth", cfg.depth, "step cap per path")->capture_default_str();
    sub->add_option("--eps-low", cfg.eps_low)->capture_default_str();
    sub->add_option("--paths", cfg.paths)->capture_default_str();
    sub->add_option("--dump-paths", cfg.dump_paths, "paths written to paths.csv")->capture_default_str();
    sub->add_option("--dump-stride", cfg.dump_stride)->capture_default_str();
    sub->add_option("--dump-max-rows", cfg.dump_max_rows)->capture_default_str();
    sub->add_option("--x", c.x, "initial wealth")->envname("TXLAB_X")->capture_default_str();
    sub->add_option("--seed", c.seed, "random seed")->envname("TXLAB_SEED")->capture_default_str();
    sub->add_option("--out", c.out, "output directory")->envname("TXLAB_OUT")->capture_default_str();
    sub->add_option("--parallel", c.parallel, "worker threads")
        ->envname("TXLAB_PARALLEL")
        ->check(CLI::PositiveNumber)
        ->capture_default_str();
    sub->callback([&] { action = [&] { return cmd_counterexample(c, cfg); }; });
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? ok : input_error;
  }
  try {
    const auto start = std::chrono::steady_clock::now();
    const int code = action();
    const std::chrono::duration<double> dt = std::chrono::steady_clock::now() - start;
    std::cerr << "elapsed " << dt.count() << " s\n";
    return code;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return input_error;
  }
}
