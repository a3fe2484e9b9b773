#include "txlab/counterexample.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <random>
#include <sstream>

#include "parallel.hpp"
#include "txlab/error.hpp"

namespace txlab {

namespace {

constexpr std::int64_t kChunk = 1000;
constexpr double kBandTol = 1e-12;
constexpr std::int64_t kMinLowerHits = 30;

std::uint64_t splitmix(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

std::uint64_t substream(std::uint64_t seed, std::int64_t path, std::uint64_t lane) {
  return splitmix(splitmix(splitmix(seed) ^ static_cast<std::uint64_t>(path)) ^ lane);
}

double uniform(std::mt19937_64& g) { return double(g() >> 11) * 0x1.0p-53; }

struct Tables {
  int lo = 0;  // level of index 0
  std::vector<double> n, z, p;

  double at(const std::vector<double>& v, int level) const { return v[level - lo]; }
};

struct Walker {
  const CxConfig& cfg;
  const CxLattice& lat;
  const Tables& tab;
  const std::vector<int>& checkpoints;
  double band_lo, band_hi;

  void run(std::int64_t path, PathRecord& rec, CxAccumulators& acc, std::vector<PathDumpRow>& dump) const {
    std::mt19937_64 walk(substream(cfg.seed, path, 0));
    std::mt19937_64 coin(substream(cfg.seed, path, 1));
    const double lam = cfg.lambda, mh = lat.m_hat;
    const bool dumping = path < cfg.dump_paths;
    int level = 0, k = 0;
    bool stopped = false, deviates = false;
    std::size_t next_cp = 0;
    double zh = 1.0, zc = 1.0, sh = 1.0, sc = 1.0, hi = 1.0;

    for (;;) {
      if (rec.sigma < 0 && level == -lat.m_d) {
        rec.sigma = k;
        rec.f = uniform(coin) < 0.5 ? 1.0 - cfg.delta : 1.0 + cfg.delta;
      }
      if (level >= lat.m) {
        rec.side = Absorption::upper;
        stopped = true;
      } else if (level <= -lat.lower) {
        rec.side = Absorption::lower;
        stopped = true;
      } else if (k == cfg.depth) {
        rec.side = Absorption::cap;
        stopped = true;
      }

      sh = tab.at(tab.n, level);
      zh = tab.at(tab.z, level);
      const double ph = zh - mh;
      // Before σ (and for f = 1) P̌ = P̂, so Ž⁰ is Ẑ⁰ itself.
      const bool moved = rec.sigma >= 0 && rec.f != 1.0;
      const double pc = moved ? rec.f * ph : ph;
      zc = moved ? mh + pc : zh;
      sc = 1.0 / zc;
      deviates = deviates || zc != zh;

      const double ratio = sc / sh;
      const double excess = std::max(band_lo - ratio, ratio - band_hi) / ratio;
      if (excess > kBandTol) ++acc.ratio_violations;
      acc.worst_ratio_excess = std::max(acc.worst_ratio_excess, excess);

      const double lo = std::max(sh, sc);
      hi = std::min(sh, sc) / (1.0 - lam);
      if (!(lo < hi)) ++acc.order_violations;
      const double t = double(k) / cfg.depth;
      const double s = (1.0 - t) * lo + t * hi;
      auto outside = [&](double x, double S) {
        return ((1.0 - lam) * S - x) / S > kBandTol || (x - S) / S > kBandTol;
      };
      if (outside(sh, s) || outside(sc, s)) ++acc.spread_violations;
      if (k == 0) acc.s0_error = std::max(acc.s0_error, std::abs(s - 1.0));

      while (next_cp < checkpoints.size() && checkpoints[next_cp] == k) {
        acc.z_hat_at[next_cp].add(zh);
        acc.z_check_at[next_cp].add(zc);
        ++next_cp;
      }
      if (dumping && (k % cfg.dump_stride == 0 || stopped) &&
          static_cast<int>(dump.size()) < cfg.dump_max_rows) {
        dump.push_back({path, k, t, sh, zh, ph, rec.sigma >= 0 ? rec.f : 1.0, pc, zc, sc, lo, hi, s});
      }
      if (stopped) break;
      level += uniform(walk) < tab.at(tab.p, level) ? 1 : -1;
      ++k;
    }

    // Frozen after absorption; the clock still runs to t = 1 where S = M.
    for (; next_cp < checkpoints.size(); ++next_cp) {
      acc.z_hat_at[next_cp].add(zh);
      acc.z_check_at[next_cp].add(zc);
    }
    {
      const double s1 = hi;
      if (((1.0 - lam) * s1 - sh) / s1 > kBandTol || (sh - s1) / s1 > kBandTol ||
          ((1.0 - lam) * s1 - sc) / s1 > kBandTol || (sc - s1) / s1 > kBandTol) {
        ++acc.spread_violations;
      }
      rec.s_T = s1;
    }
    rec.steps = k;
    rec.s_hat_T = sh;
    rec.z_hat_T = zh;
    rec.z_check_T = zc;

    acc.z_hat_T.add(zh);
    acc.z_check_T.add(zc);
    if (rec.sigma >= 0) ++acc.sigma_hits;
    if (deviates) ++acc.deviating;
    const double barrier = 2.0 * (1.0 - lam);
    switch (rec.side) {
      case Absorption::upper:
        ++acc.upper;
        acc.upper_s_hat_error = std::max(acc.upper_s_hat_error, std::abs(sh - barrier) / barrier);
        acc.upper_h_error = std::max({acc.upper_h_error, std::abs(zh - mh) / mh, std::abs(zc - mh) / mh});
        acc.upper_s1_error = std::max(acc.upper_s1_error, std::abs(rec.s_T - 2.0) / 2.0);
        acc.log_wealth_upper.add(std::log(sh));
        acc.z_mass_upper.add(zh);
        acc.z_mass_lower.add(0.0);
        acc.z_mass_cap.add(0.0);
        break;
      case Absorption::lower:
        ++acc.lower;
        acc.z_mass_upper.add(0.0);
        acc.z_mass_lower.add(zh);
        acc.z_mass_cap.add(0.0);
        break;
      case Absorption::cap:
        ++acc.cap;
        acc.z_mass_upper.add(0.0);
        acc.z_mass_lower.add(0.0);
        acc.z_mass_cap.add(zh);
        break;
    }
  }
};

double fraction_se(double p, std::int64_t n) { return n > 0 ? std::sqrt(std::max(p * (1.0 - p), 0.0) / n) : 0.0; }

}  // namespace

void CxConfig::validate() const {
  if (!(lambda > 0.0 && lambda < 0.5)) throw ConfigError("lambda must lie in (0, 1/2)");
  if (!(delta >= 0.0)) throw ConfigError("delta must be non-negative");
  if (!((1.0 - lambda) * (1.0 + delta) < 1.0 - delta)) {
    throw ConfigError("need (1 - lambda)(1 + delta) < 1 - delta");
  }
  if (m < 1) throw ConfigError("m must be positive");
  if (depth < 1) throw ConfigError("depth must be positive");
  if (!(eps_low > 0.0 && eps_low < 1.0)) throw ConfigError("eps_low must lie in (0, 1)");
  if (paths < 1) throw ConfigError("paths must be positive");
  if (threads < 1) throw ConfigError("threads must be positive");
  if (dump_paths < 0 || dump_stride < 1 || dump_max_rows < 0) throw ConfigError("invalid path dump settings");
}

const char* to_string(Absorption a) {
  switch (a) {
    case Absorption::upper: return "upper";
    case Absorption::lower: return "lower";
    case Absorption::cap: return "cap";
  }
  return "?";
}

double martingale_up_probability(double h_up, double h_down) {
  const double p = std::expm1(h_down) / (std::expm1(h_down) - std::expm1(-h_up));
  if (!(p > 0.0 && p < 1.0)) throw ConfigError("step sizes give no valid up-probability");
  return p;
}

CxLattice CxLattice::build(const CxConfig& cfg) {
  cfg.validate();
  CxLattice L;
  L.m_hat = 1.0 / (2.0 * (1.0 - cfg.lambda));
  L.m = cfg.m;
  L.h = std::log(2.0 * (1.0 - cfg.lambda)) / cfg.m;
  const double sigma_depth = std::log1p(L.m_hat);
  L.m_d = std::max(1, static_cast<int>(std::lround(sigma_depth / L.h)));
  L.h_d = sigma_depth / L.m_d;
  L.lower = static_cast<int>(std::ceil(-std::log(cfg.eps_low) / L.h_d));
  L.p_up = martingale_up_probability(L.h, L.h);
  L.p_zero = martingale_up_probability(L.h, L.h_d);
  L.p_down = martingale_up_probability(L.h_d, L.h_d);
  return L;
}

double CxLattice::n(int level) const { return level >= 0 ? std::exp(level * h) : std::exp(level * h_d); }

double CxLattice::up_probability(int level) const { return level > 0 ? p_up : level == 0 ? p_zero : p_down; }

LatticeDrift lattice_drift(const CxLattice& lat, double delta) {
  LatticeDrift d;
  const double mh = lat.m_hat;
  for (int level = -lat.lower + 1; level < lat.m; ++level) {
    const double p = lat.up_probability(level);
    const double z = 1.0 / lat.n(level), up = 1.0 / lat.n(level + 1), down = 1.0 / lat.n(level - 1);
    d.z_hat = std::max(d.z_hat, std::abs(p * up + (1.0 - p) * down - z) / z);
    for (double f : {1.0 - delta, 1.0 + delta}) {
      auto zc = [&](double zh) { return mh + f * (zh - mh); };
      d.z_check = std::max(d.z_check, std::abs(p * zc(up) + (1.0 - p) * zc(down) - zc(z)) / zc(z));
    }
  }
  // Ž⁰ jumps at σ by (f − 1) P̂ = (f − 1)(1 − M̂) with a fair coin.
  d.coin = std::abs(0.5 * (1.0 - delta) + 0.5 * (1.0 + delta) - 1.0);
  return d;
}

void Moments::add(double x) {
  ++n;
  const double d = x - mean;
  mean += d / double(n);
  m2 += d * (x - mean);
}

void Moments::merge(const Moments& o) {
  if (o.n == 0) return;
  if (n == 0) {
    *this = o;
    return;
  }
  const double total = double(n + o.n);
  const double d = o.mean - mean;
  mean += d * double(o.n) / total;
  m2 += o.m2 + d * d * double(n) * double(o.n) / total;
  n += o.n;
}

double Moments::se() const { return n > 1 ? std::sqrt(variance() / double(n)) : 0.0; }

void CxAccumulators::merge(const CxAccumulators& o) {
  upper += o.upper;
  lower += o.lower;
  cap += o.cap;
  sigma_hits += o.sigma_hits;
  deviating += o.deviating;
  ratio_violations += o.ratio_violations;
  order_violations += o.order_violations;
  spread_violations += o.spread_violations;
  worst_ratio_excess = std::max(worst_ratio_excess, o.worst_ratio_excess);
  s0_error = std::max(s0_error, o.s0_error);
  upper_s_hat_error = std::max(upper_s_hat_error, o.upper_s_hat_error);
  upper_h_error = std::max(upper_h_error, o.upper_h_error);
  upper_s1_error = std::max(upper_s1_error, o.upper_s1_error);
  z_hat_T.merge(o.z_hat_T);
  z_check_T.merge(o.z_check_T);
  log_wealth_upper.merge(o.log_wealth_upper);
  z_mass_upper.merge(o.z_mass_upper);
  z_mass_lower.merge(o.z_mass_lower);
  z_mass_cap.merge(o.z_mass_cap);
  if (z_hat_at.size() < o.z_hat_at.size()) {
    z_hat_at.resize(o.z_hat_at.size());
    z_check_at.resize(o.z_check_at.size());
  }
  for (std::size_t i = 0; i < o.z_hat_at.size(); ++i) {
    z_hat_at[i].merge(o.z_hat_at[i]);
    z_check_at[i].merge(o.z_check_at[i]);
  }
}

CxEnsemble simulate_hat(const CxConfig& cfg) {
  CxEnsemble ens;
  ens.config = cfg;
  ens.lattice = CxLattice::build(cfg);
  const CxLattice& L = ens.lattice;
  for (int c = 1; c < cfg.depth; c *= 10) ens.checkpoints.push_back(c);
  ens.checkpoints.push_back(cfg.depth);

  Tables tab;
  tab.lo = -L.lower;
  for (int level = -L.lower; level <= L.m; ++level) {
    const double n = L.n(level);
    tab.n.push_back(n);
    tab.z.push_back(1.0 / n);
    tab.p.push_back(L.up_probability(level));
  }
  const Walker walker{cfg, L, tab, ens.checkpoints, 1.0 / (1.0 + cfg.delta), 1.0 / (1.0 - cfg.delta)};

  ens.paths.resize(static_cast<std::size_t>(cfg.paths));
  const int chunks = static_cast<int>((cfg.paths + kChunk - 1) / kChunk);
  std::vector<CxAccumulators> part(chunks);
  std::vector<std::vector<PathDumpRow>> dumps(chunks);
  detail::parallel_for(chunks, cfg.threads, [&](int c) {
    CxAccumulators& acc = part[c];
    acc.z_hat_at.resize(ens.checkpoints.size());
    acc.z_check_at.resize(ens.checkpoints.size());
    const std::int64_t end = std::min<std::int64_t>(cfg.paths, (c + 1) * kChunk);
    for (std::int64_t p = c * kChunk; p < end; ++p) walker.run(p, ens.paths[p], acc, dumps[c]);
  });
  ens.acc.z_hat_at.resize(ens.checkpoints.size());
  ens.acc.z_check_at.resize(ens.checkpoints.size());
  for (int c = 0; c < chunks; ++c) {
    ens.acc.merge(part[c]);
    for (auto& row : dumps[c]) {
      if (static_cast<int>(ens.dump.size()) < cfg.dump_max_rows) ens.dump.push_back(row);
    }
  }
  const double cap_fraction = double(ens.acc.cap) / double(cfg.paths);
  if (cap_fraction > 1e-3) {
    std::ostringstream os;
    os << "depth cap absorbed " << cap_fraction << " of the paths (above 1e-3)";
    ens.warnings.push_back(os.str());
  }
  return ens;
}

PotentialReport decompose_potential(const CxEnsemble& ens) {
  const double lam = ens.config.lambda;
  PotentialReport r;
  r.m_hat = ens.lattice.m_hat;
  r.p_hat0 = 1.0 - r.m_hat;
  r.p_hat0_exact = (1.0 - 2.0 * lam) / (2.0 * (1.0 - lam));
  r.sigma_probability = double(ens.acc.sigma_hits) / double(ens.config.paths);
  r.sigma_se = fraction_se(r.sigma_probability, ens.config.paths);
  return r;
}

PerturbReport perturb(const CxEnsemble& ens) {
  PerturbReport r;
  r.ratio_violations = ens.acc.ratio_violations;
  r.worst_ratio_excess = ens.acc.worst_ratio_excess;
  Moments coin;
  for (const auto& p : ens.paths) coin.add(p.sigma >= 0 ? p.f : 0.0);
  r.coin_mean = coin.mean;
  r.coin_se = coin.se();
  for (const auto& m : ens.acc.z_check_at) {
    r.z_check_mean.push_back(m.mean);
    r.z_check_se.push_back(m.se());
  }
  if (r.ratio_violations > 0) {
    throw ConstructionError("perturbed price ratio left its band on " + std::to_string(r.ratio_violations) +
                            " steps");
  }
  return r;
}

MarketReport build_market(const CxEnsemble& ens) {
  MarketReport r;
  r.order_violations = ens.acc.order_violations;
  r.spread_violations = ens.acc.spread_violations;
  r.s0_error = ens.acc.s0_error;
  r.upper_s1_error = ens.acc.upper_s1_error;
  if (r.order_violations > 0) throw ConfigError("m >= M on some path; delta too large for lambda");
  return r;
}

CxReport verify_nonuniqueness(const CxEnsemble& ens, double x) {
  if (!(x > 0.0)) throw DomainError("x must be positive");
  const auto& cfg = ens.config;
  const auto& acc = ens.acc;
  const double n = double(cfg.paths);
  const double lam = cfg.lambda;
  CxReport r;
  r.potential = decompose_potential(ens);
  r.perturbation = perturb(ens);
  r.market = build_market(ens);
  r.upper_fraction = double(acc.upper) / n;
  r.lower_fraction = double(acc.lower) / n;
  r.cap_fraction = double(acc.cap) / n;
  r.deviation_fraction = double(acc.deviating) / n;
  r.deviation_se = fraction_se(r.deviation_fraction, cfg.paths);
  r.h_hat = 1.0 / (2.0 * (1.0 - lam));
  r.upper_h_error = acc.upper_h_error;
  r.upper_s_hat_error = acc.upper_s_hat_error;

  // Buy-hold-sell: ĝ = x Ŝ_T with y = 1/x, so U'(ĝ) = 1/(x Ŝ_T) against y Ẑ⁰_T and y Ž⁰_T.
  const double y = 1.0 / x;
  for (const auto& p : ens.paths) {
    if (p.side != Absorption::upper) continue;
    const double mu = 1.0 / (x * p.s_hat_T);
    r.first_order_residual = std::max({r.first_order_residual, std::abs(mu - y * p.z_hat_T) / mu,
                                       std::abs(mu - y * p.z_check_T) / mu});
  }
  if (acc.upper > 0) {
    r.log_utility_error =
        std::abs(std::log(x) + acc.log_wealth_upper.mean - (std::log(x) + std::log(2.0 * (1.0 - lam))));
  }
  r.z_hat_T_mean = acc.z_hat_T.mean;
  r.z_hat_T_se = acc.z_hat_T.se();
  r.z_mass_upper = acc.z_mass_upper.mean;
  r.z_mass_lower = acc.z_mass_lower.mean;
  r.z_mass_cap = acc.z_mass_cap.mean;
  r.checkpoints = ens.checkpoints;
  for (const auto& m : acc.z_hat_at) {
    r.z_hat_mean.push_back(m.mean);
    r.z_hat_se.push_back(m.se());
  }
  r.warnings = ens.warnings;

  const auto& P = r.potential;
  r.checks.push_back(make_check("p_hat0_exact", std::abs(P.p_hat0 - P.p_hat0_exact), 1e-15));
  r.checks.push_back(make_check("sigma_probability", std::abs(P.sigma_probability - P.p_hat0_exact), 3.0 * P.sigma_se));
  r.checks.push_back(make_check("dual_optimizer_upper", r.upper_h_error, 1e-14));
  r.checks.push_back(make_check("barrier_exactness", r.upper_s_hat_error, 1e-14));
  r.checks.push_back(make_check("s0", r.market.s0_error, 1e-14));
  r.checks.push_back(make_check("s1_upper", r.market.upper_s1_error, 1e-14));
  r.checks.push_back(make_check("ratio_violations", double(r.perturbation.ratio_violations), 0.0));
  r.checks.push_back(make_check("spread_violations", double(r.market.spread_violations), 0.0));
  r.checks.push_back(make_check("order_violations", double(r.market.order_violations), 0.0));
  r.checks.push_back(make_check("first_order", r.first_order_residual, 1e-14));
  r.checks.push_back(make_check("log_utility_upper", r.log_utility_error, 1e-12));
  r.checks.push_back(
      make_check("deviation_fraction", std::abs(r.deviation_fraction - P.sigma_probability), 3.0 * r.deviation_se));
  r.checks.push_back(make_check("absorption_mass", r.lower_fraction + r.cap_fraction, 2e-2));
  for (std::size_t i = 0; i < acc.z_hat_at.size(); ++i) {
    const std::string at = std::to_string(ens.checkpoints[i]);
    r.checks.push_back(make_check("z_hat_mean@" + at, std::abs(acc.z_hat_at[i].mean - 1.0), 3.0 * acc.z_hat_at[i].se()));
    r.checks.push_back(
        make_check("z_check_mean@" + at, std::abs(acc.z_check_at[i].mean - 1.0), 3.0 * acc.z_check_at[i].se()));
  }
  if (acc.lower < kMinLowerHits) {
    r.warnings.push_back("only " + std::to_string(acc.lower) +
                         " paths reached the lower barrier; standard errors of the Z means are unreliable");
  }
  r.drift = lattice_drift(ens.lattice, cfg.delta);
  r.checks.push_back(make_check("z_hat_martingale", r.drift.z_hat, 1e-13));
  r.checks.push_back(make_check("z_check_martingale", std::max(r.drift.z_check, r.drift.coin), 1e-13));
  return r;
}

std::string counterexample_csv(const CxReport& r) {
  std::ostringstream os;
  os << std::setprecision(17) << "name,value,se\n";
  auto row = [&](const char* name, double v, double se = 0.0) { os << name << ',' << v << ',' << se << '\n'; };
  row("p_hat0", r.potential.p_hat0);
  row("p_hat0_exact", r.potential.p_hat0_exact);
  row("sigma_probability", r.potential.sigma_probability, r.potential.sigma_se);
  row("coin_mean", r.perturbation.coin_mean, r.perturbation.coin_se);
  row("deviation_fraction", r.deviation_fraction, r.deviation_se);
  row("upper_fraction", r.upper_fraction);
  row("lower_fraction", r.lower_fraction);
  row("cap_fraction", r.cap_fraction);
  row("h_hat", r.h_hat);
  row("upper_h_error", r.upper_h_error);
  row("upper_s_hat_error", r.upper_s_hat_error);
  row("s0_error", r.market.s0_error);
  row("upper_s1_error", r.market.upper_s1_error);
  row("first_order_residual", r.first_order_residual);
  row("log_utility_error", r.log_utility_error);
  row("ratio_violations", double(r.perturbation.ratio_violations));
  row("spread_violations", double(r.market.spread_violations));
  row("order_violations", double(r.market.order_violations));
  row("z_hat_T_mean", r.z_hat_T_mean, r.z_hat_T_se);
  row("z_mass_upper", r.z_mass_upper);
  row("z_mass_lower", r.z_mass_lower);
  row("z_mass_cap", r.z_mass_cap);
  return os.str();
}

std::string path_dump_csv(const CxEnsemble& ens) {
  std::ostringstream os;
  os << std::setprecision(17) << "path,step,t,S_hat,Z0_hat,P_hat,f,P_check,Z0_check,S_check,m,M,S\n";
  for (const auto& d : ens.dump) {
    os << d.path << ',' << d.step << ',' << d.t << ',' << d.s_hat << ',' << d.z_hat << ',' << d.p_hat << ','
       << d.f << ',' << d.p_check << ',' << d.z_check << ',' << d.s_check << ',' << d.lo << ',' << d.hi << ','
       << d.s << '\n';
  }
  return os.str();
}

}  // namespace txlab
