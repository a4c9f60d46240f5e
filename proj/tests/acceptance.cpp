// Acceptance suite: one PASS/FAIL line per criterion. Every tolerance is pinned here.

#include "parvi/dataset.hpp"
#include "parvi/energy.hpp"
#include "parvi/experiment.hpp"
#include "parvi/io.hpp"
#include "parvi/metrics.hpp"
#include "parvi/samplers.hpp"

#include "oracles.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <algorithm>
#include <cstdarg>
#include <chrono>
#include <limits>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

using namespace parvi;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr double kGradRelTol = 1e-5;
constexpr double kAegdSlack = 1e-10;
constexpr double kModifiedEnergySlack = 1e-9;
constexpr double kReductionTol = 1e-10;
constexpr std::uint64_t kImeqMaxEvals = 101;
constexpr std::uint64_t kEviMinEvals = 300;
constexpr double kTable1MmdTol = 0.05;
constexpr double kMonotoneSlack = 1e-6;
constexpr double kFarGapTol = 0.1;
constexpr double kFarMmdTol = 0.1;
constexpr double kMmdOracleTol = 1e-12;
constexpr double kBlrAccuracy = 0.9;
constexpr double kBlrLoglikRel = 0.02;

struct Outcome {
  bool pass = false;
  std::string detail;
};

struct Context {
  std::string cache_dir;
  std::string work_dir;
};

std::string fmt(const char* f, ...) __attribute__((format(printf, 1, 2)));
std::string fmt(const char* f, ...) {
  char buf[512];
  va_list ap;
  va_start(ap, f);
  std::vsnprintf(buf, sizeof buf, f, ap);
  va_end(ap);
  return buf;
}

ParticleSet seeded(std::size_t n, std::size_t d, std::uint64_t seed, double scale = 1.0) {
  CounterRng rng(seed);
  return gaussian_init(n, d, Vector::Zero(static_cast<Eigen::Index>(d)), scale, rng);
}

std::vector<std::string> csv_lines(const std::string& text) {
  std::vector<std::string> out;
  std::istringstream in(text);
  for (std::string l; std::getline(in, l);) out.push_back(l);
  return out;
}

// ---------------------------------------------------------------------------

Outcome gradient_correctness(const Context&) {
  const std::size_t ns[] = {2, 5, 10};
  const std::size_t ds[] = {1, 2, 3};
  const char* names[] = {"double_banana", "star", "eight", "blr"};
  double worst = 0.0;
  std::string worst_at;
  for (int k = 0; k < 100; ++k) {
    const std::string name = names[k % 4];
    const std::size_t n = ns[(k / 4) % 3];
    const std::size_t p = ds[(k / 12) % 3];
    TargetPtr t;
    if (name == "double_banana") t = std::make_shared<DoubleBanana>();
    else if (name == "star") t = star_mixture();
    else if (name == "eight") t = eight_mixture();
    else {
      CounterRng drng(1000 + static_cast<std::uint64_t>(k));
      Dataset data = make_separable(40, p, 0.3, drng);
      t = std::make_shared<LogisticRegressionTarget>(data.features, data.labels, 1.0);
    }
    const std::size_t d = t->dim();
    const EnergyDecomposition e(GaussianKernel(0.1, d), t);
    const ParticleSet ps = seeded(n, d, static_cast<std::uint64_t>(k), name == "eight" ? 4.0 : 1.0);
    const FlatVector analytic = e.grad_g(ps).grad + e.grad_h(ps);
    const FlatVector numeric =
        oracle::central_diff([&](const FlatVector& z) { return e.energy_f(view_of(z, d)); }, ps.flatten());
    const double err = oracle::rel_err(analytic, numeric);
    if (err > worst) {
      worst = err;
      worst_at = fmt("%s N=%zu d=%zu", name.c_str(), n, d);
    }
  }
  return {worst <= kGradRelTol, fmt("max rel err %.3g at %s over 100 configs (tol %.0e)", worst, worst_at.c_str(),
                                    kGradRelTol)};
}

Outcome aegd_stability(const Context&) {
  double worst = -std::numeric_limits<double>::infinity();
  for (const TargetPtr& t : std::vector<TargetPtr>{std::make_shared<DoubleBanana>(), star_mixture(), eight_mixture()}) {
    const EnergyDecomposition e(GaussianKernel(0.1, 2), t);
    const QuadratizedEnergy qe(e, 5.0, QuadratizedPart::full);
    SamplerConfig c;
    c.scheme = Scheme::aegd;
    c.step = 0.01;
    const double n = 100.0;
    SchemeState s = init_state(c, e, seeded(100, 2, 2));
    for (int k = 0; k < 500; ++k) {
      const SchemeState next = step_aegd(s, qe, c);
      // Proximal norm weighted by 1/N, matching the velocity -N grad F_h.
      const double dz = (next.particles.flatten() - s.particles.flatten()).squaredNorm() / n;
      worst = std::max(worst, next.r * next.r - s.r * s.r + dz / c.step);
      s = next;
    }
  }
  return {worst <= kAegdSlack, fmt("max of (r')^2 - r^2 + |dz|^2/tau = %.3g over 3 targets x 500 steps (slack %.0e)",
                                   worst, kAegdSlack)};
}

Outcome imeq_modified_energy(const Context&) {
  double worst = -std::numeric_limits<double>::infinity();
  for (double tau : {0.1, 0.01}) {
    const EnergyDecomposition e(GaussianKernel(0.1, 2), IsotropicGaussian::standard(2));
    const QuadratizedEnergy qe(e, 5.0);
    SamplerConfig c;
    c.scheme = Scheme::imeq;
    c.step = tau;
    c.closed_form_inner = false;
    c.inner.grad_tol = 1e-10;
    SchemeState s = init_state(c, e, seeded(100, 2, 3, 2.0));
    double prev = s.r * s.r + e.energy_h(s.particles);
    for (int k = 0; k < 200; ++k) {
      s = step_imeq(s, qe, c);
      const double m = s.r * s.r + e.energy_h(s.particles);
      worst = std::max(worst, m - prev);
      prev = m;
    }
  }
  return {worst <= kModifiedEnergySlack,
          fmt("max increase of r^2 + H = %.3g over 200 steps, tau in {0.1, 0.01} (slack %.0e)", worst,
              kModifiedEnergySlack)};
}

Outcome aegd_reduction(const Context&) {
  const EnergyDecomposition e(GaussianKernel(0.1, 2), std::make_shared<ZeroPotential>(2));
  const QuadratizedEnergy q_part(e, 5.0, QuadratizedPart::interaction);
  const QuadratizedEnergy q_full(e, 5.0, QuadratizedPart::full);
  SamplerConfig ci;
  ci.scheme = Scheme::imeq;
  ci.step = 0.01;
  SamplerConfig ca = ci;
  ca.scheme = Scheme::aegd;
  SchemeState si = init_state(ci, e, seeded(20, 2, 4));
  SchemeState sa = init_state(ca, e, seeded(20, 2, 4));
  double worst = 0.0;
  for (int k = 0; k < 50; ++k) {
    si = step_imeq(si, q_part, ci);
    sa = step_aegd(sa, q_full, ca);
    worst = std::max(worst, (si.particles.flatten() - sa.particles.flatten()).lpNorm<Eigen::Infinity>());
    worst = std::max(worst, std::abs(si.r - sa.r));
  }
  return {worst <= kReductionTol, fmt("max trajectory difference %.3g over 50 steps, N=20 (tol %.0e)", worst,
                                      kReductionTol)};
}

Outcome interaction_counts(const Context&) {
  const auto target = std::make_shared<DoubleBanana>();
  const ParticleSet init = seeded(100, 2, 5);
  SamplerConfig c;
  c.n_outer = 100;
  c.inner.max_iters = 20;
  c.scheme = Scheme::imeq;
  c.step = 0.01;
  const auto imeq = run(c, target, init).records.back().counts.interaction_grad_evals;
  c.scheme = Scheme::evi_im;
  c.step = 0.1;
  const auto evi = run(c, target, init).records.back().counts.interaction_grad_evals;
  return {imeq <= kImeqMaxEvals && evi >= kEviMinEvals,
          fmt("ImEQ %llu (<= %llu), EVI-Im %llu (>= %llu) after 100 outer steps, K=20",
              static_cast<unsigned long long>(imeq), static_cast<unsigned long long>(kImeqMaxEvals),
              static_cast<unsigned long long>(evi), static_cast<unsigned long long>(kEviMinEvals))};
}

ExperimentConfig table1_config() {
  ExperimentConfig c;
  c.label = "table1_imeq";
  c.target = "double_banana";
  c.n_particles = 500;
  c.sampler.scheme = Scheme::imeq;
  c.sampler.bandwidth_h = 0.1;
  c.sampler.step = 0.01;
  c.sampler.shift_c = 5.0;
  c.sampler.n_outer = 500;
  c.sampler.steady_state_tol = 1e-5;
  c.sampler.stop_at_steady_state = true;
  c.seed = 1;
  return c;
}

json run_sample_dir(const ExperimentConfig& cfg, const std::string& dir, int& code) {
  std::ostringstream log;
  code = cmd_sample(cfg, dir, log);
  if (code != 0) std::cerr << log.str();
  return json::parse(io::read_text((fs::path(dir) / "summary.json").string()));
}

Outcome table1(const Context& ctx) {
  int code = 0;
  const std::string dir = (fs::path(ctx.work_dir) / "table1_a").string();
  const json s = run_sample_dir(table1_config(), dir, code);
  if (code != 0) return {false, fmt("sample exited with %d", code)};
  const double mmd = s["mmd2"].get<double>();

  const auto rows = csv_lines(io::read_text((fs::path(dir) / "trace.csv").string()));
  double worst_rise = -std::numeric_limits<double>::infinity();
  double prev = 0.0;
  for (std::size_t k = 1; k < rows.size(); ++k) {
    const auto f = io::split(rows[k], ',');
    const std::size_t n = std::stoul(f[0]);
    const double fh = std::stod(f[1]);
    if (n > 10) worst_rise = std::max(worst_rise, fh - prev);
    prev = fh;
  }
  const bool pass = mmd <= kTable1MmdTol && worst_rise <= kMonotoneSlack;
  const std::string steady = s["steady_state"].is_null() ? "none" : std::to_string(s["steady_state"].get<int>());
  return {pass, fmt("MMD^2 %.4g (tol %.2g), steady state at %s, max F_h rise after n=10: %.3g (slack %.0e)", mmd,
                    kTable1MmdTol, steady.c_str(), worst_rise, kMonotoneSlack)};
}

Outcome far_init(const Context& ctx) {
  ExperimentConfig near;
  near.target = "star";
  near.n_particles = 500;
  near.sampler.scheme = Scheme::imeq;
  near.sampler.step = 0.01;
  near.sampler.n_outer = 500;
  near.mmd_cadence = 100;
  near.seed = 1;
  ExperimentConfig far = near;
  far.init_mean = {5.0, 5.0};
  near.label = "star_near";
  far.label = "star_far";
  int c1 = 0, c2 = 0;
  const json sn = run_sample_dir(near, (fs::path(ctx.work_dir) / "star_near").string(), c1);
  const json sf = run_sample_dir(far, (fs::path(ctx.work_dir) / "star_far").string(), c2);
  if (c1 != 0 || c2 != 0) return {false, fmt("sample exited with %d / %d", c1, c2)};
  const double fn = sn["final_F_h"].get<double>();
  const double ff = sf["final_F_h"].get<double>();
  const double mmd = sf["mmd2"].get<double>();
  const bool pass = std::abs(ff - fn) <= kFarGapTol && mmd <= kFarMmdTol;
  return {pass, fmt("far F_h %.4g vs near %.4g (gap %.3g, tol %.2g), far MMD^2 %.4g (tol %.2g)", ff, fn,
                    std::abs(ff - fn), kFarGapTol, mmd, kFarMmdTol)};
}

Outcome mmd_oracle(const Context&) {
  CounterRng rng(8);
  double worst = 0.0;
  for (int t = 0; t < 50; ++t) {
    const std::size_t n = 1 + rng.uniform_index(50);
    const std::size_t m = 1 + rng.uniform_index(50);
    const std::size_t d = 1 + rng.uniform_index(3);
    const ParticleSet x = gaussian_init(n, d, Vector::Zero(static_cast<Eigen::Index>(d)), 1.0, rng);
    const ParticleSet y = gaussian_init(m, d, Vector::Constant(static_cast<Eigen::Index>(d), 0.5), 2.0, rng);
    const double want = oracle::mmd2(oracle::to_points(x), oracle::to_points(y));
    worst = std::max(worst, std::abs(mmd2(x, y) - want) / std::max(1.0, std::abs(want)));
  }
  return {worst <= kMmdOracleTol, fmt("max deviation %.3g over 50 pairs (tol %.0e)", worst, kMmdOracleTol)};
}

Outcome blr(const Context& ctx) {
  const fs::path dir = fs::path(ctx.work_dir) / "blr";
  fs::create_directories(dir);
  CounterRng drng(0);
  const std::string data = (dir / "separable.csv").string();
  save_csv(make_separable(1000, 5, 1.0, drng), data);

  ExperimentConfig c;
  c.target = "blr";
  c.dataset = data;
  c.n_particles = 100;
  c.sampler.n_outer = 100;
  c.sampler.step = 0.01;
  c.sampler.inner_solver = InnerSolver::adagrad;
  c.sampler.inner.lr = 0.1;
  c.mmd = false;
  c.repeats = 1;
  c.seed = 5;
  ExperimentConfig e = c;
  c.sampler.scheme = Scheme::imeq;
  e.sampler.scheme = Scheme::evi_im;

  std::ostringstream log;
  const int c1 = cmd_blr(c, (dir / "imeq").string(), log);
  const int c2 = cmd_blr(e, (dir / "evi_im").string(), log);
  if (c1 != 0 || c2 != 0) {
    std::cerr << log.str();
    return {false, fmt("blr exited with %d / %d", c1, c2)};
  }
  const json si = json::parse(io::read_text((dir / "imeq" / "blr_summary.json").string()));
  const json se = json::parse(io::read_text((dir / "evi_im" / "blr_summary.json").string()));
  const double acc = si["test_accuracy"]["mean"].get<double>();
  const double li = si["train_loglik"]["mean"].get<double>();
  const double le = se["train_loglik"]["mean"].get<double>();
  const double rel = std::abs(li - le) / std::abs(le);
  return {acc >= kBlrAccuracy && rel <= kBlrLoglikRel,
          fmt("ImEQ test accuracy %.4g (>= %.2g), train loglik %.5g vs EVI-Im %.5g (rel %.3g, tol %.2g)", acc,
              kBlrAccuracy, li, le, rel, kBlrLoglikRel)};
}

std::string strip_wall_ms(const std::string& csv) {
  std::string out;
  for (const auto& l : csv_lines(csv)) out += l.substr(0, l.rfind(',')) + "\n";
  return out;
}

Outcome determinism(const Context& ctx) {
  const fs::path a = fs::path(ctx.work_dir) / "table1_a";
  const fs::path b = fs::path(ctx.work_dir) / "table1_b";
  int code = 0;
  if (!fs::exists(a / "trace.csv")) {
    run_sample_dir(table1_config(), a.string(), code);
    if (code != 0) return {false, fmt("first run exited with %d", code)};
  }
  run_sample_dir(table1_config(), b.string(), code);
  if (code != 0) return {false, fmt("second run exited with %d", code)};
  const std::string ta = strip_wall_ms(io::read_text((a / "trace.csv").string()));
  const std::string tb = strip_wall_ms(io::read_text((b / "trace.csv").string()));
  return {ta == tb, fmt("trace.csv without wall_ms: %zu vs %zu bytes, %s", ta.size(), tb.size(),
                        ta == tb ? "identical" : "different")};
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Acceptance criteria"};
  Context ctx{"acceptance_cache", "acceptance_runs"};
  std::vector<int> only;
  app.add_option("--cache-dir", ctx.cache_dir, "Reference sample cache");
  app.add_option("--work-dir", ctx.work_dir, "Scratch directory for runs");
  app.add_option("--only", only, "Run only these criteria (1-10)");
  CLI11_PARSE(app, argc, argv);

  fs::create_directories(ctx.work_dir);
  setenv("PARVI_CACHE_DIR", ctx.cache_dir.c_str(), 1);

  const std::vector<std::pair<const char*, std::function<Outcome(const Context&)>>> criteria = {
      {"gradient correctness", gradient_correctness},
      {"AEGD per-step stability", aegd_stability},
      {"ImEQ modified-energy stability", imeq_modified_energy},
      {"AEGD-reduction equivalence", aegd_reduction},
      {"interaction-count audit", interaction_counts},
      {"double-banana ImEQ at desk scale", table1},
      {"far-initialization robustness", far_init},
      {"MMD^2 oracle equivalence", mmd_oracle},
      {"BLR desk scale", blr},
      {"determinism", determinism},
  };

  int failures = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const int id = static_cast<int>(i) + 1;
    if (!only.empty() && std::find(only.begin(), only.end(), id) == only.end()) continue;
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = criteria[i].second(ctx);
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    std::printf("%s criterion %d (%s): %s [%.1f s]\n", o.pass ? "PASS" : "FAIL", id, criteria[i].first,
                o.detail.c_str(), secs);
    std::fflush(stdout);
    if (!o.pass) ++failures;
  }
  return failures == 0 ? 0 : 1;
}
