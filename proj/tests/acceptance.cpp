// Acceptance suite: prints one PASS/FAIL line per criterion and exits
// non-zero if any criterion fails. Usage: acceptance <path to psd CLI>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "dense_ols.hpp"
#include "psd/psd.hpp"

using namespace psd;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(double v, int prec = 4) {
  std::ostringstream s;
  s.precision(prec);
  s << v;
  return s.str();
}

BudgetPlan plan_of(const std::vector<double>& eps) {
  BudgetPlan p;
  p.height = static_cast<int>(eps.size()) - 1;
  p.count_eps = eps;
  p.median_eps.assign(eps.size(), 0.0);
  for (double e : eps) p.total += e;
  return p;
}

// 1. Linear-time OLS equals the dense least-squares solve.
Outcome ac1() {
  RandomSource r(101);
  double worst = 0.0;
  for (int trial = 0; trial < 100; ++trial) {
    const int f = 2 + static_cast<int>(r.below(3));
    const int h = static_cast<int>(r.below(4));
    std::vector<double> eps(static_cast<std::size_t>(h) + 1);
    bool any = false;
    for (double& e : eps) {
      e = r.bernoulli(0.25) ? 0.0 : r.uniform(0.01, 2.0);
      any |= e > 0.0;
    }
    if (!any) eps[r.below(eps.size())] = r.uniform(0.01, 2.0);
    PsdTree t = PsdTree::complete(f, h, plan_of(eps));
    for (Node& n : t.nodes) {
      if (t.level_epsilon(n.level) > 0.0) n.noisy = r.uniform(-50.0, 500.0);
    }
    const auto dense = oracle::dense_ols(t);
    ols(t);
    for (std::size_t i = 0; i < t.nodes.size(); ++i) {
      const double rel = std::abs(*t.nodes[i].estimate - dense[i]) / std::max(1.0, std::abs(dense[i]));
      worst = std::max(worst, rel);
    }
  }
  return {worst <= 1e-8, "max relative deviation " + fmt(worst)};
}

// 2. Variance of the root estimate is 4/5 of the raw root variance.
Outcome ac2() {
  const double eps = 1.0;
  PsdTree t = PsdTree::complete(4, 1, plan_of({eps / 2, eps / 2}));
  RandomSource r(202);
  OlsScratch s;
  const int n = 200000;
  double sb = 0, sb2 = 0, sy = 0, sy2 = 0;
  for (int i = 0; i < n; ++i) {
    for (Node& v : t.nodes) v.noisy = noisy_count(r, 25.0, eps / 2);
    ols(t, s);
    const double b = *t.root().estimate, y = *t.root().noisy;
    sb += b;
    sb2 += b * b;
    sy += y;
    sy2 += y * y;
  }
  const double vb = sb2 / n - (sb / n) * (sb / n);
  const double vy = sy2 / n - (sy / n) * (sy / n);
  const double ratio = vb / vy;
  return {ratio >= 0.78 && ratio <= 0.82, "Var(beta)/Var(Y) = " + fmt(ratio)};
}

// 3. Geometric budget closed form and its ordering against uniform.
Outcome ac3() {
  const double r = std::cbrt(2.0);
  double sum_dev = 0.0, ratio_dev = 0.0;
  for (int h = 1; h <= 20; ++h) {
    const auto v = geometric_count_budget(h, 1.0);
    double s = 0.0;
    for (double e : v) s += e;
    sum_dev = std::max(sum_dev, std::abs(s - 1.0));
    for (int i = 0; i < h; ++i) ratio_dev = std::max(ratio_dev, std::abs(v[i] / v[i + 1] - r));
  }
  bool ordered = true;
  for (int h = 2; h <= 20; ++h) {
    ordered &= worst_case_error(BudgetKind::Geometric, h) < worst_case_error(BudgetKind::Uniform, h);
  }
  return {sum_dev <= 1e-9 && ratio_dev <= 1e-12 && ordered,
          "sum deviation " + fmt(sum_dev) + ", ratio deviation " + fmt(ratio_dev) +
              (ordered ? ", geometric < uniform" : ", ordering violated")};
}

// 4. Maximal containment never uses more than 8 * 2^(h-i) nodes of level i.
Outcome ac4() {
  const Rect dom{0, 0, 1, 1};
  const int h = 8;
  const auto pts = gen_synthetic(SyntheticKind::Uniform, 100000, dom, 404);
  const PsdTree t = build_quadtree(pts, dom, h, make_plan(h, 1.0, 1.0, GeometricCounts{}), RandomSource(405));
  RandomSource r(406);
  double worst = 0.0;
  int violations = 0;
  for (int q = 0; q < 10000; ++q) {
    double x0 = r.uniform(), x1 = r.uniform(), y0 = r.uniform(), y1 = r.uniform();
    const Rect rect{std::min(x0, x1), std::min(y0, y1), std::max(x0, x1), std::max(y0, y1)};
    const QueryAnswer a = answer(t, rect, CountSource::Raw);
    for (int i = 0; i <= h; ++i) {
      const auto bound = static_cast<double>(max_contained_nodes(BoundKind::Quadtree, h, i));
      const auto used = static_cast<double>(a.nodes_per_level[static_cast<std::size_t>(i)]);
      worst = std::max(worst, used / bound);
      violations += used > bound ? 1 : 0;
    }
  }
  return {violations == 0, "max n_i / bound = " + fmt(worst) + ", violations " + std::to_string(violations)};
}

// 5. Median quality on a binary tree over 2^20 uniform values in [0, 2^26],
// eps = 0.01 per level: average normalized rank error per depth.
Outcome ac5() {
  const std::size_t n = std::size_t{1} << 20;
  const double hi = std::exp2(26.0);
  const int depths = 7, trials = 50;
  const double eps = 0.01;
  const char* names[4] = {"em", "ss", "nm", "cell"};
  std::vector<std::vector<double>> err(4, std::vector<double>(depths, 0.0));
  std::vector<std::vector<int>> nodes(4, std::vector<int>(depths, 0));

  RandomSource data_src(505);
  for (int t = 0; t < trials; ++t) {
    std::vector<double> x(n);
    for (double& v : x) v = data_src.uniform(0.0, hi);
    std::sort(x.begin(), x.end());
    std::vector<Point> pts;
    pts.reserve(n);
    for (double v : x) pts.push_back({v, 0.5});
    RandomSource trial_src = RandomSource(506).derive(static_cast<std::uint64_t>(t));
    RandomSource grid_src = trial_src.derive(4);
    const NoisyGrid grid = NoisyGrid::build(pts, {0, 0, hi, 1}, 1024.0, eps, grid_src);

    for (int m = 0; m < 4; ++m) {
      RandomSource src = trial_src.derive(static_cast<std::uint64_t>(m));
      struct Cell {
        std::size_t begin, end;
        double lo, hi;
      };
      std::vector<Cell> level{{0, n, 0.0, hi}};
      for (int d = 0; d < depths; ++d) {
        std::vector<Cell> next;
        for (const Cell& c : level) {
          double s = c.lo;
          if (c.lo < c.hi) {
            const std::vector<double> vals(x.begin() + static_cast<std::ptrdiff_t>(c.begin),
                                           x.begin() + static_cast<std::ptrdiff_t>(c.end));
            const ValueSet vs = ValueSet::from_sorted(vals, c.lo, c.hi);
            switch (m) {
              case 0: s = em_median(src, vs, eps); break;
              case 1: s = ss_median(src, vs, eps, 1e-4); break;
              case 2: s = nm_median(src, vs, eps); break;
              case 3: s = grid.median({c.lo, 0, c.hi, 1}, Axis::X); break;
            }
          }
          s = std::clamp(s, c.lo, c.hi);
          const double size = static_cast<double>(c.end - c.begin);
          const auto below = static_cast<std::size_t>(
              std::lower_bound(x.begin() + static_cast<std::ptrdiff_t>(c.begin),
                               x.begin() + static_cast<std::ptrdiff_t>(c.end), s) -
              x.begin());
          if (size > 0) {
            const double half = size / 2.0;
            err[m][d] += std::min(1.0, std::abs(static_cast<double>(below - c.begin) - half) / half);
            ++nodes[m][d];
          }
          next.push_back({c.begin, below, c.lo, s});
          next.push_back({below, c.end, s, c.hi});
        }
        level = std::move(next);
      }
    }
  }
  bool ok = true;
  std::ostringstream detail;
  for (int d = 0; d < depths; ++d) {
    double mean[4];
    for (int m = 0; m < 4; ++m) mean[m] = err[m][d] / std::max(1, nodes[m][d]);
    ok &= mean[0] < mean[1] && mean[0] < mean[2] && mean[0] < mean[3];
    if (d == 0) ok &= mean[0] < 0.01;
    detail << " d" << d << "[";
    for (int m = 0; m < 4; ++m) detail << (m ? " " : "") << names[m] << "=" << fmt(mean[m], 3);
    detail << "]";
  }
  return {ok, "mean normalized rank error" + detail.str()};
}

// 6. EM lands in the central 60% of the ranks at least 1/6 of the time.
Outcome ac6() {
  const std::size_t n = 1000;
  RandomSource gen(606);
  std::vector<double> v(n);
  for (double& x : v) x = gen.uniform(0.0, 1000.0);
  const ValueSet c(v, 0.0, 1000.0);
  const double a = c.x(static_cast<std::int64_t>(n / 5)), b = c.x(static_cast<std::int64_t>(4 * n / 5));
  RandomSource r(607);
  const int trials = 10000;
  int inside = 0;
  for (int i = 0; i < trials; ++i) {
    const double s = em_median(r, c, 0.01);
    inside += (s >= a && s <= b) ? 1 : 0;
  }
  const double freq = static_cast<double>(inside) / trials;
  return {freq >= 1.0 / 6.0 - 0.02, "frequency " + fmt(freq)};
}

// 7. Sampling cost 2 p e^eps.
Outcome ac7() {
  const double cost = sampling_cost(0.01, 0.9);
  const double exact = 2.0 * 0.01 * std::exp(0.9);
  return {std::abs(cost - exact) <= 1e-12 && cost <= 0.1, "cost " + fmt(cost, 12)};
}

// 8. Geometric budget and post-processing both help; together they at least
// halve the baseline error.
Outcome ac8() {
  ExperimentSpec base;
  base.domain = {0, 0, 20, 20};
  base.kind = TreeKind::Quadtree;
  base.height = 10;
  base.epsilon = 0.1;
  base.trials = 10;
  base.seed = 808;
  base.prune_threshold.reset();
  const auto pts = gen_synthetic(SyntheticKind::SkewedCorner, 100000, base.domain, 809);
  RandomSource wsrc(810);
  const std::vector<QueryShape> shapes{{1, 1}};
  const Workload w = gen_workload(shapes, 600, base.domain, pts, wsrc);

  auto run = [&](const std::string& strategy, bool post) {
    ExperimentSpec s = base;
    s.strategy = strategy;
    s.postprocess = post;
    return run_experiment(s, pts, w).median_rel_error;
  };
  const double baseline = run("uniform", false);
  const double geo = run("geometric", false);
  const double post = run("uniform", true);
  const double opt = run("geometric", true);
  const bool ok = opt < geo && geo < baseline && opt < post && opt / baseline <= 0.5;
  return {ok, "baseline " + fmt(baseline) + ", geo " + fmt(geo) + ", post " + fmt(post) +
                  ", opt " + fmt(opt) + ", opt/baseline " + fmt(opt / baseline)};
}

// 9. Path sums equal epsilon for every tree kind, strategy and mechanism.
Outcome ac9() {
  const Rect dom{0, 0, 1, 1};
  const auto pts = gen_synthetic(SyntheticKind::GaussianMixture, 20000, dom, 909);
  int configs = 0, failures = 0;
  double worst = 0.0;
  std::string first_failure;
  for (TreeKind kind : {TreeKind::Quadtree, TreeKind::KdFlattened, TreeKind::Hybrid, TreeKind::HilbertR}) {
    for (const char* strategy : {"uniform", "geometric", "leaf", "skip", "custom"}) {
      for (MedianKind mech : {MedianKind::Exponential, MedianKind::SmoothSensitivity,
                              MedianKind::NoisyMean, MedianKind::CellBased}) {
        if (kind == TreeKind::Quadtree && mech != MedianKind::Exponential) continue;
        if (kind == TreeKind::HilbertR && mech == MedianKind::CellBased) continue;
        for (double eps : {0.1, 0.5, 1.0}) {
          ExperimentSpec s;
          s.domain = dom;
          s.kind = kind;
          s.height = 8;
          s.epsilon = eps;
          s.strategy = strategy;
          s.skip_levels = {1, 3};
          s.custom_weights = {4, 3, 3, 2, 2, 1, 1, 1, 1};
          s.mechanism.kind = mech;
          s.mechanism.cell_length = 0.005;
          s.seed = static_cast<std::uint64_t>(configs);
          ++configs;
          try {
            const BudgetPlan plan = plan_for(s);
            const double path = audit_path_sum(plan);
            const PsdTree t = build_tree(pts, dom, build_options_for(s), trial_source(s, 0));
            const PrivacyReport r = verify_privacy(t);
            worst = std::max({worst, std::abs(path - eps), std::abs(r.epsilon - eps),
                              std::abs(r.min_epsilon - eps)});
            const bool ss = mech == MedianKind::SmoothSensitivity && kind != TreeKind::Quadtree;
            int private_levels = 0;
            for (double m : plan.median_eps) private_levels += m > 0.0 ? 1 : 0;
            const double expect_delta = ss ? 2.0 * private_levels * s.mechanism.delta : 0.0;
            if (std::abs(r.delta - expect_delta) > 1e-15) throw AuditFailure("delta mismatch");
          } catch (const Error& e) {
            ++failures;
            if (first_failure.empty()) {
              first_failure = std::string(to_string(kind)) + "/" + strategy + "/" + to_string(mech) +
                              ": " + e.what();
            }
          }
        }
      }
    }
  }
  std::string detail = std::to_string(configs) + " configurations, max |path - eps| " + fmt(worst);
  if (!first_failure.empty()) detail += ", first failure " + first_failure;
  return {failures == 0 && worst <= 1e-9, detail};
}

// 10. Two identical bench runs give identical result files.
Outcome ac10(const std::string& cli) {
  if (cli.empty()) return {false, "no CLI path given"};
  namespace fs = std::filesystem;
  const fs::path dir = fs::temp_directory_path() / ("psd_acceptance_" + std::to_string(::getpid()));
  fs::create_directories(dir);
  const std::string points = (dir / "points.csv").string();
  const std::string config = (dir / "bench.ini").string();
  auto run = [&](const std::string& args) {
    const std::string cmd = "\"" + cli + "\" " + args + " 2>/dev/null";
    return std::system(cmd.c_str());
  };
  if (run("synth --kind skewed --n 50000 --domain 0,0,20,20 --seed 3 --out \"" + points + "\"") != 0) {
    return {false, "synth failed"};
  }
  {
    std::ofstream f(config);
    f << "data = \"" << points << "\"\n"
      << "domain = [0, 0, 20, 20]\n"
      << "tree = kd\nheight = 8\nepsilon = 0.5\n"
      << "shapes = [\"1x1\", \"10x10\", \"15x0.2\"]\nqueries = 200\ntrials = 3\n"
      << "seed = 1010\nworkload_seed = 1011\n";
  }
  std::vector<std::string> outs;
  for (int i = 0; i < 2; ++i) {
    const std::string out = (dir / ("result" + std::to_string(i) + ".csv")).string();
    if (run("--config \"" + config + "\" bench --out \"" + out + "\"") != 0) return {false, "bench failed"};
    std::ifstream in(out, std::ios::binary);
    outs.push_back(std::string(std::istreambuf_iterator<char>(in), {}));
  }
  fs::remove_all(dir);
  const bool same = !outs[0].empty() && outs[0] == outs[1];
  return {same, std::to_string(outs[0].size()) + " bytes, " + (same ? "identical" : "different")};
}

}  // namespace

int main(int argc, char** argv) {
  const std::string cli = argc > 1 ? argv[1] : "";
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
      {"AC1 OLS oracle equivalence", ac1},
      {"AC2 OLS variance ratio", ac2},
      {"AC3 geometric budget closed form", ac3},
      {"AC4 node-visit bound", ac4},
      {"AC5 EM median quality", ac5},
      {"AC6 EM central-portion frequency", ac6},
      {"AC7 sampling accounting", ac7},
      {"AC8 end-to-end improvement", ac8},
      {"AC9 privacy audit", ac9},
      {"AC10 bench determinism", [&] { return ac10(cli); }},
  };
  int failed = 0;
  for (const auto& [name, fn] : criteria) {
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = fn();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const std::chrono::duration<double> dt = std::chrono::steady_clock::now() - t0;
    failed += o.pass ? 0 : 1;
    std::cout << (o.pass ? "PASS " : "FAIL ") << name << ": " << o.detail << " (" << fmt(dt.count(), 3)
              << " s)" << std::endl;
  }
  std::cout << (failed == 0 ? "all acceptance criteria passed" : std::to_string(failed) + " criteria failed")
            << std::endl;
  return failed == 0 ? 0 : 1;
}
