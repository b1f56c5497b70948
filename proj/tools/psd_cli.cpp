// psd: build, query, benchmark and audit private spatial decompositions.
//
// Every option is a flat config key (`--config FILE`, `key = value` lines)
// and a flag of the same name; flags override the file.

#include <chrono>
#include <cstdint>
#include <fstream>
#include <iostream>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "psd/psd.hpp"

namespace {

struct Options {
  // Shared experiment settings.
  std::uint64_t seed = 0;
  double epsilon = 1.0;
  int height = 8;
  std::string tree = "quadtree";
  std::vector<double> domain;
  bool unsafe_domain_from_data = false;
  std::string data;
  std::string strategy = "geometric";
  double count_share = 0.7;
  std::vector<int> skip_levels;
  std::vector<double> custom_weights;
  int hybrid_switch_level = -1;
  std::string median_mechanism = "em";
  bool allow_laplace_median = false;
  double delta = 1e-4;
  double cell_length = 0.01;
  double sample_rate = 1.0;
  int hilbert_order = 18;
  double prune_threshold = 32.0;
  bool postprocess = true;

  // Workload and benchmark settings.
  std::vector<std::string> shapes{"1x1"};
  std::size_t queries = 600;
  int trials = 1;
  std::uint64_t workload_seed = 1;
  std::string workload;
  std::string workload_out;

  // Files and per-command settings.
  std::string out;
  std::string tree_file;
  std::string counts = "ols";
  std::string kind = "uniform";
  std::size_t n = 100000;
};

void log(const std::string& msg) { std::cerr << "psd: " << msg << '\n'; }

// Writes to `path`, or to stdout when the path is empty or "-".
template <class Fn>
void emit(const std::string& path, Fn&& write) {
  if (path.empty() || path == "-") {
    write(std::cout);
    return;
  }
  std::ofstream f(path, std::ios::binary);
  if (!f) throw psd::InvalidParameter("cannot write '" + path + "'");
  write(f);
  if (!f) throw psd::InvalidParameter("failed writing '" + path + "'");
}

psd::Rect rect_of(const std::vector<double>& v) {
  if (v.size() != 4) throw psd::InvalidParameter("domain needs four values: x_lo,y_lo,x_hi,y_hi");
  const psd::Rect r{v[0], v[1], v[2], v[3]};
  if (r.empty()) throw psd::DegenerateRegion("domain must have positive width and height");
  return r;
}

psd::MedianMechanism mechanism_of(const Options& o) {
  psd::MedianMechanism m;
  m.kind = psd::parse_median_kind(o.median_mechanism);
  if (m.kind == psd::MedianKind::Laplace && !o.allow_laplace_median) {
    throw psd::InvalidParameter(
        "median_mechanism=laplace adds noise of the order of the whole range; pass "
        "--allow_laplace_median to use it as a baseline");
  }
  m.delta = o.delta;
  m.cell_length = o.cell_length;
  m.sample_rate = o.sample_rate;
  m.validate();
  return m;
}

// Loads the dataset and settles the domain. The domain is public input; it is
// derived from the data only on explicit request.
std::pair<psd::PointSet, psd::Rect> load_dataset(const Options& o) {
  if (o.data.empty()) throw psd::InvalidParameter("no dataset given (--data)");
  std::optional<psd::Rect> domain;
  if (!o.domain.empty()) domain = rect_of(o.domain);
  if (!domain && !o.unsafe_domain_from_data) {
    throw psd::InvalidParameter(
        "no domain given (--domain x_lo,y_lo,x_hi,y_hi); --unsafe_domain_from_data derives it from "
        "the data");
  }
  psd::PointSet ps = psd::load_points(o.data, domain);
  for (const auto& w : ps.warnings) log("warning: " + w);
  if (!domain) {
    log("warning: privacy: the domain is taken from the data bounding box, which is not private");
    if (ps.points.empty()) throw psd::InvalidParameter("cannot derive a domain from an empty dataset");
    if (ps.bbox.empty()) throw psd::DegenerateRegion("data bounding box has zero area");
    domain = ps.bbox;
  }
  log("loaded " + std::to_string(ps.points.size()) + " points");
  return {std::move(ps), *domain};
}

psd::ExperimentSpec spec_of(const Options& o, const psd::Rect& domain) {
  psd::ExperimentSpec s;
  s.domain = domain;
  s.kind = psd::parse_tree_kind(o.tree);
  s.height = o.height;
  s.epsilon = o.epsilon;
  s.strategy = o.strategy;
  s.count_share = o.count_share;
  s.skip_levels = std::set<int>(o.skip_levels.begin(), o.skip_levels.end());
  s.custom_weights = o.custom_weights;
  s.switch_level = o.hybrid_switch_level;
  s.mechanism = mechanism_of(o);
  s.hilbert_order = o.hilbert_order;
  s.postprocess = o.postprocess;
  if (o.prune_threshold >= 0.0) {
    s.prune_threshold = o.prune_threshold;
  } else {
    s.prune_threshold.reset();
  }
  s.seed = o.seed;
  s.trials = o.trials;
  s.validate();
  return s;
}

psd::Workload workload_of(const Options& o, const psd::Rect& domain,
                          const std::vector<psd::Point>& points) {
  if (!o.workload.empty()) {
    std::ifstream in(o.workload);
    if (!in) throw psd::InvalidParameter("cannot open workload '" + o.workload + "'");
    return psd::read_workload(in);
  }
  std::vector<psd::QueryShape> shapes;
  for (const auto& s : o.shapes) shapes.push_back(psd::parse_shape(s));
  psd::RandomSource src(o.workload_seed);
  psd::Workload w = psd::gen_workload(shapes, o.queries, domain, points, src);
  if (!o.workload_out.empty()) {
    emit(o.workload_out, [&](std::ostream& f) { psd::write_workload(f, w); });
  }
  return w;
}

psd::PsdTree read_tree_file(const std::string& path) {
  if (path.empty()) throw psd::InvalidParameter("no tree file given (--tree_file)");
  std::ifstream in(path);
  if (!in) throw psd::InvalidParameter("cannot open tree '" + path + "'");
  return psd::read_tree(in);
}

void print_report(std::ostream& out, const psd::BudgetPlan& plan, const psd::PrivacyReport* r) {
  using psd::detail::fmt;
  out << "epsilon," << fmt(plan.total) << '\n';
  out << "count_total," << fmt(plan.count_total()) << '\n';
  out << "median_total," << fmt(plan.median_total()) << '\n';
  for (int i = plan.height; i >= 0; --i) {
    out << "level," << i << ",count_eps," << fmt(plan.count_eps[static_cast<std::size_t>(i)])
        << ",median_eps," << fmt(plan.median_eps[static_cast<std::size_t>(i)]) << '\n';
  }
  out << "path_sum," << fmt(psd::audit_path_sum(plan)) << '\n';
  if (r) {
    out << "tree_path_max," << fmt(r->epsilon) << '\n';
    out << "tree_path_min," << fmt(r->min_epsilon) << '\n';
    out << "paths," << r->paths << '\n';
    out << "delta," << fmt(r->delta) << '\n';
  }
}

int cmd_synth(const Options& o) {
  if (o.domain.empty()) throw psd::InvalidParameter("synth needs --domain");
  const auto pts = psd::gen_synthetic(psd::parse_synthetic_kind(o.kind), o.n, rect_of(o.domain), o.seed);
  emit(o.out, [&](std::ostream& f) { psd::write_points(f, pts); });
  log("generated " + std::to_string(pts.size()) + " " + o.kind + " points");
  return 0;
}

int cmd_build(const Options& o) {
  const auto [ps, domain] = load_dataset(o);
  const psd::ExperimentSpec spec = spec_of(o, domain);
  psd::PrivacyReport r;
  const auto t0 = std::chrono::steady_clock::now();
  const psd::PsdTree tree = psd::release_tree(ps.points, spec, 0, &r);
  const std::chrono::duration<double> dt = std::chrono::steady_clock::now() - t0;
  emit(o.out, [&](std::ostream& f) { psd::write_tree(f, tree); });
  std::ostringstream msg;
  msg << "built " << psd::to_string(tree.kind) << " tree: " << tree.size() << " nodes, epsilon "
      << r.epsilon;
  if (r.delta > 0.0) msg << ", delta " << r.delta;
  msg << " (" << dt.count() << " s)";
  log(msg.str());
  return 0;
}

int cmd_query(const Options& o) {
  const psd::PsdTree tree = read_tree_file(o.tree_file);
  const auto [ps, domain] = load_dataset(o);
  const psd::Workload w = workload_of(o, domain, ps.points);
  psd::CountSource counts = psd::CountSource::Ols;
  if (o.counts == "raw") {
    counts = psd::CountSource::Raw;
  } else if (o.counts != "ols") {
    throw psd::InvalidParameter("counts must be raw or ols");
  }
  emit(o.out, [&](std::ostream& f) {
    using psd::detail::fmt;
    f << "query_id,shape,x_lo,y_lo,x_hi,y_hi,true,estimate,rel_error\n";
    for (const auto& q : w.queries) {
      const auto truth = psd::true_answer(ps.points, q.rect);
      const double est = psd::answer(tree, q.rect, counts).estimate;
      f << q.id << ',' << q.shape << ',' << fmt(q.rect.x_lo) << ',' << fmt(q.rect.y_lo) << ','
        << fmt(q.rect.x_hi) << ',' << fmt(q.rect.y_hi) << ',' << truth << ',' << fmt(est) << ','
        << fmt(psd::relative_error(est, static_cast<double>(truth))) << '\n';
    }
  });
  return 0;
}

int cmd_bench(const Options& o) {
  const auto [ps, domain] = load_dataset(o);
  const psd::ExperimentSpec spec = spec_of(o, domain);
  const psd::Workload w = workload_of(o, domain, ps.points);
  const auto t0 = std::chrono::steady_clock::now();
  const psd::ExperimentReport rep = psd::run_experiment(spec, ps.points, w);
  const std::chrono::duration<double> dt = std::chrono::steady_clock::now() - t0;
  emit(o.out, [&](std::ostream& f) { psd::write_report(f, rep); });
  std::ostringstream msg;
  msg << "median relative error " << rep.median_rel_error << " over " << rep.rows.size()
      << " answers (" << dt.count() << " s)";
  log(msg.str());
  return 0;
}

int cmd_audit(const Options& o) {
  if (!o.tree_file.empty()) {
    const psd::PsdTree tree = read_tree_file(o.tree_file);
    const psd::PrivacyReport r = psd::audit_tree(tree);
    emit(o.out, [&](std::ostream& f) { print_report(f, tree.plan, &r); });
    // A pruned tree no longer has every level on every path; check the plan
    // and the paths that remain.
    if (r.epsilon > tree.plan.total * (1.0 + psd::kAuditTolerance)) {
      throw psd::AuditFailure("a root-to-leaf path spends more than the advertised epsilon");
    }
    return 0;
  }
  psd::ExperimentSpec spec = spec_of(o, o.domain.empty() ? psd::Rect{0, 0, 1, 1} : rect_of(o.domain));
  const psd::BudgetPlan plan = psd::plan_for(spec);
  emit(o.out, [&](std::ostream& f) {
    print_report(f, plan, nullptr);
    // Each private level runs two smooth-sensitivity medians on a path.
    double delta = 0.0;
    if (spec.mechanism.kind == psd::MedianKind::SmoothSensitivity) {
      for (double e : plan.median_eps) delta += e > 0.0 ? 2.0 * spec.mechanism.delta : 0.0;
    }
    f << "delta," << psd::detail::fmt(delta) << '\n';
  });
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Differentially private spatial decompositions"};
  app.set_config("--config", "", "Config file of flat `key = value` lines");
  app.require_subcommand(1);
  Options o;

  app.add_option("--seed", o.seed, "Build and data seed");
  app.add_option("--epsilon", o.epsilon, "Total privacy budget");
  app.add_option("--height", o.height, "Tree height h (leaves at level 0)");
  app.add_option("--tree", o.tree, "quadtree|kd|hybrid|hilbert");
  app.add_option("--domain", o.domain, "x_lo,y_lo,x_hi,y_hi")->delimiter(',')->expected(4);
  app.add_flag("--unsafe_domain_from_data", o.unsafe_domain_from_data,
               "Use the data bounding box as the domain (not private)");
  app.add_option("--data", o.data, "Point file, one x,y per line");
  app.add_option("--strategy", o.strategy, "Count budget: uniform|geometric|leaf|skip|custom");
  app.add_option("--count_share", o.count_share, "Share of epsilon spent on counts");
  app.add_option("--skip_levels", o.skip_levels, "Levels without counts (strategy=skip)")
      ->delimiter(',');
  app.add_option("--custom_weights", o.custom_weights, "Per-level weights (strategy=custom)")
      ->delimiter(',');
  app.add_option("--hybrid_switch_level", o.hybrid_switch_level,
                 "Data-dependent levels of a hybrid tree (negative: h/2)");
  app.add_option("--median_mechanism", o.median_mechanism, "em|ss|cell|nm|laplace");
  app.add_flag("--allow_laplace_median", o.allow_laplace_median,
               "Permit the Laplace median baseline");
  app.add_option("--delta", o.delta, "Smooth sensitivity delta");
  app.add_option("--cell_length", o.cell_length, "Cell side of the cell-based median");
  app.add_option("--sample_rate", o.sample_rate, "Bernoulli sampling rate for medians");
  app.add_option("--hilbert_order", o.hilbert_order, "Hilbert curve order");
  app.add_option("--prune_threshold", o.prune_threshold, "Prune below this count (negative: off)");
  app.add_option("--postprocess", o.postprocess, "Run least-squares post-processing");
  app.add_option("--shapes", o.shapes, "Query shapes WxH");
  app.add_option("--queries", o.queries, "Queries per shape");
  app.add_option("--trials", o.trials, "Independent trees per benchmark");
  app.add_option("--workload_seed", o.workload_seed, "Workload placement seed");
  app.add_option("--workload", o.workload, "Read the workload from this file");
  app.add_option("--workload_out", o.workload_out, "Also write the generated workload here");
  app.add_option("--out", o.out, "Output file (default stdout)");
  app.add_option("--tree_file", o.tree_file, "Serialized tree to read");
  app.add_option("--counts", o.counts, "Counts used by query: raw|ols");
  app.add_option("--kind", o.kind, "Synthetic data: uniform|gaussian|skewed");
  app.add_option("--n", o.n, "Synthetic point count");

  auto* synth = app.add_subcommand("synth", "Generate a synthetic point file")->fallthrough();
  auto* build = app.add_subcommand("build", "Build and release a tree")->fallthrough();
  auto* query = app.add_subcommand("query", "Answer a workload from a released tree")->fallthrough();
  auto* bench = app.add_subcommand("bench", "Run a full experiment")->fallthrough();
  auto* audit = app.add_subcommand("audit", "Report the privacy budget of a tree or config")
                    ->fallthrough();

  CLI11_PARSE(app, argc, argv);
  try {
    if (*synth) return cmd_synth(o);
    if (*build) return cmd_build(o);
    if (*query) return cmd_query(o);
    if (*bench) return cmd_bench(o);
    if (*audit) return cmd_audit(o);
  } catch (const psd::Error& e) {
    log(std::string("error: ") + e.what());
    return 1;
  }
  return 2;
}
