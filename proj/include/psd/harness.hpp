#pragma once

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <istream>
#include <map>
#include <optional>
#include <ostream>
#include <set>
#include <span>
#include <sstream>
#include <string>
#include <string_view>
#include <system_error>
#include <vector>

#include "psd/budget.hpp"
#include "psd/build.hpp"
#include "psd/error.hpp"
#include "psd/geometry.hpp"
#include "psd/noise.hpp"
#include "psd/postprocess.hpp"
#include "psd/query.hpp"
#include "psd/serialize.hpp"
#include "psd/tree.hpp"

namespace psd {

// ---------------------------------------------------------------------------
// Point files: one `x,y` pair per line, `#` starts a comment line.

struct PointSet {
  std::vector<Point> points;
  Rect bbox;  // bounding box of the points, half-open upper edges widened by one ulp
  std::vector<std::string> warnings;
};

namespace detail {

inline std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

inline bool parse_real(std::string_view s, double& out) {
  s = trim(s);
  if (!s.empty() && s.front() == '+') s.remove_prefix(1);
  const auto r = std::from_chars(s.data(), s.data() + s.size(), out);
  return r.ec == std::errc() && r.ptr == s.data() + s.size() && std::isfinite(out);
}

inline Rect bounding_box(std::span<const Point> pts) {
  if (pts.empty()) return {};
  Rect r{pts[0].x, pts[0].y, pts[0].x, pts[0].y};
  for (const Point& p : pts) {
    r.x_lo = std::min(r.x_lo, p.x);
    r.y_lo = std::min(r.y_lo, p.y);
    r.x_hi = std::max(r.x_hi, p.x);
    r.y_hi = std::max(r.y_hi, p.y);
  }
  r.x_hi = std::nextafter(r.x_hi, INFINITY);
  r.y_hi = std::nextafter(r.y_hi, INFINITY);
  return r;
}

}  // namespace detail

inline PointSet read_points(std::istream& in, const std::optional<Rect>& domain = std::nullopt) {
  PointSet out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const std::string_view s = detail::trim(line);
    if (s.empty() || s.front() == '#') continue;
    const auto comma = s.find(',');
    Point p;
    if (comma == std::string_view::npos || !detail::parse_real(s.substr(0, comma), p.x) ||
        !detail::parse_real(s.substr(comma + 1), p.y)) {
      throw ParseError("expected 'x,y' with two finite numbers, got '" + std::string(s) + "'",
                       lineno);
    }
    if (domain && !contains(*domain, p)) throw ParseError("point outside the domain", lineno);
    out.points.push_back(p);
  }
  if (out.points.empty()) out.warnings.push_back("dataset is empty");
  out.bbox = detail::bounding_box(out.points);
  return out;
}

inline PointSet load_points(const std::string& path, const std::optional<Rect>& domain = std::nullopt) {
  std::ifstream in(path);
  if (!in) throw InvalidParameter("cannot open point file '" + path + "'");
  return read_points(in, domain);
}

inline void write_points(std::ostream& out, std::span<const Point> pts) {
  for (const Point& p : pts) out << detail::fmt(p.x) << ',' << detail::fmt(p.y) << '\n';
}

// ---------------------------------------------------------------------------
// Synthetic data.

enum class SyntheticKind { Uniform, GaussianMixture, SkewedCorner };

inline SyntheticKind parse_synthetic_kind(const std::string& s) {
  if (s == "uniform") return SyntheticKind::Uniform;
  if (s == "gaussian" || s == "gaussian-mixture") return SyntheticKind::GaussianMixture;
  if (s == "skewed" || s == "skewed-corner") return SyntheticKind::SkewedCorner;
  throw InvalidParameter("unknown synthetic kind '" + s + "' (uniform|gaussian|skewed)");
}

// Uniform: independent uniform coordinates.
// GaussianMixture: five isotropic clusters (sd 5% of the shorter side) with
//   centres uniform over the central 80% of the domain; samples falling
//   outside are redrawn.
// SkewedCorner: x = x_lo + W u^3, y = y_lo + H v^3, dense near the lower-left corner.
inline std::vector<Point> gen_synthetic(SyntheticKind kind, std::size_t n, const Rect& domain,
                                        std::uint64_t seed) {
  if (domain.empty()) throw DegenerateRegion("gen_synthetic: empty domain");
  RandomSource src(seed);
  std::vector<Point> pts;
  pts.reserve(n);
  auto in_domain = [&](double x, double y) {
    return Point{std::min(x, std::nextafter(domain.x_hi, domain.x_lo)),
                 std::min(y, std::nextafter(domain.y_hi, domain.y_lo))};
  };
  switch (kind) {
    case SyntheticKind::Uniform:
      for (std::size_t i = 0; i < n; ++i) {
        const double x = src.uniform(domain.x_lo, domain.x_hi);
        const double y = src.uniform(domain.y_lo, domain.y_hi);
        pts.push_back({x, y});
      }
      break;
    case SyntheticKind::GaussianMixture: {
      constexpr int kClusters = 5;
      const double sd = 0.05 * std::min(domain.width(), domain.height());
      std::vector<Point> centres;
      for (int c = 0; c < kClusters; ++c) {
        centres.push_back({domain.x_lo + domain.width() * src.uniform(0.1, 0.9),
                           domain.y_lo + domain.height() * src.uniform(0.1, 0.9)});
      }
      while (pts.size() < n) {
        const Point& c = centres[src.below(kClusters)];
        const Point p{c.x + sd * src.normal(), c.y + sd * src.normal()};
        if (contains(domain, p)) pts.push_back(p);
      }
      break;
    }
    case SyntheticKind::SkewedCorner:
      for (std::size_t i = 0; i < n; ++i) {
        const double u = src.uniform();
        const double v = src.uniform();
        pts.push_back(in_domain(domain.x_lo + domain.width() * u * u * u,
                                domain.y_lo + domain.height() * v * v * v));
      }
      break;
  }
  return pts;
}

// ---------------------------------------------------------------------------
// Workloads.

struct QueryShape {
  double width = 1.0;
  double height = 1.0;

  std::string label() const { return detail::fmt(width) + "x" + detail::fmt(height); }
};

// "WxH" or "W,H".
inline QueryShape parse_shape(const std::string& s) {
  const auto sep = s.find_first_of("x,");
  QueryShape q;
  if (sep == std::string::npos || !detail::parse_real(std::string_view(s).substr(0, sep), q.width) ||
      !detail::parse_real(std::string_view(s).substr(sep + 1), q.height) || !(q.width > 0.0) ||
      !(q.height > 0.0)) {
    throw InvalidParameter("query shape must look like 'WxH' with positive sizes, got '" + s + "'");
  }
  return q;
}

struct WorkloadQuery {
  std::size_t id = 0;
  std::string shape;
  Rect rect;
};

struct Workload {
  std::vector<WorkloadQuery> queries;
};

inline constexpr std::size_t kMaxPlacementTries = 100000;

// Places rectangles of each shape uniformly inside the domain and keeps those
// with a non-zero true answer. Shapes wider than the domain are clipped to it.
inline Workload gen_workload(std::span<const QueryShape> shapes, std::size_t per_shape,
                             const Rect& domain, std::span<const Point> points, RandomSource& src) {
  if (points.empty()) throw InvalidParameter("gen_workload: no points to query");
  Workload w;
  for (const QueryShape& shape : shapes) {
    const double qw = std::min(shape.width, domain.width());
    const double qh = std::min(shape.height, domain.height());
    for (std::size_t k = 0; k < per_shape; ++k) {
      bool placed = false;
      for (std::size_t attempt = 0; attempt < kMaxPlacementTries && !placed; ++attempt) {
        const double x = domain.x_lo + (domain.width() - qw) * src.uniform();
        const double y = domain.y_lo + (domain.height() - qh) * src.uniform();
        const Rect r{x, y, std::min(domain.x_hi, x + qw), std::min(domain.y_hi, y + qh)};
        if (true_answer(points, r) > 0) {
          w.queries.push_back({w.queries.size(), shape.label(), r});
          placed = true;
        }
      }
      if (!placed) {
        throw InvalidParameter("gen_workload: no non-empty placement of shape " + shape.label() +
                               " after " + std::to_string(kMaxPlacementTries) +
                               " tries; use larger query shapes");
      }
    }
  }
  return w;
}

inline void write_workload(std::ostream& out, const Workload& w) {
  out << "query_id,shape,x_lo,y_lo,x_hi,y_hi\n";
  for (const auto& q : w.queries) {
    out << q.id << ',' << q.shape << ',' << detail::fmt(q.rect.x_lo) << ','
        << detail::fmt(q.rect.y_lo) << ',' << detail::fmt(q.rect.x_hi) << ','
        << detail::fmt(q.rect.y_hi) << '\n';
  }
}

inline Workload read_workload(std::istream& in) {
  Workload w;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const std::string_view s = detail::trim(line);
    if (s.empty() || s.front() == '#' || s.rfind("query_id", 0) == 0) continue;
    std::vector<std::string_view> f;
    std::size_t start = 0;
    while (true) {
      const auto c = s.find(',', start);
      f.push_back(s.substr(start, c == std::string_view::npos ? c : c - start));
      if (c == std::string_view::npos) break;
      start = c + 1;
    }
    WorkloadQuery q;
    double id = 0.0;
    if (f.size() != 6 || !detail::parse_real(f[0], id) || !detail::parse_real(f[2], q.rect.x_lo) ||
        !detail::parse_real(f[3], q.rect.y_lo) || !detail::parse_real(f[4], q.rect.x_hi) ||
        !detail::parse_real(f[5], q.rect.y_hi) || !q.rect.valid()) {
      throw ParseError("expected 'query_id,shape,x_lo,y_lo,x_hi,y_hi'", lineno);
    }
    q.id = static_cast<std::size_t>(id);
    q.shape = std::string(detail::trim(f[1]));
    w.queries.push_back(q);
  }
  return w;
}

// ---------------------------------------------------------------------------
// Experiments.

struct ExperimentSpec {
  Rect domain;
  TreeKind kind = TreeKind::Quadtree;
  int height = 8;
  double epsilon = 1.0;
  std::string strategy = "geometric";  // uniform|geometric|leaf|skip|custom
  double count_share = 0.7;
  std::set<int> skip_levels;
  std::vector<double> custom_weights;
  int switch_level = -1;  // hybrid; negative means floor(h/2)
  MedianMechanism mechanism;
  int hilbert_order = 18;
  bool postprocess = true;
  std::optional<double> prune_threshold = 32.0;
  std::uint64_t seed = 0;
  int trials = 1;
  bool noiseless = false;  // test hook: all Laplace draws are zero

  int effective_switch_level() const { return switch_level < 0 ? height / 2 : switch_level; }

  void validate() const {
    if (!(epsilon > 0.0)) throw InvalidParameter("experiment: epsilon must be > 0");
    if (height < 0) throw InvalidParameter("experiment: height must be >= 0");
    if (trials < 1) throw InvalidParameter("experiment: trials must be >= 1");
    if (domain.empty()) throw DegenerateRegion("experiment: empty domain");
  }
};

inline CountStrategy parse_count_strategy(const std::string& name, const std::set<int>& skip,
                                          const std::vector<double>& weights) {
  if (name == "uniform") return UniformCounts{};
  if (name == "geometric") return GeometricCounts{};
  if (name == "leaf" || name == "leaf-only") return LeafOnlyCounts{};
  if (name == "skip") return SkipLevels{skip};
  if (name == "custom") return CustomCounts{weights};
  throw InvalidParameter("unknown budget strategy '" + name +
                         "' (uniform|geometric|leaf|skip|custom)");
}

// Quadtrees spend the whole budget on counts; data-dependent trees use
// count_share, with the median share on every internal level (or on the top
// switch_level levels of a hybrid tree).
inline BudgetPlan plan_for(const ExperimentSpec& spec) {
  const CountStrategy counts =
      parse_count_strategy(spec.strategy, spec.skip_levels, spec.custom_weights);
  switch (spec.kind) {
    case TreeKind::Quadtree:
    case TreeKind::Generic: return make_plan(spec.height, spec.epsilon, 1.0, counts);
    case TreeKind::Hybrid: {
      const int l = spec.effective_switch_level();
      return make_plan(spec.height, spec.epsilon, l == 0 ? 1.0 : spec.count_share, counts,
                       HybridTopLevels{l});
    }
    default: return make_plan(spec.height, spec.epsilon, spec.count_share, counts);
  }
}

inline BuildOptions build_options_for(const ExperimentSpec& spec) {
  BuildOptions opt;
  opt.kind = spec.kind;
  opt.height = spec.height;
  opt.switch_level = spec.kind == TreeKind::Hybrid ? spec.effective_switch_level() : 0;
  opt.plan = plan_for(spec);
  opt.mechanism = spec.mechanism;
  opt.hilbert_order = spec.hilbert_order;
  return opt;
}

inline RandomSource trial_source(const ExperimentSpec& spec, int trial) {
  const RandomSource base = spec.noiseless ? RandomSource::noiseless(spec.seed) : RandomSource(spec.seed);
  return base.derive(static_cast<std::uint64_t>(trial));
}

// Builds, audits, post-processes and prunes one trial's tree.
inline PsdTree release_tree(std::span<const Point> points, const ExperimentSpec& spec, int trial,
                            PrivacyReport* report = nullptr) {
  const BuildOptions opt = build_options_for(spec);
  PsdTree tree = build_tree(points, spec.domain, opt, trial_source(spec, trial));
  const PrivacyReport r = verify_privacy(tree);
  if (report) *report = r;
  if (spec.postprocess) {
    ols(tree);
    if (spec.prune_threshold) tree = prune(tree, *spec.prune_threshold);
  }
  return tree;
}

struct ResultRow {
  int trial = 0;
  std::size_t query_id = 0;
  std::string shape;
  Rect rect;
  std::int64_t truth = 0;
  double estimate = 0.0;
  double rel_error = 0.0;
};

struct ExperimentReport {
  std::vector<ResultRow> rows;
  std::vector<double> trial_medians;
  std::map<std::string, double> shape_medians;
  double median_rel_error = 0.0;
  PrivacyReport privacy;
};

inline double median_of(std::vector<double> v) {
  if (v.empty()) return 0.0;
  const std::size_t mid = v.size() / 2;
  std::nth_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(mid), v.end());
  const double hi = v[mid];
  if (v.size() % 2 == 1) return hi;
  const double lo = *std::max_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(mid));
  return 0.5 * (lo + hi);
}

inline ExperimentReport run_experiment(const ExperimentSpec& spec, std::span<const Point> points,
                                       const Workload& workload) {
  spec.validate();
  ExperimentReport rep;
  std::vector<std::int64_t> truth(workload.queries.size());
  for (std::size_t q = 0; q < truth.size(); ++q) {
    truth[q] = true_answer(points, workload.queries[q].rect);
  }
  const CountSource counts = spec.postprocess ? CountSource::Ols : CountSource::Raw;
  for (int t = 0; t < spec.trials; ++t) {
    PrivacyReport pr;
    const PsdTree tree = release_tree(points, spec, t, &pr);
    if (t == 0) {
      rep.privacy = pr;
    } else {
      rep.privacy.epsilon = std::max(rep.privacy.epsilon, pr.epsilon);
      rep.privacy.delta = std::max(rep.privacy.delta, pr.delta);
    }
    std::vector<double> errs;
    errs.reserve(truth.size());
    for (std::size_t q = 0; q < truth.size(); ++q) {
      const auto& wq = workload.queries[q];
      const double est = answer(tree, wq.rect, counts).estimate;
      const double err = relative_error(est, static_cast<double>(truth[q]));
      rep.rows.push_back({t, wq.id, wq.shape, wq.rect, truth[q], est, err});
      errs.push_back(err);
    }
    rep.trial_medians.push_back(median_of(errs));
  }
  std::map<std::string, std::vector<double>> by_shape;
  std::vector<double> all;
  all.reserve(rep.rows.size());
  for (const auto& r : rep.rows) {
    by_shape[r.shape].push_back(r.rel_error);
    all.push_back(r.rel_error);
  }
  for (auto& [shape, v] : by_shape) rep.shape_medians[shape] = median_of(std::move(v));
  rep.median_rel_error = median_of(std::move(all));
  return rep;
}

// Per-query rows followed by `#` footer lines with the aggregates. Contains
// no timing information, so equal inputs give equal bytes.
inline void write_report(std::ostream& out, const ExperimentReport& rep) {
  using detail::fmt;
  out << "trial,query_id,shape,x_lo,y_lo,x_hi,y_hi,true,estimate,rel_error\n";
  for (const auto& r : rep.rows) {
    out << r.trial << ',' << r.query_id << ',' << r.shape << ',' << fmt(r.rect.x_lo) << ','
        << fmt(r.rect.y_lo) << ',' << fmt(r.rect.x_hi) << ',' << fmt(r.rect.y_hi) << ','
        << r.truth << ',' << fmt(r.estimate) << ',' << fmt(r.rel_error) << '\n';
  }
  out << "# median_rel_error," << fmt(rep.median_rel_error) << '\n';
  for (std::size_t t = 0; t < rep.trial_medians.size(); ++t) {
    out << "# trial_median," << t << ',' << fmt(rep.trial_medians[t]) << '\n';
  }
  for (const auto& [shape, v] : rep.shape_medians) {
    out << "# shape_median," << shape << ',' << fmt(v) << '\n';
  }
  out << "# audit,epsilon," << fmt(rep.privacy.epsilon) << ",delta," << fmt(rep.privacy.delta)
      << '\n';
}

// Reads back the rows of write_report (footer lines are skipped).
inline std::vector<ResultRow> read_report_rows(std::istream& in) {
  std::vector<ResultRow> rows;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty() || line[0] == '#' || line.rfind("trial,", 0) == 0) continue;
    std::vector<std::string> f;
    std::stringstream ss(line);
    for (std::string tok; std::getline(ss, tok, ',');) f.push_back(tok);
    ResultRow r;
    double trial = 0, id = 0, truth = 0;
    if (f.size() != 10 || !detail::parse_real(f[0], trial) || !detail::parse_real(f[1], id) ||
        !detail::parse_real(f[3], r.rect.x_lo) || !detail::parse_real(f[4], r.rect.y_lo) ||
        !detail::parse_real(f[5], r.rect.x_hi) || !detail::parse_real(f[6], r.rect.y_hi) ||
        !detail::parse_real(f[7], truth) || !detail::parse_real(f[8], r.estimate) ||
        !detail::parse_real(f[9], r.rel_error)) {
      throw ParseError("malformed result row", lineno);
    }
    r.trial = static_cast<int>(trial);
    r.query_id = static_cast<std::size_t>(id);
    r.shape = f[2];
    r.truth = static_cast<std::int64_t>(truth);
    rows.push_back(r);
  }
  return rows;
}

}  // namespace psd
