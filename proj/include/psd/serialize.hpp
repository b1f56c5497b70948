#pragma once

#include <charconv>
#include <cstdint>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>
#include <string_view>
#include <system_error>
#include <vector>

#include "psd/error.hpp"
#include "psd/tree.hpp"

// Text format of a released tree (version 1). Header lines are `key values...`
// in this order:
//
//   psd-tree 1
//   kind <quadtree|kd|hybrid|hilbert|generic>
//   fanout <f>
//   height <h>
//   switch_level <l>
//   epsilon <total>
//   count_eps <e_0> ... <e_h>
//   median_eps <m_0> ... <m_h>
//   mechanism <em|ss|cell|nm|laplace> <delta> <cell_length> <sample_rate>
//   hilbert_order <k>            (0 when the tree is not a Hilbert R-tree)
//   domain <x_lo> <y_lo> <x_hi> <y_hi>
//   nodes <count>
//
// followed by one line per node in breadth-first order:
//
//   <parent> <level> <x_lo> <y_lo> <x_hi> <y_hi> <Y> <beta> <split> <s0> <s1> <s2> <h_lo> <h_hi>
//
// Absent counts are written as `-`. Reals use the shortest representation that
// reads back to the same double.
namespace psd {

namespace detail {

inline std::string fmt(double v) {
  char buf[64];
  const auto r = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, r.ptr);
}

inline std::string fmt(const std::optional<double>& v) { return v ? fmt(*v) : std::string("-"); }

inline SplitKind parse_split(const std::string& s, std::size_t line) {
  if (s == "none") return SplitKind::None;
  if (s == "mid") return SplitKind::Midpoint;
  if (s == "kd") return SplitKind::Kd;
  if (s == "hilbert") return SplitKind::Hilbert;
  throw ParseError("unknown split kind '" + s + "'", line);
}

class LineReader {
 public:
  explicit LineReader(std::istream& in) : in_(in) {}

  std::vector<std::string> next() {
    std::string text;
    if (!std::getline(in_, text)) throw ParseError("unexpected end of input", line_ + 1);
    ++line_;
    std::vector<std::string> tokens;
    std::istringstream ss(text);
    for (std::string t; ss >> t;) tokens.push_back(t);
    return tokens;
  }

  std::vector<std::string> expect(std::string_view key, std::size_t min_values) {
    auto t = next();
    if (t.empty() || t[0] != key) throw ParseError("expected '" + std::string(key) + "'", line_);
    if (t.size() < min_values + 1) throw ParseError("too few values for '" + t[0] + "'", line_);
    return t;
  }

  double real(const std::string& s) const {
    double v = 0.0;
    const auto r = std::from_chars(s.data(), s.data() + s.size(), v);
    if (r.ec != std::errc() || r.ptr != s.data() + s.size()) {
      throw ParseError("not a number: '" + s + "'", line_);
    }
    return v;
  }

  std::optional<double> maybe_real(const std::string& s) const {
    if (s == "-") return std::nullopt;
    return real(s);
  }

  template <class Int>
  Int integer(const std::string& s) const {
    Int v{};
    const auto r = std::from_chars(s.data(), s.data() + s.size(), v);
    if (r.ec != std::errc() || r.ptr != s.data() + s.size()) {
      throw ParseError("not an integer: '" + s + "'", line_);
    }
    return v;
  }

  std::size_t line() const { return line_; }

 private:
  std::istream& in_;
  std::size_t line_ = 0;
};

}  // namespace detail

inline void write_tree(std::ostream& out, const PsdTree& t) {
  using detail::fmt;
  out << "psd-tree 1\n";
  out << "kind " << to_string(t.kind) << "\n";
  out << "fanout " << t.fanout << "\n";
  out << "height " << t.height << "\n";
  out << "switch_level " << t.switch_level << "\n";
  out << "epsilon " << fmt(t.plan.total) << "\n";
  out << "count_eps";
  for (double e : t.plan.count_eps) out << ' ' << fmt(e);
  out << "\nmedian_eps";
  for (double e : t.plan.median_eps) out << ' ' << fmt(e);
  out << "\nmechanism " << to_string(t.mechanism.kind) << ' ' << fmt(t.mechanism.delta) << ' '
      << fmt(t.mechanism.cell_length) << ' ' << fmt(t.mechanism.sample_rate) << "\n";
  out << "hilbert_order " << t.hilbert_order << "\n";
  out << "domain " << fmt(t.domain.x_lo) << ' ' << fmt(t.domain.y_lo) << ' ' << fmt(t.domain.x_hi)
      << ' ' << fmt(t.domain.y_hi) << "\n";
  out << "nodes " << t.nodes.size() << "\n";
  for (const Node& n : t.nodes) {
    out << n.parent << ' ' << n.level << ' ' << fmt(n.region.x_lo) << ' ' << fmt(n.region.y_lo)
        << ' ' << fmt(n.region.x_hi) << ' ' << fmt(n.region.y_hi) << ' ' << fmt(n.noisy) << ' '
        << fmt(n.estimate) << ' ' << to_string(n.split) << ' ' << fmt(n.split_values[0]) << ' '
        << fmt(n.split_values[1]) << ' ' << fmt(n.split_values[2]) << ' ' << n.hilbert_lo << ' '
        << n.hilbert_hi << "\n";
  }
}

inline PsdTree read_tree(std::istream& in) {
  detail::LineReader r(in);
  const auto magic = r.next();
  if (magic.size() != 2 || magic[0] != "psd-tree" || magic[1] != "1") {
    throw ParseError("not a psd-tree version 1 file", r.line());
  }
  PsdTree t;
  t.kind = parse_tree_kind(r.expect("kind", 1)[1]);
  t.fanout = r.integer<int>(r.expect("fanout", 1)[1]);
  t.height = r.integer<int>(r.expect("height", 1)[1]);
  t.switch_level = r.integer<int>(r.expect("switch_level", 1)[1]);
  t.plan.height = t.height;
  t.plan.total = r.real(r.expect("epsilon", 1)[1]);
  const auto levels = static_cast<std::size_t>(t.height) + 1;
  for (auto* vec : {&t.plan.count_eps, &t.plan.median_eps}) {
    const auto tok = r.expect(vec == &t.plan.count_eps ? "count_eps" : "median_eps", levels);
    if (tok.size() != levels + 1) throw ParseError("expected h+1 budget entries", r.line());
    for (std::size_t i = 1; i < tok.size(); ++i) vec->push_back(r.real(tok[i]));
  }
  const auto mech = r.expect("mechanism", 4);
  t.mechanism.kind = parse_median_kind(mech[1]);
  t.mechanism.delta = r.real(mech[2]);
  t.mechanism.cell_length = r.real(mech[3]);
  t.mechanism.sample_rate = r.real(mech[4]);
  t.hilbert_order = r.integer<int>(r.expect("hilbert_order", 1)[1]);
  const auto dom = r.expect("domain", 4);
  t.domain = {r.real(dom[1]), r.real(dom[2]), r.real(dom[3]), r.real(dom[4])};
  const auto count = r.integer<std::size_t>(r.expect("nodes", 1)[1]);
  if (count == 0) throw ParseError("tree has no nodes", r.line());
  t.nodes.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    const auto f = r.next();
    if (f.size() != 14) throw ParseError("node record needs 14 fields", r.line());
    Node n;
    n.parent = r.integer<std::int64_t>(f[0]);
    n.level = r.integer<int>(f[1]);
    n.region = {r.real(f[2]), r.real(f[3]), r.real(f[4]), r.real(f[5])};
    n.noisy = r.maybe_real(f[6]);
    n.estimate = r.maybe_real(f[7]);
    n.split = detail::parse_split(f[8], r.line());
    n.split_values = {r.real(f[9]), r.real(f[10]), r.real(f[11])};
    n.hilbert_lo = r.integer<std::uint64_t>(f[12]);
    n.hilbert_hi = r.integer<std::uint64_t>(f[13]);
    const auto self = static_cast<std::int64_t>(i);
    if ((i == 0) != (n.parent < 0) || n.parent >= self) {
      throw ParseError("nodes must be breadth first with the root first", r.line());
    }
    if (n.parent >= 0) {
      Node& p = t.nodes[static_cast<std::size_t>(n.parent)];
      if (p.first_child < 0) {
        p.first_child = self;
      } else if (p.first_child + p.child_count != self) {
        throw ParseError("children of a node must be contiguous", r.line());
      }
      ++p.child_count;
    }
    t.nodes.push_back(n);
  }
  t.plan.validate();
  return t;
}

}  // namespace psd
