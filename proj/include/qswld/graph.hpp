#pragma once

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <istream>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "qswld/errors.hpp"

namespace qswld {

using RealMatrix = Eigen::MatrixXd;
using RealVector = Eigen::VectorXd;

// Damping used when the caller does not choose one.
inline constexpr double kDefaultDamping = 0.85;

// Largest node index accepted from text input.
inline constexpr std::int64_t kMaxNodeIndex = (std::int64_t{1} << 20) - 1;

/// Directed graph on nodes 0..n-1. Edges are ordered pairs (src, dst);
/// duplicates collapse, self-loops are kept.
class DirectedGraph {
 public:
  using Edge = std::pair<std::size_t, std::size_t>;

  explicit DirectedGraph(std::size_t n) : n_(n) {
    if (n == 0) throw DomainError("graph must have at least one node");
  }

  DirectedGraph(std::size_t n, const std::vector<Edge>& edges) : DirectedGraph(n) {
    for (const auto& [src, dst] : edges) add_edge(src, dst);
  }

  void add_edge(std::size_t src, std::size_t dst) {
    if (src >= n_ || dst >= n_) {
      throw RangeError("edge (" + std::to_string(src) + "," + std::to_string(dst) +
                       ") outside node range [0," + std::to_string(n_) + ")");
    }
    edges_.emplace(src, dst);
  }

  std::size_t size() const noexcept { return n_; }
  const std::set<Edge>& edges() const noexcept { return edges_; }
  bool has_edge(std::size_t src, std::size_t dst) const { return edges_.count({src, dst}) > 0; }

  std::vector<std::size_t> out_degrees() const {
    std::vector<std::size_t> deg(n_, 0);
    for (const auto& e : edges_) ++deg[e.first];
    return deg;
  }

  bool operator==(const DirectedGraph&) const = default;

 private:
  std::size_t n_;
  std::set<Edge> edges_;
};

namespace detail {

inline std::string_view trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

inline std::vector<std::string_view> split_ws(std::string_view s) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < s.size()) {
    while (i < s.size() && (s[i] == ' ' || s[i] == '\t')) ++i;
    const std::size_t start = i;
    while (i < s.size() && s[i] != ' ' && s[i] != '\t') ++i;
    if (i > start) out.push_back(s.substr(start, i - start));
  }
  return out;
}

inline std::int64_t parse_index(std::string_view tok, std::size_t line) {
  std::int64_t value = 0;
  const auto* begin = tok.data();
  const auto* end = tok.data() + tok.size();
  if (begin != end && *begin == '+') ++begin;
  const auto [ptr, ec] = std::from_chars(begin, end, value);
  if (ec == std::errc::result_out_of_range) {
    throw RangeError("line " + std::to_string(line) + ": index '" + std::string(tok) + "' overflows");
  }
  if (ec != std::errc{} || ptr != end) {
    throw ParseError(line, "expected an integer, got '" + std::string(tok) + "'");
  }
  if (value < 0) {
    throw RangeError("line " + std::to_string(line) + ": negative index " + std::to_string(value));
  }
  if (value > kMaxNodeIndex) {
    throw RangeError("line " + std::to_string(line) + ": index " + std::to_string(value) +
                     " exceeds limit " + std::to_string(kMaxNodeIndex));
  }
  return value;
}

}  // namespace detail

/// Parses the edge-list text format: one "src dst" pair per line, '#' starts a
/// comment line, and an optional leading "n <count>" line fixes the node count.
/// Without it the count is one past the largest index seen.
inline DirectedGraph parse_edge_list(std::istream& in) {
  std::optional<std::int64_t> declared;
  std::vector<DirectedGraph::Edge> edges;
  std::int64_t max_index = -1;
  bool seen_content = false;
  std::string raw;
  std::size_t line_no = 0;
  while (std::getline(in, raw)) {
    ++line_no;
    const auto line = detail::trim(raw);
    if (line.empty() || line.front() == '#') continue;
    const auto tokens = detail::split_ws(line);
    if (tokens.size() != 2) {
      throw ParseError(line_no, "expected two fields, got " + std::to_string(tokens.size()));
    }
    if (tokens[0] == "n") {
      if (seen_content) throw ParseError(line_no, "node-count line must come first");
      const auto count = detail::parse_index(tokens[1], line_no);
      if (count == 0) throw ParseError(line_no, "node count must be positive");
      declared = count;
      seen_content = true;
      continue;
    }
    seen_content = true;
    const auto src = detail::parse_index(tokens[0], line_no);
    const auto dst = detail::parse_index(tokens[1], line_no);
    if (declared && (src >= *declared || dst >= *declared)) {
      throw RangeError("line " + std::to_string(line_no) + ": edge (" + std::to_string(src) + "," +
                       std::to_string(dst) + ") exceeds declared node count " +
                       std::to_string(*declared));
    }
    max_index = std::max({max_index, src, dst});
    edges.emplace_back(static_cast<std::size_t>(src), static_cast<std::size_t>(dst));
  }
  const std::int64_t n = declared ? *declared : max_index + 1;
  if (n <= 0) throw ParseError(line_no, "empty graph: no edges and no node-count line");
  return DirectedGraph(static_cast<std::size_t>(n), edges);
}

inline DirectedGraph parse_edge_list(std::string_view text) {
  std::istringstream in{std::string(text)};
  return parse_edge_list(in);
}

// Adjacency of the graph with directions removed. Self-loops are dropped.
inline RealMatrix symmetrized_adjacency(const DirectedGraph& g) {
  const auto n = static_cast<Eigen::Index>(g.size());
  RealMatrix a = RealMatrix::Zero(n, n);
  for (const auto& [src, dst] : g.edges()) {
    if (src == dst) continue;
    a(static_cast<Eigen::Index>(src), static_cast<Eigen::Index>(dst)) = 1.0;
    a(static_cast<Eigen::Index>(dst), static_cast<Eigen::Index>(src)) = 1.0;
  }
  return a;
}

/// Column-stochastic matrix: entry (i, j) is the probability of moving from
/// node j to node i. Construction validates non-negativity and column sums.
class StochasticMatrix {
 public:
  static constexpr double kColumnSumTolerance = 1e-12;

  explicit StochasticMatrix(RealMatrix entries) : m_(std::move(entries)) {
    if (m_.rows() != m_.cols() || m_.rows() == 0) throw ShapeError("stochastic matrix must be square and non-empty");
    for (Eigen::Index j = 0; j < m_.cols(); ++j) {
      if ((m_.col(j).array() < 0.0).any() || !m_.col(j).allFinite()) {
        throw DomainError("stochastic matrix column " + std::to_string(j) + " has negative or non-finite entries");
      }
      if (std::abs(m_.col(j).sum() - 1.0) > kColumnSumTolerance) {
        throw DomainError("stochastic matrix column " + std::to_string(j) + " does not sum to 1");
      }
    }
  }

  std::size_t size() const noexcept { return static_cast<std::size_t>(m_.rows()); }
  const RealMatrix& matrix() const noexcept { return m_; }
  double operator()(std::size_t i, std::size_t j) const {
    return m_(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
  }

 private:
  RealMatrix m_;
};

/// Non-negative vector summing to one.
class ProbabilityVector {
 public:
  static constexpr double kSumTolerance = 1e-12;

  explicit ProbabilityVector(RealVector p) : p_(std::move(p)) {
    if ((p_.array() < 0.0).any() || !p_.allFinite()) throw DomainError("probability vector has negative entries");
    if (std::abs(p_.sum() - 1.0) > kSumTolerance) throw DomainError("probability vector does not sum to 1");
  }

  std::size_t size() const noexcept { return static_cast<std::size_t>(p_.size()); }
  const RealVector& vector() const noexcept { return p_; }
  double operator[](std::size_t i) const { return p_(static_cast<Eigen::Index>(i)); }

 private:
  RealVector p_;
};

/// Google matrix G = damping * S + (1 - damping)/n * J, where S normalizes
/// each node's outgoing edges and dangling nodes jump uniformly.
inline StochasticMatrix google_matrix(const DirectedGraph& g, double damping = kDefaultDamping) {
  if (!(damping > 0.0 && damping <= 1.0)) {
    throw DomainError("damping must lie in (0, 1], got " + std::to_string(damping));
  }
  const auto n = static_cast<Eigen::Index>(g.size());
  const double uniform = 1.0 / static_cast<double>(n);
  const auto deg = g.out_degrees();
  RealMatrix s = RealMatrix::Zero(n, n);
  for (const auto& [src, dst] : g.edges()) {
    s(static_cast<Eigen::Index>(dst), static_cast<Eigen::Index>(src)) = 1.0 / static_cast<double>(deg[src]);
  }
  for (Eigen::Index j = 0; j < n; ++j) {
    if (deg[static_cast<std::size_t>(j)] == 0) s.col(j).setConstant(uniform);
  }
  RealMatrix gm = damping * s;
  if (damping < 1.0) gm.array() += (1.0 - damping) * uniform;
  return StochasticMatrix(std::move(gm));
}

inline constexpr std::size_t kPagerankMaxIterations = 100000;
inline constexpr double kPagerankTolerance = 1e-12;

/// Stationary vector of G by power iteration from the uniform vector. Stops
/// once ||G pi - pi||_1 <= tol.
inline ProbabilityVector pagerank(const StochasticMatrix& g, double tol = kPagerankTolerance) {
  if (!(tol > 0.0)) throw DomainError("pagerank tolerance must be positive");
  const auto n = static_cast<Eigen::Index>(g.size());
  const RealMatrix& m = g.matrix();
  RealVector pi = RealVector::Constant(n, 1.0 / static_cast<double>(n));
  double residual = 0.0;
  for (std::size_t it = 0; it < kPagerankMaxIterations; ++it) {
    RealVector next = m * pi;
    next /= next.sum();
    residual = (m * next - next).lpNorm<1>();
    pi = std::move(next);
    if (residual <= tol) return ProbabilityVector(std::move(pi));
  }
  throw ConvergenceError("pagerank power iteration did not converge", kPagerankMaxIterations, residual);
}

}  // namespace qswld
