#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include <nlohmann/json_fwd.hpp>

namespace mlsg {

/// A finitely supported multi-index (a polynomial chaos mode).
///
/// Parameter positions are 1-based. Only strictly positive degrees are
/// stored, sorted by position, so structural equality is value equality.
class MultiIndex {
 public:
  using Entry = std::pair<std::uint32_t, std::uint32_t>;  // (position, degree)

  MultiIndex() = default;

  /// Builds from a dense prefix: dense[0] is the degree of y_1.
  static MultiIndex from_dense(std::initializer_list<unsigned> dense);
  static MultiIndex from_dense(std::span<const unsigned> dense);
  /// Builds from (position, degree) pairs; zero degrees are dropped.
  static MultiIndex from_pairs(std::vector<Entry> pairs);

  unsigned operator[](std::uint32_t position) const;
  std::span<const Entry> entries() const { return entries_; }
  bool is_zero() const { return entries_.empty(); }
  unsigned total_degree() const;
  /// Largest position with a nonzero degree; 0 for the zero index.
  std::uint32_t max_position() const;

  /// Returns this + sign*e_position. Precondition for sign < 0: degree > 0.
  MultiIndex shifted(std::uint32_t position, int sign) const;

  std::string to_string() const;

  friend bool operator==(const MultiIndex&, const MultiIndex&) = default;

 private:
  std::vector<Entry> entries_;
};

/// Graded ordering: total degree first, then earlier parameters first.
/// (1) < (0,1) < (2) < (1,1) < (0,2) < ...
bool graded_less(const MultiIndex& a, const MultiIndex& b);

struct MultiIndexHash {
  std::size_t operator()(const MultiIndex& mu) const noexcept;
};

/// Ordered set of distinct multi-indices with ordinal lookup.
class IndexSet {
 public:
  IndexSet() = default;
  /// Keeps the given order; throws std::invalid_argument on duplicates.
  explicit IndexSet(std::vector<MultiIndex> members);

  /// Same members, graded order.
  static IndexSet sorted(std::vector<MultiIndex> members);

  std::size_t size() const { return members_.size(); }
  bool empty() const { return members_.empty(); }
  const MultiIndex& operator[](std::size_t i) const { return members_[i]; }
  auto begin() const { return members_.begin(); }
  auto end() const { return members_.end(); }
  const std::vector<MultiIndex>& members() const { return members_; }

  bool contains(const MultiIndex& mu) const { return lookup_.contains(mu); }
  /// Ordinal of mu, or -1.
  std::ptrdiff_t find(const MultiIndex& mu) const;

 private:
  std::vector<MultiIndex> members_;
  std::unordered_map<MultiIndex, std::size_t, MultiIndexHash> lookup_;
};

/// <y psi_n, psi_{n+1}> for Legendre polynomials orthonormal under the
/// uniform probability density on [-1, 1].
double recurrence_coeff(unsigned n);

/// Sparse symmetric parametric coupling matrix G_m restricted to rows x cols.
struct CouplingMatrix {
  struct Entry {
    std::size_t row;
    std::size_t col;
    double value;
  };
  std::uint32_t m = 0;
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<Entry> entries;  // row-major order

  double at(std::size_t r, std::size_t c) const;
};

CouplingMatrix build_coupling(std::uint32_t m, const IndexSet& rows, const IndexSet& cols);

/// Number of active parameters: the largest supported position in the set.
std::uint32_t active_dimension(const IndexSet& set);

/// Neighbouring indices of J_P restricted to positions <= M + delta_m,
/// excluding J_P itself, in graded order.
IndexSet neighbor_set(const IndexSet& jp, std::uint32_t delta_m);

void to_json(nlohmann::json& j, const MultiIndex& mu);
void from_json(const nlohmann::json& j, MultiIndex& mu);
void to_json(nlohmann::json& j, const IndexSet& set);
void from_json(const nlohmann::json& j, IndexSet& set);

}  // namespace mlsg
