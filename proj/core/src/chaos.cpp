#include "mlsgfem/chaos.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <stdexcept>

#include <nlohmann/json.hpp>

namespace mlsg {

MultiIndex MultiIndex::from_dense(std::initializer_list<unsigned> dense) {
  return from_dense(std::span<const unsigned>(dense.begin(), dense.size()));
}

MultiIndex MultiIndex::from_dense(std::span<const unsigned> dense) {
  MultiIndex mu;
  for (std::size_t i = 0; i < dense.size(); ++i) {
    if (dense[i] != 0) mu.entries_.emplace_back(static_cast<std::uint32_t>(i + 1), dense[i]);
  }
  return mu;
}

MultiIndex MultiIndex::from_pairs(std::vector<Entry> pairs) {
  std::sort(pairs.begin(), pairs.end());
  MultiIndex mu;
  for (const auto& [pos, deg] : pairs) {
    if (pos == 0) throw std::invalid_argument("multi-index positions are 1-based");
    if (!mu.entries_.empty() && mu.entries_.back().first == pos)
      throw std::invalid_argument("duplicate position in multi-index");
    if (deg != 0) mu.entries_.emplace_back(pos, deg);
  }
  return mu;
}

unsigned MultiIndex::operator[](std::uint32_t position) const {
  auto it = std::lower_bound(entries_.begin(), entries_.end(), position,
                             [](const Entry& e, std::uint32_t p) { return e.first < p; });
  return (it != entries_.end() && it->first == position) ? it->second : 0U;
}

unsigned MultiIndex::total_degree() const {
  unsigned d = 0;
  for (const auto& e : entries_) d += e.second;
  return d;
}

std::uint32_t MultiIndex::max_position() const {
  return entries_.empty() ? 0U : entries_.back().first;
}

MultiIndex MultiIndex::shifted(std::uint32_t position, int sign) const {
  MultiIndex out;
  out.entries_.reserve(entries_.size() + 1);
  bool placed = false;
  for (const auto& [pos, deg] : entries_) {
    if (!placed && pos >= position) {
      placed = true;
      if (pos == position) {
        const int d = static_cast<int>(deg) + sign;
        if (d < 0) throw std::domain_error("negative degree in shifted multi-index");
        if (d > 0) out.entries_.emplace_back(pos, static_cast<std::uint32_t>(d));
        continue;
      }
      if (sign < 0) throw std::domain_error("negative degree in shifted multi-index");
      out.entries_.emplace_back(position, 1U);
    }
    out.entries_.emplace_back(pos, deg);
  }
  if (!placed) {
    if (sign < 0) throw std::domain_error("negative degree in shifted multi-index");
    out.entries_.emplace_back(position, 1U);
  }
  return out;
}

std::string MultiIndex::to_string() const {
  std::ostringstream os;
  os << '(';
  const std::uint32_t len = std::max<std::uint32_t>(1, max_position());
  for (std::uint32_t p = 1; p <= len; ++p) {
    if (p > 1) os << ' ';
    os << (*this)[p];
  }
  os << ')';
  return os.str();
}

bool graded_less(const MultiIndex& a, const MultiIndex& b) {
  const unsigned da = a.total_degree();
  const unsigned db = b.total_degree();
  if (da != db) return da < db;
  // Same degree: the index with more weight on earlier parameters first.
  auto ea = a.entries();
  auto eb = b.entries();
  std::size_t i = 0;
  for (; i < ea.size() && i < eb.size(); ++i) {
    if (ea[i].first != eb[i].first) return ea[i].first < eb[i].first;
    if (ea[i].second != eb[i].second) return ea[i].second > eb[i].second;
  }
  return false;  // equal (same degree and a common prefix exhausts both)
}

std::size_t MultiIndexHash::operator()(const MultiIndex& mu) const noexcept {
  std::size_t h = 0x9e3779b97f4a7c15ULL;
  for (const auto& [pos, deg] : mu.entries()) {
    h ^= (static_cast<std::size_t>(pos) << 20 ^ deg) + 0x9e3779b97f4a7c15ULL + (h << 6) + (h >> 2);
  }
  return h;
}

IndexSet::IndexSet(std::vector<MultiIndex> members) : members_(std::move(members)) {
  lookup_.reserve(members_.size());
  for (std::size_t i = 0; i < members_.size(); ++i) {
    if (!lookup_.emplace(members_[i], i).second)
      throw std::invalid_argument("duplicate multi-index " + members_[i].to_string());
  }
}

IndexSet IndexSet::sorted(std::vector<MultiIndex> members) {
  std::sort(members.begin(), members.end(), graded_less);
  return IndexSet(std::move(members));
}

std::ptrdiff_t IndexSet::find(const MultiIndex& mu) const {
  auto it = lookup_.find(mu);
  return it == lookup_.end() ? -1 : static_cast<std::ptrdiff_t>(it->second);
}

double recurrence_coeff(unsigned n) {
  const double k = static_cast<double>(n) + 1.0;
  return k / std::sqrt((2.0 * k - 1.0) * (2.0 * k + 1.0));
}

double CouplingMatrix::at(std::size_t r, std::size_t c) const {
  for (const auto& e : entries)
    if (e.row == r && e.col == c) return e.value;
  return 0.0;
}

CouplingMatrix build_coupling(std::uint32_t m, const IndexSet& rows, const IndexSet& cols) {
  CouplingMatrix g;
  g.m = m;
  g.rows = rows.size();
  g.cols = cols.size();
  for (std::size_t r = 0; r < rows.size(); ++r) {
    const MultiIndex& mu = rows[r];
    if (m == 0) {
      const auto c = cols.find(mu);
      if (c >= 0) g.entries.push_back({r, static_cast<std::size_t>(c), 1.0});
      continue;
    }
    const unsigned deg = mu[m];
    // Neighbours in position m: mu - e_m (if any) then mu + e_m, so the
    // column order within a row follows the degree.
    if (deg > 0) {
      const auto c = cols.find(mu.shifted(m, -1));
      if (c >= 0) g.entries.push_back({r, static_cast<std::size_t>(c), recurrence_coeff(deg - 1)});
    }
    const auto c = cols.find(mu.shifted(m, +1));
    if (c >= 0) g.entries.push_back({r, static_cast<std::size_t>(c), recurrence_coeff(deg)});
  }
  return g;
}

std::uint32_t active_dimension(const IndexSet& set) {
  std::uint32_t m = 0;
  for (const auto& mu : set) m = std::max(m, mu.max_position());
  return m;
}

IndexSet neighbor_set(const IndexSet& jp, std::uint32_t delta_m) {
  if (delta_m < 1) throw std::invalid_argument("delta_M must be >= 1");
  const std::uint32_t limit = active_dimension(jp) + delta_m;
  std::vector<MultiIndex> out;
  std::unordered_map<MultiIndex, bool, MultiIndexHash> seen;
  auto consider = [&](MultiIndex nu) {
    if (jp.contains(nu)) return;
    if (seen.emplace(nu, true).second) out.push_back(std::move(nu));
  };
  for (const auto& mu : jp) {
    for (std::uint32_t m = 1; m <= limit; ++m) {
      consider(mu.shifted(m, +1));
      if (mu[m] > 0) consider(mu.shifted(m, -1));
    }
  }
  return IndexSet::sorted(std::move(out));
}

void to_json(nlohmann::json& j, const MultiIndex& mu) {
  j = nlohmann::json::array();
  for (const auto& [pos, deg] : mu.entries()) j.push_back({pos, deg});
}

void from_json(const nlohmann::json& j, MultiIndex& mu) {
  std::vector<MultiIndex::Entry> pairs;
  for (const auto& p : j) pairs.emplace_back(p.at(0).get<std::uint32_t>(), p.at(1).get<std::uint32_t>());
  mu = MultiIndex::from_pairs(std::move(pairs));
}

void to_json(nlohmann::json& j, const IndexSet& set) {
  j = nlohmann::json::array();
  for (const auto& mu : set) j.push_back(mu);
}

void from_json(const nlohmann::json& j, IndexSet& set) {
  std::vector<MultiIndex> members;
  for (const auto& e : j) members.push_back(e.get<MultiIndex>());
  set = IndexSet(std::move(members));
}

}  // namespace mlsg
