#pragma once

// Samplers for the size-N one-sided ensemble (exact) and for depth-r_max
// truncations of the three local limits.

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <optional>
#include <random>
#include <vector>

#include <nlohmann/json.hpp>

#include "onesided/enumeration.hpp"
#include "onesided/measures.hpp"
#include "onesided/numeric.hpp"
#include "onesided/partition.hpp"
#include "onesided/random/rng.hpp"
#include "onesided/tree.hpp"

namespace onesided {

struct SampleRecord {
  PlanarTree tree;
  bool has_tree = false;
  std::size_t r_max = 0;
  /// |D_s| for s = 0..r_max.
  std::vector<std::size_t> levels;
  /// |B_s| in edges for s = 0..r_max.
  std::vector<std::size_t> volumes;
  /// Spine vertices per depth, s = 0..r_max (limit samplers only).
  std::vector<std::size_t> spine_levels;
  /// Sizes of the branches grafted at the depth-1 spine vertex, observed
  /// within the truncation (multi-spine sampler only).
  std::vector<std::size_t> depth1_branch_sizes;

  nlohmann::json to_json() const {
    nlohmann::json j;
    if (has_tree) {
      j["code"] = tree.code();
      j["size"] = tree.size();
      j["height"] = tree.height();
    }
    j["r_max"] = r_max;
    j["levels"] = levels;
    j["volumes"] = volumes;
    if (!spine_levels.empty()) j["spine_levels"] = spine_levels;
    return j;
  }
};

// ---------------------------------------------------------------------------
// Elementary draws

/// Uniform integer in [0, n) for n > 0, by rejection on random bit strings.
inline BigInt uniform_below(const BigInt& n, Rng& rng) {
  if (n <= 0) throw Error("uniform_below: bound must be positive");
  const std::size_t bits = mpz_sizeinbase(n.backend().data(), 2);
  const std::size_t words = (bits + 63) / 64;
  std::vector<std::uint64_t> buf(words);
  const unsigned top = static_cast<unsigned>(bits % 64);
  BigInt out;
  for (;;) {
    for (auto& w : buf) w = rng();
    if (top != 0) buf.back() &= (std::uint64_t{1} << top) - 1;
    mpz_import(out.backend().data(), words, -1, sizeof(std::uint64_t), 0, 0, buf.data());
    if (out < n) return out;
  }
}

/// P(n) = 2^{-(n+1)}.
inline std::size_t critical_offspring(Rng& rng) {
  std::size_t n = 0;
  for (;;) {
    const std::uint64_t w = rng();
    const int ones = std::countr_one(w);
    n += static_cast<std::size_t>(ones);
    if (ones < 64) return n;
  }
}

/// Poisson(lambda) by sequential inversion; lambda is small here.
inline std::size_t poisson_inversion(double lambda, Rng& rng) {
  if (!(lambda >= 0) || lambda > 30) throw Error("poisson_inversion: lambda out of range");
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  const double u = unif(rng);
  double p = std::exp(-lambda), cdf = p;
  std::size_t k = 0;
  while (u > cdf) {
    ++k;
    p *= lambda / static_cast<double>(k);
    cdf += p;
    if (p == 0 && cdf < u) break;
  }
  return k;
}

/// Uniform composition of `total` into `parts` positive parts: R-1
/// distinct cut points among the total-1 gaps (Floyd's selection).
inline std::vector<std::size_t> sample_composition(std::size_t total, std::size_t parts, Rng& rng) {
  if (parts < 1 || total < parts) throw Error("sample_composition: need total >= parts >= 1");
  const std::size_t gaps = total - 1, cuts = parts - 1;
  std::vector<std::size_t> chosen;
  chosen.reserve(cuts);
  for (std::size_t j = gaps - cuts; j < gaps; ++j) {
    std::uniform_int_distribution<std::size_t> pick(0, j);
    const std::size_t t = pick(rng) + 1;  // gap index in 1..j+1
    if (std::find(chosen.begin(), chosen.end(), t) == chosen.end())
      chosen.push_back(t);
    else
      chosen.push_back(j + 1);
  }
  std::sort(chosen.begin(), chosen.end());
  std::vector<std::size_t> out;
  out.reserve(parts);
  std::size_t prev = 0;
  for (std::size_t c : chosen) {
    out.push_back(c - prev);
    prev = c;
  }
  out.push_back(total - prev);
  return out;
}

namespace detail {

inline void fill_statistics(SampleRecord& rec, const std::vector<std::size_t>& depth_count) {
  rec.levels.assign(rec.r_max + 1, 0);
  for (std::size_t s = 0; s <= rec.r_max && s < depth_count.size(); ++s) rec.levels[s] = depth_count[s];
  rec.volumes = ball_volumes(rec.levels);
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Size-N ensemble

/// Exact sampler for the one-sided size-N ensemble with weight e^{-mu h(T)}.
/// Stage one draws the height; stage two unranks a uniform one-sided tree
/// of that height using the exact count tables.
class FiniteSampler {
 public:
  FiniteSampler(double mu, std::size_t N, const CountTable& t) : mu_(mu), n_(N), t_(t) {
    if (N < 1) throw Error("FiniteSampler: N must be >= 1");
    if (N > t.n_max()) throw Error("FiniteSampler: N beyond table bound");
    // integer weights when they are exact: mu = 0 gives B, mu0 gives 2^m B
    if (mu == 0 || is_critical(mu)) {
      integer_weights_ = true;
      for (std::size_t m = 1; m <= N; ++m) {
        BigInt w = t.b(m, N);
        if (is_critical(mu)) w <<= m;
        int_weights_.push_back(w);
        int_total_ += w;
      }
    } else {
      PrecisionScope scope(256);
      const BigFloat W = partition_W(mu, N, t);
      for (std::size_t m = 1; m <= N; ++m)
        height_probs_.push_back(static_cast<double>(coupling_weight(mu, m) * BigFloat(t.b(m, N)) / W));
      height_dist_ = std::discrete_distribution<std::size_t>(height_probs_.begin(), height_probs_.end());
    }
  }

  std::size_t N() const { return n_; }
  double mu() const { return mu_; }

  std::size_t draw_height(Rng& rng) {
    if (!integer_weights_) return height_dist_(rng) + 1;
    BigInt u = uniform_below(int_total_, rng);
    for (std::size_t m = 1; m <= n_; ++m) {
      if (u < int_weights_[m - 1]) return m;
      u -= int_weights_[m - 1];
    }
    throw Error("FiniteSampler: height draw fell off the table");
  }

  /// Uniform one-sided tree of height exactly m and size N.
  PlanarTree uniform_one_sided(std::size_t m, Rng& rng) const {
    if (t_.b(m, n_) == 0) throw Error("FiniteSampler: no one-sided tree of this height and size");
    std::vector<std::vector<NodeId>> ch(1);
    ch.reserve(n_ + 1);
    one_sided(m, n_, 0, ch, rng);
    return PlanarTree(ch);
  }

  SampleRecord sample(Rng& rng) {
    SampleRecord rec;
    rec.tree = uniform_one_sided(draw_height(rng), rng);
    rec.has_tree = true;
    rec.r_max = rec.tree.height();
    rec.levels = level_sizes(rec.tree, rec.r_max);
    rec.volumes = ball_volumes(rec.levels);
    return rec;
  }

 private:
  static NodeId add_child(NodeId parent, std::vector<std::vector<NodeId>>& ch) {
    const NodeId v = static_cast<NodeId>(ch.size());
    ch.emplace_back();
    ch[parent].push_back(v);
    return v;
  }

  // One-sided tree of height m and size n hanging from `parent` by its root
  // edge. The leftmost child subtree is one-sided of height m-1 and size b,
  // the rest is a tree of height <= m and size n-b.
  void one_sided(std::size_t m, std::size_t n, NodeId parent, std::vector<std::vector<NodeId>>& ch, Rng& rng) const {
    const NodeId v = add_child(parent, ch);
    if (m == 1) return;
    BigInt u = uniform_below(t_.b(m, n), rng);
    std::size_t b = m - 1;
    for (; b < n; ++b) {
      const BigInt w = t_.a(m, n - b) * t_.b(m - 1, b);
      if (u < w) break;
      u -= w;
    }
    if (b >= n) throw Error("FiniteSampler: split draw fell off the table");
    one_sided(m - 1, b, v, ch, rng);
    forest(m, n - b - 1, v, ch, rng);
  }

  // Sequence of subtrees of height <= m-1 (each with its edge to v), total
  // size s, appended to the children of v. The number of such sequences is
  // A(m, s+1); the first subtree has size k with weight A(m-1,k) A(m,s-k+1).
  void forest(std::size_t m, std::size_t s, NodeId v, std::vector<std::vector<NodeId>>& ch, Rng& rng) const {
    while (s > 0) {
      BigInt u = uniform_below(t_.a(m, s + 1), rng);
      std::size_t k = 1;
      for (; k <= s; ++k) {
        const BigInt w = t_.a(m - 1, k) * t_.a(m, s - k + 1);
        if (u < w) break;
        u -= w;
      }
      if (k > s) throw Error("FiniteSampler: forest draw fell off the table");
      const NodeId c = add_child(v, ch);
      forest(m - 1, k - 1, c, ch, rng);
      s -= k;
    }
  }

  double mu_;
  std::size_t n_;
  const CountTable& t_;
  bool integer_weights_ = false;
  std::vector<BigInt> int_weights_;
  BigInt int_total_ = 0;
  std::vector<double> height_probs_;
  std::discrete_distribution<std::size_t> height_dist_;
};

inline SampleRecord sample_finite(double mu, std::size_t N, const CountTable& t, Rng& rng) {
  FiniteSampler s(mu, N, t);
  return s.sample(rng);
}

// ---------------------------------------------------------------------------
// Limit samplers

struct LimitOptions {
  std::size_t r_max = 16;
  bool keep_tree = true;
  /// Samples whose truncation exceeds this many nodes are discarded.
  std::size_t node_cap = 10'000'000;
};

namespace detail {

// Child lists of a truncation under construction, with depth bookkeeping.
struct Builder {
  std::vector<std::vector<NodeId>> ch;
  std::vector<std::uint32_t> depth;
  std::vector<std::size_t> depth_count;
  std::size_t cap;
  bool overflow = false;

  Builder(std::size_t r_max, std::size_t node_cap) : ch(1), depth{0}, depth_count(r_max + 1, 0), cap(node_cap) {
    depth_count[0] = 1;
  }
  NodeId add(NodeId parent) {
    const NodeId v = static_cast<NodeId>(ch.size());
    if (ch.size() >= cap) overflow = true;
    ch.emplace_back();
    depth.push_back(depth[parent] + 1);
    ++depth_count[depth.back()];
    ch[parent].push_back(v);
    return v;
  }
};

// Grows finite BGW material below the given normal vertices, truncated at
// depth r_max.
template <class Offspring>
void grow_normal(Builder& b, std::vector<NodeId> frontier, std::size_t r_max, Offspring&& offspring) {
  while (!frontier.empty() && !b.overflow) {
    const NodeId v = frontier.back();
    frontier.pop_back();
    if (b.depth[v] >= r_max) continue;
    const std::size_t n = offspring();
    for (std::size_t i = 0; i < n; ++i) frontier.push_back(b.add(v));
  }
}

inline SampleRecord finish(Builder& b, std::size_t r_max, bool keep_tree, std::vector<std::size_t> spine) {
  SampleRecord rec;
  rec.r_max = r_max;
  fill_statistics(rec, b.depth_count);
  rec.spine_levels = std::move(spine);
  if (keep_tree) {
    rec.tree = PlanarTree(b.ch);
    rec.has_tree = true;
  }
  return rec;
}

// Two-type construction: the leftmost path is special and each special
// vertex has extra normal children to the right of its special child.
template <class Offspring>
std::optional<SampleRecord> single_spine(const LimitOptions& opt, Rng& rng, Offspring&& offspring) {
  if (opt.r_max < 1) throw Error("limit sampler: r_max must be >= 1");
  Builder b(opt.r_max, opt.node_cap);
  NodeId spine = b.add(0);
  for (std::size_t s = 1; s < opt.r_max && !b.overflow; ++s) {
    const NodeId next = b.add(spine);
    const std::size_t extra = offspring();
    std::vector<NodeId> normal;
    for (std::size_t i = 0; i < extra; ++i) normal.push_back(b.add(spine));
    grow_normal(b, std::move(normal), opt.r_max, offspring);
    spine = next;
  }
  if (b.overflow) return std::nullopt;
  std::vector<std::size_t> spine_levels(opt.r_max + 1, 1);
  return finish(b, opt.r_max, opt.keep_tree, std::move(spine_levels));
}

}  // namespace detail

/// Counts samples discarded for exceeding the node cap.
struct DiscardCounter {
  std::size_t discarded = 0;
};

inline SampleRecord sample_limit_sub(double mu, const LimitOptions& opt, Rng& rng, DiscardCounter* dc = nullptr) {
  if (phase_of(mu) != Phase::Sub) throw Error("sample_limit_sub: requires mu < -ln 2");
  std::geometric_distribution<std::size_t> geo(1 - std::exp(mu));
  for (;;) {
    auto rec = detail::single_spine(opt, rng, [&] { return geo(rng); });
    if (rec) return *rec;
    if (dc) ++dc->discarded;
  }
}

inline SampleRecord sample_limit_crit(const LimitOptions& opt, Rng& rng, DiscardCounter* dc = nullptr) {
  for (;;) {
    auto rec = detail::single_spine(opt, rng, [&] { return critical_offspring(rng); });
    if (rec) return *rec;
    if (dc) ++dc->discarded;
  }
}

/// Multi-spine truncation: spine level sizes grow by Poisson(kappa)
/// increments placed by uniform positive compositions; every free sector of
/// the spine receives an independent critical BGW branch.
inline SampleRecord sample_limit_super(double mu, const LimitOptions& opt, Rng& rng, DiscardCounter* dc = nullptr) {
  if (phase_of(mu) != Phase::Super) throw Error("sample_limit_super: requires mu > -ln 2");
  if (opt.r_max < 1) throw Error("sample_limit_super: r_max must be >= 1");
  const double kappa = mu + std::numbers::ln2;
  auto offspring = [&] { return critical_offspring(rng); };
  for (;;) {
    detail::Builder b(opt.r_max, opt.node_cap);
    std::vector<std::size_t> spine_levels(opt.r_max + 1, 0);
    spine_levels[0] = 1;
    spine_levels[1] = 1;
    std::vector<NodeId> level{b.add(0)};
    std::vector<std::size_t> depth1_branches;
    for (std::size_t s = 1; s < opt.r_max && !b.overflow; ++s) {
      const std::size_t R = level.size();
      const std::size_t next_total = R + poisson_inversion(kappa, rng);
      const std::vector<std::size_t> parts = sample_composition(next_total, R, rng);
      std::vector<NodeId> next;
      next.reserve(next_total);
      for (std::size_t i = 0; i < R && !b.overflow; ++i) {
        const NodeId v = level[i];
        // sectors 1..c+1 around the c spine children; sector 1 of the
        // leftmost vertex stays empty
        for (std::size_t sector = 1; sector <= parts[i] + 1; ++sector) {
          if (!(i == 0 && sector == 1)) {
            const std::size_t before = b.ch.size();
            std::vector<NodeId> normal;
            const std::size_t n = offspring();
            for (std::size_t j = 0; j < n; ++j) normal.push_back(b.add(v));
            detail::grow_normal(b, std::move(normal), opt.r_max, offspring);
            if (s == 1) depth1_branches.push_back(1 + b.ch.size() - before);
          }
          if (sector <= parts[i]) next.push_back(b.add(v));
        }
      }
      level.swap(next);
      spine_levels[s + 1] = level.size();
    }
    if (b.overflow) {
      if (dc) ++dc->discarded;
      continue;
    }
    SampleRecord rec = detail::finish(b, opt.r_max, opt.keep_tree, std::move(spine_levels));
    rec.depth1_branch_sizes = std::move(depth1_branches);
    return rec;
  }
}

/// Limit sampler for the phase of mu.
inline SampleRecord sample_limit(double mu, const LimitOptions& opt, Rng& rng, DiscardCounter* dc = nullptr) {
  switch (phase_of(mu)) {
    case Phase::Sub: return sample_limit_sub(mu, opt, rng, dc);
    case Phase::Crit: return sample_limit_crit(opt, rng, dc);
    case Phase::Super: return sample_limit_super(mu, opt, rng, dc);
  }
  throw Error("sample_limit: unreachable");
}

/// A complete critical BGW tree (rho), or nothing if it exceeds node_cap.
inline std::optional<PlanarTree> sample_rho_tree(Rng& rng, std::size_t node_cap = 10'000'000) {
  std::vector<std::vector<NodeId>> ch(2);
  ch[0].push_back(1);
  std::vector<NodeId> frontier{1};
  while (!frontier.empty()) {
    const NodeId v = frontier.back();
    frontier.pop_back();
    const std::size_t n = critical_offspring(rng);
    for (std::size_t i = 0; i < n; ++i) {
      if (ch.size() >= node_cap) return std::nullopt;
      const NodeId c = static_cast<NodeId>(ch.size());
      ch.emplace_back();
      ch[v].push_back(c);
      frontier.push_back(c);
    }
  }
  return PlanarTree(ch);
}

}  // namespace onesided
