#pragma once

#include <cmath>
#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <vector>

#include <absl/container/flat_hash_map.h>
#include <absl/container/flat_hash_set.h>

#include "dlalab/geometry.hpp"
#include "dlalab/rng.hpp"

namespace dlalab {

enum class SiteTag : std::uint8_t { None = 0, Target = 1, Absorber = 2 };

/// Obstacle sites for a walk plus a multi-resolution occupancy index.
///
/// Level j (1 <= j <= kMaxLevel) stores the cells of side 2^j that lie in the
/// 3x3 cell neighbourhood of some obstacle. A walker at p whose level-j cell is
/// not blocked has the closed square of half-width 2^j around p free of
/// obstacles.
class ObstacleIndex {
 public:
  static constexpr int kMaxLevel = 14;

  ObstacleIndex();

  /// Inserts or re-tags a site. Target wins over Absorber on conflict.
  void insert(Site s, SiteTag tag);
  void insert(std::span<const Site> sites, SiteTag tag);

  SiteTag tag(Site s) const {
    auto it = tags_.find(s);
    return it == tags_.end() ? SiteTag::None : it->second;
  }
  bool contains(Site s) const { return tags_.contains(s); }
  bool empty() const { return tags_.empty(); }
  std::size_t size() const { return tags_.size(); }

  /// Largest level j <= max_level whose square of half-width 2^j around p is
  /// certified obstacle-free, or 0 if none.
  int free_level(Site p, int max_level) const;

  /// Largest |x| or |y| over obstacles (L-infinity radius), 0 when empty.
  std::int64_t linf_radius() const;
  /// Largest Euclidean norm over obstacles.
  double radius() const { return std::sqrt(static_cast<double>(max_sq_norm_)); }

 private:
  struct CellKey {
    std::int64_t x, y;
    friend bool operator==(const CellKey&, const CellKey&) = default;
    template <typename H>
    friend H AbslHashValue(H h, const CellKey& c) {
      return H::combine(std::move(h), c.x, c.y);
    }
  };

  absl::flat_hash_map<Site, SiteTag> tags_;
  std::vector<absl::flat_hash_set<CellKey>> blocked_;  // index = level
  Box bbox_;
  std::int64_t max_sq_norm_ = 0;
};

/// Exact exit distribution of simple random walk started at the centre of
/// the square [-h, h]^2, on the sites with max(|dx|, |dy|) == h. Corners are
/// never the first exit site, so each side carries a law over the offsets
/// -h+1 .. h-1, identical on all four sides by symmetry.
class SquareExitLaw {
 public:
  explicit SquareExitLaw(std::int64_t halfwidth);

  std::int64_t halfwidth() const { return h_; }
  /// Probability of exiting at offset t on one fixed side (0 for |t| >= h).
  double side_probability(std::int64_t offset) const;
  /// Probability of exiting at the site `centre + d` (d on the square boundary).
  double probability(Site d) const;
  /// Sum over all boundary sites.
  double total_mass() const;
  /// Draws an exit displacement.
  Site sample(RngStream& rng) const;

 private:
  std::int64_t h_;
  std::vector<double> side_;  // side_[i] for offset i - h + 1
  std::vector<double> cdf_;   // normalised cumulative of side_
};

/// Cached exit law for half-width 2^level, 1 <= level <= ObstacleIndex::kMaxLevel.
const SquareExitLaw& square_exit_law_for_level(int level);
/// square_exit_law(halfwidth): any halfwidth >= 1; cached for powers of two.
std::shared_ptr<const SquareExitLaw> square_exit_law(std::int64_t halfwidth);

struct AccelerationPolicy {
  enum class Mode { None, SquareJump };
  Mode mode = Mode::SquareJump;
  std::int64_t min_halfwidth = 2;
  std::int64_t max_halfwidth = std::int64_t{1} << ObstacleIndex::kMaxLevel;

  static AccelerationPolicy none() { return {Mode::None, 0, 0}; }
  static AccelerationPolicy square_jump(std::int64_t min_hw = 2,
                                        std::int64_t max_hw = std::int64_t{1} << 14) {
    return {Mode::SquareJump, min_hw, max_hw};
  }
};

enum class LaunchDistribution { UniformOnRing, ExactHarmonicFromInfinity };

struct LaunchSpec {
  std::int64_t radius = 1;
  LaunchDistribution distribution = LaunchDistribution::UniformOnRing;
};

/// Outer vertex boundary of the open ball B(0, r): sites z with |z| >= r
/// having a neighbour strictly inside. Sorted by angle.
std::vector<Site> ball_outer_ring(std::int64_t radius);

/// Largest ring radius for which ExactHarmonicFromInfinity is supported.
inline constexpr std::int64_t kMaxExactLaunchRadius = 32;

/// Materialised launch ring: sites sorted by polar angle and, for the exact
/// option, their harmonic-measure-from-infinity weights.
class LaunchRing {
 public:
  /// Throws std::invalid_argument for radius < 1, std::runtime_error
  /// ("unsupported") for exact launch above kMaxExactLaunchRadius.
  static std::shared_ptr<const LaunchRing> get(const LaunchSpec& spec);

  LaunchRing(const LaunchSpec& spec, std::vector<Site> sites, std::vector<double> weights);

  const LaunchSpec& spec() const { return spec_; }
  std::int64_t radius() const { return spec_.radius; }
  const std::vector<Site>& sites() const { return sites_; }
  /// Launch probabilities aligned with sites().
  const std::vector<double>& weights() const { return weights_; }

  Site launch(RngStream& rng) const;
  /// Re-entry site for a walker that escaped to z: the angle is drawn from
  /// the exterior Poisson kernel of the launch circle seen from z, then
  /// snapped to the nearest ring site.
  Site reenter(Site z, RngStream& rng) const;

 private:
  LaunchSpec spec_;
  std::vector<Site> sites_;
  std::vector<double> angles_;
  std::vector<double> weights_;
  std::vector<double> cdf_;
};

/// Site drawn per `spec` on the launch ring.
Site launch(const LaunchSpec& spec, RngStream& rng);

enum class ReentryMode { Off, PoissonKernel, FreshLaunch };

/// How escaping walkers are returned: once |S| exceeds escape_radius the
/// walker is placed back on `ring`.
struct Reentry {
  ReentryMode mode = ReentryMode::Off;
  std::int64_t escape_radius = 0;
  std::shared_ptr<const LaunchRing> ring;
};

struct WalkOutcome {
  enum class Kind { HitTarget, HitAbsorber, BudgetExhausted };
  Kind kind = Kind::BudgetExhausted;
  /// Last traversed edge; its head is the first obstacle site hit.
  DirectedEdge edge{};
  std::uint64_t steps = 0;  // single steps plus square jumps
  std::uint64_t jumps = 0;
  std::uint64_t reentries = 0;

  bool hit() const { return kind != Kind::BudgetExhausted; }
  Site site() const { return edge.to; }
};

inline constexpr std::uint64_t kDefaultWalkBudget = 1'000'000'000ULL;

struct WalkOptions {
  AccelerationPolicy policy{};
  std::uint64_t budget = kDefaultWalkBudget;
  Reentry reentry{};
  /// Re-checks every jump square against the obstacle list (slow; tests).
  bool verify_jumps = false;
};

/// Options for walkers launched from `ring` that re-enter it once they pass
/// escape_factor * ring radius (escape_factor <= 0 or mode Off disables).
WalkOptions walk_options_for(std::shared_ptr<const LaunchRing> ring, const AccelerationPolicy& policy,
                             std::uint64_t budget, ReentryMode mode, double escape_factor);

/// Runs SRW from `start` until it first steps onto an obstacle of `obstacles`.
/// Throws std::invalid_argument if start is an obstacle or no obstacle exists.
WalkOutcome run_to_absorption(Site start, const ObstacleIndex& obstacles,
                              const WalkOptions& options, RngStream& rng);

/// Convenience overload building the index from explicit sets.
WalkOutcome run_to_absorption(Site start, const SiteSet& target, const SiteSet& absorber,
                              const WalkOptions& options, RngStream& rng);

}  // namespace dlalab
