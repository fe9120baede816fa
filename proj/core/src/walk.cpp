#include "dlalab/walk.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <map>
#include <mutex>
#include <numbers>
#include <numeric>
#include <stdexcept>

#include <fftw3.h>

#include "dlalab/harmonic.hpp"

namespace dlalab {

// ---------------------------------------------------------------------------
// ObstacleIndex

ObstacleIndex::ObstacleIndex() : blocked_(kMaxLevel + 1) {}

void ObstacleIndex::insert(Site s, SiteTag tag) {
  if (tag == SiteTag::None) return;
  auto [it, inserted] = tags_.try_emplace(s, tag);
  if (!inserted) {
    if (tag == SiteTag::Target) it->second = SiteTag::Target;
    return;
  }
  if (tags_.size() == 1) {
    bbox_ = {s.x, s.x, s.y, s.y};
  } else {
    bbox_.xmin = std::min(bbox_.xmin, s.x);
    bbox_.xmax = std::max(bbox_.xmax, s.x);
    bbox_.ymin = std::min(bbox_.ymin, s.y);
    bbox_.ymax = std::max(bbox_.ymax, s.y);
  }
  max_sq_norm_ = std::max(max_sq_norm_, squared_norm(s));
  for (int level = 1; level <= kMaxLevel; ++level) {
    const std::int64_t cx = s.x >> level;
    const std::int64_t cy = s.y >> level;
    auto& cells = blocked_[static_cast<std::size_t>(level)];
    for (std::int64_t dx = -1; dx <= 1; ++dx) {
      for (std::int64_t dy = -1; dy <= 1; ++dy) cells.insert({cx + dx, cy + dy});
    }
  }
}

void ObstacleIndex::insert(std::span<const Site> sites, SiteTag tag) {
  for (const Site& s : sites) insert(s, tag);
}

int ObstacleIndex::free_level(Site p, int max_level) const {
  max_level = std::min(max_level, kMaxLevel);
  if (tags_.empty()) return max_level;
  const std::int64_t dx = std::max({bbox_.xmin - p.x, p.x - bbox_.xmax, std::int64_t{0}});
  const std::int64_t dy = std::max({bbox_.ymin - p.y, p.y - bbox_.ymax, std::int64_t{0}});
  const std::int64_t d = std::max(dx, dy);
  int level = 0;
  // A square of half-width 2^j stays clear of the bounding box when 2^j < d.
  while (level < max_level && (std::int64_t{1} << (level + 1)) < d) ++level;
  while (level < max_level) {
    const int next = level + 1;
    if (blocked_[static_cast<std::size_t>(next)].contains(CellKey{p.x >> next, p.y >> next})) break;
    level = next;
  }
  return level;
}

std::int64_t ObstacleIndex::linf_radius() const {
  if (tags_.empty()) return 0;
  return std::max({std::abs(bbox_.xmin), std::abs(bbox_.xmax), std::abs(bbox_.ymin),
                   std::abs(bbox_.ymax)});
}

// ---------------------------------------------------------------------------
// SquareExitLaw

namespace {

std::mutex& fftw_mutex() {
  static std::mutex m;
  return m;
}

// Closed form of the discrete Poisson kernel of the square: with n = 2h and
// cosh(b_k) = 2 - cos(k pi / n), the exit probability at side index i is
//   (2/n) sum_k sin(k pi i / n) sin(k pi / 2) / (2 cosh(b_k h)),
// a type-I discrete sine transform of the odd-k weights.
std::vector<double> square_side_law(std::int64_t h) {
  const std::int64_t n = 2 * h;
  const auto m = static_cast<std::size_t>(n - 1);
  std::vector<double> weights(m, 0.0);
  for (std::int64_t k = 1; k <= n - 1; k += 2) {
    const double sign = ((k - 1) / 2) % 2 == 0 ? 1.0 : -1.0;
    const double theta = static_cast<double>(k) * std::numbers::pi / static_cast<double>(n);
    const double beta = std::acosh(2.0 - std::cos(theta));
    const double x = beta * static_cast<double>(h);
    const double inv_cosh = 2.0 * std::exp(-x) / (1.0 + std::exp(-2.0 * x));
    weights[static_cast<std::size_t>(k - 1)] = sign * inv_cosh / 2.0;
  }
  std::vector<double> out(m, 0.0);
  if (m == 1) {
    out[0] = 2.0 * weights[0];
  } else {
    std::lock_guard lock(fftw_mutex());
    fftw_plan plan = fftw_plan_r2r_1d(static_cast<int>(m), weights.data(), out.data(),
                                      FFTW_RODFT00, FFTW_ESTIMATE);
    fftw_execute(plan);
    fftw_destroy_plan(plan);
  }
  for (double& v : out) v = std::max(0.0, v / static_cast<double>(n));
  return out;
}

}  // namespace

SquareExitLaw::SquareExitLaw(std::int64_t halfwidth) : h_(halfwidth) {
  if (halfwidth < 1) throw std::invalid_argument("square half-width must be >= 1");
  side_ = square_side_law(halfwidth);
  cdf_.resize(side_.size());
  std::partial_sum(side_.begin(), side_.end(), cdf_.begin());
  const double total = cdf_.back();
  for (double& c : cdf_) c /= total;
  cdf_.back() = 1.0;
}

double SquareExitLaw::side_probability(std::int64_t offset) const {
  if (offset <= -h_ || offset >= h_) return 0.0;
  return side_[static_cast<std::size_t>(offset + h_ - 1)];
}

double SquareExitLaw::probability(Site d) const {
  const std::int64_t ax = std::abs(d.x);
  const std::int64_t ay = std::abs(d.y);
  if (std::max(ax, ay) != h_ || ax == ay) return 0.0;
  return ax == h_ ? side_probability(d.y) : side_probability(d.x);
}

double SquareExitLaw::total_mass() const {
  // Kahan-free pairwise would be overkill; side_ entries are all positive.
  return 4.0 * std::accumulate(side_.begin(), side_.end(), 0.0);
}

Site SquareExitLaw::sample(RngStream& rng) const {
  const unsigned side = rng.two_bits();
  const double u = rng.uniform01();
  const auto idx = static_cast<std::int64_t>(std::upper_bound(cdf_.begin(), cdf_.end(), u) -
                                             cdf_.begin());
  const std::int64_t t = std::min<std::int64_t>(idx, static_cast<std::int64_t>(cdf_.size()) - 1) -
                         (h_ - 1);
  switch (side) {
    case 0: return {h_, t};
    case 1: return {t, h_};
    case 2: return {-h_, t};
    default: return {t, -h_};
  }
}

const SquareExitLaw& square_exit_law_for_level(int level) {
  static const std::vector<SquareExitLaw> laws = [] {
    std::vector<SquareExitLaw> v;
    v.reserve(ObstacleIndex::kMaxLevel + 1);
    v.emplace_back(1);
    for (int j = 1; j <= ObstacleIndex::kMaxLevel; ++j) v.emplace_back(std::int64_t{1} << j);
    return v;
  }();
  if (level < 0 || level > ObstacleIndex::kMaxLevel) {
    throw std::out_of_range("square exit level out of range");
  }
  return laws[static_cast<std::size_t>(level)];
}

std::shared_ptr<const SquareExitLaw> square_exit_law(std::int64_t halfwidth) {
  static std::mutex mutex;
  static std::map<std::int64_t, std::shared_ptr<const SquareExitLaw>> cache;
  if (halfwidth < 1) throw std::invalid_argument("square half-width must be >= 1");
  std::lock_guard lock(mutex);
  auto& slot = cache[halfwidth];
  if (!slot) slot = std::make_shared<const SquareExitLaw>(halfwidth);
  return slot;
}

// ---------------------------------------------------------------------------
// Launch ring

std::vector<Site> ball_outer_ring(std::int64_t radius) {
  if (radius < 1) throw std::invalid_argument("launch radius must be >= 1");
  const std::int64_t r2 = radius * radius;
  std::vector<Site> ring;
  for (std::int64_t x = -radius - 1; x <= radius + 1; ++x) {
    for (std::int64_t y = -radius - 1; y <= radius + 1; ++y) {
      const Site s{x, y};
      if (squared_norm(s) < r2) continue;
      for (const Site& n : neighbors(s)) {
        if (squared_norm(n) < r2) {
          ring.push_back(s);
          break;
        }
      }
    }
  }
  std::sort(ring.begin(), ring.end(), [](const Site& a, const Site& b) {
    const double ta = std::atan2(static_cast<double>(a.y), static_cast<double>(a.x));
    const double tb = std::atan2(static_cast<double>(b.y), static_cast<double>(b.x));
    if (ta != tb) return ta < tb;
    return a < b;
  });
  return ring;
}

LaunchRing::LaunchRing(const LaunchSpec& spec, std::vector<Site> sites, std::vector<double> weights)
    : spec_(spec), sites_(std::move(sites)), weights_(std::move(weights)) {
  angles_.reserve(sites_.size());
  for (const Site& s : sites_) {
    angles_.push_back(std::atan2(static_cast<double>(s.y), static_cast<double>(s.x)));
  }
  if (weights_.empty()) {
    weights_.assign(sites_.size(), 1.0 / static_cast<double>(sites_.size()));
  }
  if (weights_.size() != sites_.size()) throw std::invalid_argument("ring weight size mismatch");
  cdf_.resize(weights_.size());
  std::partial_sum(weights_.begin(), weights_.end(), cdf_.begin());
  const double total = cdf_.back();
  for (double& c : cdf_) c /= total;
  cdf_.back() = 1.0;
}

std::shared_ptr<const LaunchRing> LaunchRing::get(const LaunchSpec& spec) {
  if (spec.radius < 1) throw std::invalid_argument("launch radius must be >= 1");
  if (spec.distribution == LaunchDistribution::ExactHarmonicFromInfinity &&
      spec.radius > kMaxExactLaunchRadius) {
    throw std::runtime_error("unsupported: exact harmonic launch radius " +
                             std::to_string(spec.radius) + " exceeds solver limit " +
                             std::to_string(kMaxExactLaunchRadius));
  }
  static std::mutex mutex;
  static std::map<std::pair<std::int64_t, int>, std::shared_ptr<const LaunchRing>> cache;
  const auto key = std::make_pair(spec.radius, static_cast<int>(spec.distribution));
  {
    std::lock_guard lock(mutex);
    if (auto it = cache.find(key); it != cache.end()) return it->second;
  }
  std::vector<Site> sites = ball_outer_ring(spec.radius);
  std::vector<double> weights;
  if (spec.distribution == LaunchDistribution::ExactHarmonicFromInfinity) {
    weights = ring_harmonic_from_infinity(spec.radius, sites);
  }
  auto ring = std::make_shared<const LaunchRing>(spec, std::move(sites), std::move(weights));
  std::lock_guard lock(mutex);
  auto [it, inserted] = cache.emplace(key, ring);
  return it->second;
}

Site LaunchRing::launch(RngStream& rng) const {
  if (spec_.distribution == LaunchDistribution::UniformOnRing) {
    return sites_[rng.uniform_below(sites_.size())];
  }
  const double u = rng.uniform01();
  auto idx = static_cast<std::size_t>(std::upper_bound(cdf_.begin(), cdf_.end(), u) - cdf_.begin());
  return sites_[std::min(idx, sites_.size() - 1)];
}

Site LaunchRing::reenter(Site z, RngStream& rng) const {
  const double r = norm(z);
  const double rho = static_cast<double>(spec_.radius) / r;
  const double phi = std::atan2(static_cast<double>(z.y), static_cast<double>(z.x));
  double theta = phi;
  if (rho < 1.0) {
    const double u = rng.uniform01();
    theta += 2.0 * std::atan((1.0 - rho) / (1.0 + rho) * std::tan(std::numbers::pi * (u - 0.5)));
  }
  theta = std::remainder(theta, 2.0 * std::numbers::pi);
  auto it = std::lower_bound(angles_.begin(), angles_.end(), theta);
  const std::size_t n = angles_.size();
  const std::size_t hi = it == angles_.end() ? 0 : static_cast<std::size_t>(it - angles_.begin());
  const std::size_t lo = (hi + n - 1) % n;
  auto gap = [&](std::size_t i) {
    return std::abs(std::remainder(angles_[i] - theta, 2.0 * std::numbers::pi));
  };
  return gap(lo) <= gap(hi) ? sites_[lo] : sites_[hi];
}

Site launch(const LaunchSpec& spec, RngStream& rng) { return LaunchRing::get(spec)->launch(rng); }

// ---------------------------------------------------------------------------
// Absorbed walk

namespace {

int level_at_least(std::int64_t hw) {
  if (hw <= 2) return 1;
  return static_cast<int>(std::bit_width(static_cast<std::uint64_t>(hw - 1)));
}

int level_at_most(std::int64_t hw) {
  if (hw < 2) return 0;
  return std::min(ObstacleIndex::kMaxLevel,
                  static_cast<int>(std::bit_width(static_cast<std::uint64_t>(hw))) - 1);
}

void verify_square_free(const ObstacleIndex& obstacles, Site c, std::int64_t h) {
  for (std::int64_t dx = -h; dx <= h; ++dx) {
    for (std::int64_t dy = -h; dy <= h; ++dy) {
      if (obstacles.contains({c.x + dx, c.y + dy})) {
        throw std::logic_error("square jump would cross an obstacle");
      }
    }
  }
}

}  // namespace

WalkOptions walk_options_for(std::shared_ptr<const LaunchRing> ring, const AccelerationPolicy& policy,
                             std::uint64_t budget, ReentryMode mode, double escape_factor) {
  WalkOptions o;
  o.policy = policy;
  o.budget = budget;
  if (mode != ReentryMode::Off && escape_factor > 0 && ring) {
    o.reentry.mode = mode;
    o.reentry.escape_radius = static_cast<std::int64_t>(
        std::ceil(escape_factor * static_cast<double>(ring->radius())));
    o.reentry.ring = std::move(ring);
  }
  return o;
}

WalkOutcome run_to_absorption(Site start, const ObstacleIndex& obstacles,
                              const WalkOptions& options, RngStream& rng) {
  if (obstacles.empty()) throw std::invalid_argument("walk needs a nonempty target/absorber");
  if (obstacles.contains(start)) throw std::invalid_argument("walk start lies on an obstacle");

  const bool accelerate = options.policy.mode == AccelerationPolicy::Mode::SquareJump;
  const int min_level = accelerate ? level_at_least(options.policy.min_halfwidth) : 1;
  const int max_level = accelerate ? level_at_most(options.policy.max_halfwidth) : 0;
  const Reentry& reentry = options.reentry;
  const bool reenter = reentry.mode != ReentryMode::Off && reentry.ring != nullptr;
  const std::int64_t escape2 = reentry.escape_radius * reentry.escape_radius;

  WalkOutcome out;
  Site pos = start;
  auto maybe_reenter = [&] {
    if (!reenter || squared_norm(pos) <= escape2) return;
    pos = reentry.mode == ReentryMode::PoissonKernel ? reentry.ring->reenter(pos, rng)
                                                     : reentry.ring->launch(rng);
    ++out.reentries;
    if (obstacles.contains(pos)) {
      throw std::logic_error("re-entry ring intersects the obstacle set");
    }
  };

  while (out.steps < options.budget) {
    if (accelerate && max_level >= min_level) {
      const int level = obstacles.free_level(pos, max_level);
      if (level >= min_level) {
        if (options.verify_jumps) verify_square_free(obstacles, pos, std::int64_t{1} << level);
        pos = pos + square_exit_law_for_level(level).sample(rng);
        ++out.steps;
        ++out.jumps;
        maybe_reenter();
        continue;
      }
    }
    const Site next = pos + kUnitSteps[rng.two_bits()];
    ++out.steps;
    const SiteTag tag = obstacles.tag(next);
    if (tag != SiteTag::None) {
      out.edge = {pos, next};
      out.kind = tag == SiteTag::Target ? WalkOutcome::Kind::HitTarget
                                        : WalkOutcome::Kind::HitAbsorber;
      return out;
    }
    pos = next;
    maybe_reenter();
  }
  out.kind = WalkOutcome::Kind::BudgetExhausted;
  return out;
}

WalkOutcome run_to_absorption(Site start, const SiteSet& target, const SiteSet& absorber,
                              const WalkOptions& options, RngStream& rng) {
  ObstacleIndex index;
  for (const Site& s : sorted_sites(absorber)) index.insert(s, SiteTag::Absorber);
  for (const Site& s : sorted_sites(target)) index.insert(s, SiteTag::Target);
  return run_to_absorption(start, index, options, rng);
}

}  // namespace dlalab
