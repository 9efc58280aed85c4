#pragma once

// Lazy i.i.d. edge weights. Every edge weight is a pure function of
// (seed, canonical edge id, distribution) and is produced on demand, so the
// lattice never has to be materialized. Finite override maps sit on top.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include <nlohmann/json.hpp>

#include "fppgeo/error.hpp"
#include "fppgeo/lattice.hpp"

namespace fppgeo {

/// SplitMix64 output finalizer.
inline constexpr std::uint64_t splitmix64(std::uint64_t z) noexcept {
  z += 0x9E3779B97F4A7C15ULL;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

/// Top 53 bits of a hash as a double in [0, 1).
inline constexpr double unit_interval(std::uint64_t h) noexcept {
  return static_cast<double>(h >> 11) * 0x1.0p-53;
}

enum class DistributionKind { kUniform, kExponential, kUniformShifted };

/// Supremum of the support; +inf for unbounded laws.
struct SupSupport {
  double value = 0.0;
  bool finite() const noexcept { return std::isfinite(value); }
};

struct DistributionSpec {
  DistributionKind kind = DistributionKind::kUniform;
  double a = 0.0;  // Uniform: lower; Exponential: rate; UniformShifted: shift
  double b = 1.0;  // Uniform: upper; UniformShifted: width

  static DistributionSpec uniform(double lo, double hi) { return checked({DistributionKind::kUniform, lo, hi}); }
  static DistributionSpec exponential(double rate) { return checked({DistributionKind::kExponential, rate, 0.0}); }
  static DistributionSpec uniform_shifted(double shift, double width) {
    return checked({DistributionKind::kUniformShifted, shift, width});
  }

  static DistributionSpec checked(DistributionSpec s) {
    s.validate();
    return s;
  }

  void validate() const {
    auto bad = [](const std::string& m) { throw Error(ErrorCode::kInvalidParameter, m); };
    if (!std::isfinite(a) || !std::isfinite(b)) bad("distribution parameters must be finite");
    switch (kind) {
      case DistributionKind::kUniform:
        if (!(a >= 0.0 && a < b)) bad("uniform requires 0 <= a < b");
        break;
      case DistributionKind::kExponential:
        if (!(a > 0.0)) bad("exponential requires rate > 0");
        break;
      case DistributionKind::kUniformShifted:
        if (!(a >= 0.0 && b > 0.0)) bad("uniform_shifted requires shift >= 0 and width > 0");
        break;
    }
  }

  double inverse_cdf(double u) const noexcept {
    switch (kind) {
      case DistributionKind::kUniform: return a + (b - a) * u;
      case DistributionKind::kExponential: return -std::log1p(-u) / a;
      case DistributionKind::kUniformShifted: return a + b * u;
    }
    return 0.0;
  }

  double cdf(double x) const noexcept {
    switch (kind) {
      case DistributionKind::kUniform: return std::clamp((x - a) / (b - a), 0.0, 1.0);
      case DistributionKind::kExponential: return x <= 0 ? 0.0 : -std::expm1(-a * x);
      case DistributionKind::kUniformShifted: return std::clamp((x - a) / b, 0.0, 1.0);
    }
    return 0.0;
  }

  double mean() const noexcept {
    switch (kind) {
      case DistributionKind::kUniform: return 0.5 * (a + b);
      case DistributionKind::kExponential: return 1.0 / a;
      case DistributionKind::kUniformShifted: return a + 0.5 * b;
    }
    return 0.0;
  }

  double variance() const noexcept {
    switch (kind) {
      case DistributionKind::kUniform: return (b - a) * (b - a) / 12.0;
      case DistributionKind::kExponential: return 1.0 / (a * a);
      case DistributionKind::kUniformShifted: return b * b / 12.0;
    }
    return 0.0;
  }

  SupSupport sup_support() const noexcept {
    switch (kind) {
      case DistributionKind::kUniform: return {b};
      case DistributionKind::kExponential: return {std::numeric_limits<double>::infinity()};
      case DistributionKind::kUniformShifted: return {a + b};
    }
    return {};
  }

  std::string kind_name() const {
    switch (kind) {
      case DistributionKind::kUniform: return "uniform";
      case DistributionKind::kExponential: return "exponential";
      case DistributionKind::kUniformShifted: return "uniform_shifted";
    }
    return "";
  }

  std::vector<double> params() const {
    if (kind == DistributionKind::kExponential) return {a};
    return {a, b};
  }

  static DistributionSpec from_kind(const std::string& kind, const std::vector<double>& p) {
    auto need = [&](size_t n) {
      if (p.size() != n)
        throw Error(ErrorCode::kInvalidParameter, kind + " expects " + std::to_string(n) + " parameter(s)");
    };
    if (kind == "uniform") {
      need(2);
      return uniform(p[0], p[1]);
    }
    if (kind == "exponential" || kind == "exp") {
      need(1);
      return exponential(p[0]);
    }
    if (kind == "uniform_shifted") {
      need(2);
      return uniform_shifted(p[0], p[1]);
    }
    throw Error(ErrorCode::kInvalidParameter, "unknown distribution kind '" + kind + "'");
  }

  /// Parses "uniform:0,1", "exp:1", "uniform_shifted:0.5,1".
  static DistributionSpec parse(const std::string& text) {
    const auto colon = text.find(':');
    if (colon == std::string::npos) throw Error(ErrorCode::kInvalidParameter, "distribution '" + text + "' lacks ':'");
    std::vector<double> params;
    std::string rest = text.substr(colon + 1);
    size_t pos = 0;
    while (pos <= rest.size()) {
      const auto comma = rest.find(',', pos);
      const std::string tok = rest.substr(pos, comma == std::string::npos ? std::string::npos : comma - pos);
      try {
        size_t used = 0;
        params.push_back(std::stod(tok, &used));
        if (used != tok.size()) throw std::invalid_argument(tok);
      } catch (const std::exception&) {
        throw Error(ErrorCode::kInvalidParameter, "bad distribution parameter '" + tok + "'");
      }
      if (comma == std::string::npos) break;
      pos = comma + 1;
    }
    return from_kind(text.substr(0, colon), params);
  }

  friend bool operator==(const DistributionSpec&, const DistributionSpec&) = default;
};

struct EdgeHash {
  size_t operator()(const UndirectedEdge& e) const noexcept {
    std::uint64_t h = static_cast<std::uint64_t>(e.axis);
    for (int i = 0; i < e.lo.dim(); ++i) h = splitmix64(h ^ static_cast<std::uint64_t>(e.lo[i]));
    return static_cast<size_t>(h);
  }
};

using OverrideMap = std::unordered_map<UndirectedEdge, double, EdgeHash>;

namespace detail {

inline constexpr Coord kCoordBias = Coord{1} << 29;

/// Canonical id: coordinates biased into 30-bit fields plus a 2-bit axis,
/// packed into 128 bits, then folded to 64.
inline std::uint64_t canonical_edge_id(const Vertex& lo, int axis) noexcept {
  unsigned __int128 packed = static_cast<unsigned>(axis) & 3u;
  for (int i = 0; i < lo.dim(); ++i) {
    packed <<= 30;
    packed |= static_cast<std::uint64_t>(lo[i] + kCoordBias) & ((std::uint64_t{1} << 30) - 1);
  }
  const auto lo64 = static_cast<std::uint64_t>(packed);
  const auto hi64 = static_cast<std::uint64_t>(packed >> 64);
  return lo64 ^ splitmix64(hi64);
}

inline Coord floor_mod(Coord a, Coord m) noexcept {
  const Coord r = a % m;
  return r < 0 ? r + m : r;
}

}  // namespace detail

class WeightEnvironment {
 public:
  WeightEnvironment(int dim, DistributionSpec spec, std::uint64_t seed) : dim_(dim), spec_(spec), seed_(seed) {
    if (dim < 2 || dim > kMaxDim)
      throw Error(ErrorCode::kInvalidParameter, "dimension must be in [2," + std::to_string(kMaxDim) + "]");
    spec_.validate();
    seed_key_ = splitmix64(seed);
  }

  int dim() const noexcept { return dim_; }
  const DistributionSpec& spec() const noexcept { return spec_; }
  std::uint64_t seed() const noexcept { return seed_; }
  const std::optional<Vertex>& torus() const noexcept { return torus_; }
  const Vertex& offset() const noexcept { return offset_; }
  size_t override_count() const noexcept { return overrides_ ? overrides_->size() : 0; }

  /// Same law and overlays with another seed.
  WeightEnvironment with_seed(std::uint64_t seed) const {
    WeightEnvironment e = *this;
    e.seed_ = seed;
    e.seed_key_ = splitmix64(seed);
    return e;
  }

  /// Periodic weights: edges are identified modulo `periods` before hashing.
  WeightEnvironment with_torus(const Vertex& periods) const {
    if (periods.dim() != dim_) throw Error(ErrorCode::kInvalidParameter, "torus periods have wrong dimension");
    for (int i = 0; i < dim_; ++i)
      if (periods[i] < 3) throw Error(ErrorCode::kInvalidParameter, "torus periods must be >= 3");
    WeightEnvironment e = *this;
    e.torus_ = periods;
    return e;
  }

  /// Environment whose weight at e equals this environment's weight at e + shift.
  WeightEnvironment translated(const Vertex& shift) const {
    WeightEnvironment e = *this;
    e.offset_ = offset_.dim() ? offset_ + shift : shift;
    return e;
  }

  /// Weight drawn from the base law only, ignoring overrides.
  double base_weight(const UndirectedEdge& e) const noexcept {
    Vertex lo = offset_.dim() ? e.lo + offset_ : e.lo;
    if (torus_) {
      for (int i = 0; i < dim_; ++i) lo[i] = detail::floor_mod(lo[i], (*torus_)[i]);
    }
    const std::uint64_t h = splitmix64(detail::canonical_edge_id(lo, e.axis) ^ seed_key_);
    return spec_.inverse_cdf(unit_interval(h));
  }

  double weight_of(const UndirectedEdge& e) const {
    if (overrides_) {
      if (auto it = overrides_->find(canonical_override_key(e)); it != overrides_->end()) return it->second;
    }
    return base_weight(e);
  }

  double weight_of(const Vertex& a, const Vertex& b) const { return weight_of(UndirectedEdge::between(a, b)); }

  /// Upward modification: t_e' = max(t_e, lambda) on `edges`.
  template <typename Range>
  WeightEnvironment with_overrides(const Range& edges, double lambda) const {
    if (!(lambda >= 0.0) || !std::isfinite(lambda))
      throw Error(ErrorCode::kInvalidParameter, "override level lambda must be finite and >= 0");
    WeightEnvironment e = *this;
    auto map = overrides_ ? std::make_shared<OverrideMap>(*overrides_) : std::make_shared<OverrideMap>();
    for (const UndirectedEdge& edge : edges) {
      const double current = weight_of(edge);
      (*map)[canonical_override_key(edge)] = std::max(current, lambda);
    }
    e.overrides_ = std::move(map);
    return e;
  }

  /// Exact weight assignment for handcrafted fixtures; values must be >= 0.
  WeightEnvironment with_weights(const std::vector<std::pair<UndirectedEdge, double>>& assignments) const {
    WeightEnvironment e = *this;
    auto map = overrides_ ? std::make_shared<OverrideMap>(*overrides_) : std::make_shared<OverrideMap>();
    for (const auto& [edge, w] : assignments) {
      if (!(w >= 0.0) || !std::isfinite(w)) throw Error(ErrorCode::kInvalidParameter, "fixture weights must be finite and >= 0");
      (*map)[canonical_override_key(edge)] = w;
    }
    e.overrides_ = std::move(map);
    return e;
  }

  /// Overrides sorted by edge, for serialization.
  std::vector<std::pair<UndirectedEdge, double>> sorted_overrides() const {
    std::vector<std::pair<UndirectedEdge, double>> out;
    if (overrides_) out.assign(overrides_->begin(), overrides_->end());
    std::sort(out.begin(), out.end(), [](const auto& x, const auto& y) { return x.first < y.first; });
    return out;
  }

 private:
  UndirectedEdge canonical_override_key(const UndirectedEdge& e) const {
    if (!torus_) return e;
    UndirectedEdge k = e;
    for (int i = 0; i < dim_; ++i) k.lo[i] = detail::floor_mod(k.lo[i], (*torus_)[i]);
    return k;
  }

  int dim_;
  DistributionSpec spec_;
  std::uint64_t seed_;
  std::uint64_t seed_key_ = 0;
  std::optional<Vertex> torus_;
  Vertex offset_;
  std::shared_ptr<const OverrideMap> overrides_;
};

/// Every edge of `box` fixed to weight w (unit-weight reference runs).
inline WeightEnvironment with_constant_weights(const WeightEnvironment& env, const Box& box, double w) {
  std::vector<std::pair<UndirectedEdge, double>> assignments;
  for (const auto& e : box_edges(box)) assignments.emplace_back(e, w);
  return env.with_weights(assignments);
}

struct GoodnessOfFitReport {
  std::int64_t n_samples = 0;
  double ks_statistic = 0.0;
  double critical_value = 0.0;
  double significance = 0.0;
  double sample_mean = 0.0;
  double expected_mean = 0.0;
  double mean_stderr = 0.0;
  bool ks_pass = false;
  bool mean_within_3sigma = false;
};

/// Kolmogorov-Smirnov test of weights on n distinct edges against the law's
/// CDF, using the asymptotic critical value sqrt(-ln(alpha/2)/2)/sqrt(n).
inline GoodnessOfFitReport empirical_distribution_check(const WeightEnvironment& env, std::int64_t n_samples,
                                                        double significance = 0.01) {
  if (n_samples < 1000) throw Error(ErrorCode::kInvalidParameter, "empirical_distribution_check needs >= 1000 samples");
  if (!(significance > 0.0 && significance < 1.0))
    throw Error(ErrorCode::kInvalidParameter, "significance must lie in (0,1)");
  // Edges along a square spiral of rows: distinct canonical ids.
  const Coord side = static_cast<Coord>(std::ceil(std::sqrt(static_cast<double>(n_samples))));
  std::vector<double> w;
  w.reserve(static_cast<size_t>(n_samples));
  for (std::int64_t k = 0; k < n_samples; ++k) {
    Vertex v(env.dim());
    v[0] = k % side;
    v[1] = k / side;
    w.push_back(env.weight_of(UndirectedEdge{v, 0}));
  }
  std::sort(w.begin(), w.end());
  GoodnessOfFitReport r;
  r.n_samples = n_samples;
  r.significance = significance;
  const double n = static_cast<double>(n_samples);
  double d = 0.0, sum = 0.0;
  for (std::int64_t i = 0; i < n_samples; ++i) {
    const double f = env.spec().cdf(w[i]);
    d = std::max({d, (static_cast<double>(i) + 1.0) / n - f, f - static_cast<double>(i) / n});
    sum += w[i];
  }
  r.ks_statistic = d;
  r.critical_value = std::sqrt(-std::log(significance / 2.0) / 2.0) / std::sqrt(n);
  r.ks_pass = d < r.critical_value;
  r.sample_mean = sum / n;
  r.expected_mean = env.spec().mean();
  r.mean_stderr = std::sqrt(env.spec().variance() / n);
  r.mean_within_3sigma = std::fabs(r.sample_mean - r.expected_mean) <= 3.0 * r.mean_stderr;
  return r;
}

// JSON config: {dim, dist:{kind, params}, seed, overrides:[{lo:[...], axis, weight}], torus?:[...]}

inline nlohmann::json to_json(const DistributionSpec& s) { return {{"kind", s.kind_name()}, {"params", s.params()}}; }

inline nlohmann::json to_json(const WeightEnvironment& env) {
  nlohmann::json j;
  j["dim"] = env.dim();
  j["dist"] = to_json(env.spec());
  j["seed"] = env.seed();
  auto ov = nlohmann::json::array();
  for (const auto& [e, w] : env.sorted_overrides()) {
    std::vector<Coord> lo(e.lo.coords().begin(), e.lo.coords().end());
    ov.push_back({{"lo", lo}, {"axis", e.axis}, {"weight", w}});
  }
  j["overrides"] = ov;
  if (env.torus()) j["torus"] = std::vector<Coord>(env.torus()->coords().begin(), env.torus()->coords().end());
  return j;
}

inline WeightEnvironment environment_from_json(const nlohmann::json& j) {
  auto key_error = [](const std::string& key, const std::string& what) {
    return Error(ErrorCode::kConfig, key + ": " + what);
  };
  try {
    const int dim = j.at("dim").get<int>();
    const auto& dist = j.at("dist");
    DistributionSpec spec;
    try {
      spec = DistributionSpec::from_kind(dist.at("kind").get<std::string>(), dist.at("params").get<std::vector<double>>());
    } catch (const Error& e) {
      throw key_error("dist", e.what());
    }
    WeightEnvironment env(dim, spec, j.at("seed").get<std::uint64_t>());
    if (j.contains("torus")) {
      const auto p = j.at("torus").get<std::vector<Coord>>();
      env = env.with_torus(Vertex::from_span(p));
    }
    if (j.contains("overrides")) {
      std::vector<std::pair<UndirectedEdge, double>> ov;
      for (const auto& o : j.at("overrides")) {
        const auto lo = o.at("lo").get<std::vector<Coord>>();
        if (static_cast<int>(lo.size()) != dim) throw key_error("overrides", "edge has wrong dimension");
        ov.push_back({UndirectedEdge{Vertex::from_span(lo), o.at("axis").get<int>()}, o.at("weight").get<double>()});
      }
      env = env.with_weights(ov);
    }
    return env;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kConfig, std::string("environment: ") + e.what());
  }
}

}  // namespace fppgeo
