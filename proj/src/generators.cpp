#include "son/generators.hpp"

#include "son/io.hpp"
#include "son/random.hpp"

#include <cmath>
#include <sstream>

namespace son {

namespace {
constexpr double kPi = 3.141592653589793238462643383279502884;

struct KindName {
  GeneratorKind kind;
  const char *name;
  /// Space-separated parameter names.
  const char *keys;
};
constexpr KindName kKinds[] = {
    {GeneratorKind::half_moons, "half_moons", "n1 n2"},
    {GeneratorKind::star_shaped, "star_shaped",
     "stars arms per_star radius core gap"},
    {GeneratorKind::two_cubes, "two_cubes", "n1 n2 p half1 half2 separation"},
    {GeneratorKind::gaussian_mixture, "gaussian_mixture", "k per p spread"},
    {GeneratorKind::hierarchy_5x5, "hierarchy_5x5", "super_gap cluster_gap"},
    {GeneratorKind::two_balls, "two_balls", "n p r"},
};
} // namespace

std::string to_string(GeneratorKind k) {
  for (const auto &kn : kKinds)
    if (kn.kind == k)
      return kn.name;
  return "half_moons";
}

double GeneratorSpec::get(const std::string &key, double fallback) const {
  const auto it = params.find(key);
  return it == params.end() ? fallback : it->second;
}

Index GeneratorSpec::count(const std::string &key, Index fallback) const {
  const double v = get(key, static_cast<double>(fallback));
  if (!(v >= 1.0) || v != std::floor(v) || v > 1e9)
    throw InvalidArgument("generator parameter '" + key +
                          "' must be a positive integer");
  return static_cast<Index>(v);
}

double GeneratorSpec::noise() const {
  if (sigma)
    return *sigma;
  switch (kind) {
  case GeneratorKind::half_moons: return 0.02;
  case GeneratorKind::gaussian_mixture: return 1.0;
  case GeneratorKind::hierarchy_5x5: return 0.5;
  default: return 0.0;
  }
}

void GeneratorSpec::validate() const {
  if (!(noise() >= 0.0) || !std::isfinite(noise()))
    throw InvalidArgument("σ must be finite and nonnegative");
  std::string keys;
  for (const auto &kn : kKinds)
    if (kn.kind == kind)
      keys = std::string(" ") + kn.keys + " ";
  for (const auto &[key, value] : params) {
    if (keys.find(" " + key + " ") == std::string::npos)
      throw InvalidArgument("unknown parameter '" + key + "' for " +
                            to_string(kind));
    if (!std::isfinite(value))
      throw InvalidArgument("generator parameter '" + key + "' is not finite");
  }
}

GeneratorSpec parse_generator_spec(const std::string &text,
                                   std::uint64_t seed) {
  GeneratorSpec spec;
  spec.seed = seed;
  const auto colon = text.find(':');
  const std::string name = text.substr(0, colon);
  bool found = false;
  for (const auto &kn : kKinds)
    if (name == kn.name) {
      spec.kind = kn.kind;
      found = true;
    }
  if (!found)
    throw InvalidArgument("unknown generator '" + name + "'");
  if (colon == std::string::npos)
    return spec;
  std::stringstream ss(text.substr(colon + 1));
  std::string item;
  while (std::getline(ss, item, ',')) {
    const auto eq = item.find('=');
    if (eq == std::string::npos)
      throw InvalidArgument("expected key=value in '" + item + "'");
    const std::string key = item.substr(0, eq);
    const std::string raw = item.substr(eq + 1);
    std::size_t used = 0;
    double value = 0.0;
    try {
      value = std::stod(raw, &used);
    } catch (const std::exception &) {
      used = 0;
    }
    if (used == 0 || used != raw.size())
      throw InvalidArgument("bad value '" + raw + "' for '" + key + "'");
    if (key == "sigma" || key == "noise")
      spec.sigma = value;
    else if (key == "seed")
      spec.seed = static_cast<std::uint64_t>(value);
    else
      spec.params[key] = value;
  }
  spec.validate();
  return spec;
}

std::string to_string(const GeneratorSpec &spec) {
  std::string out = to_string(spec.kind) + ":";
  for (const auto &[key, value] : spec.params)
    out += key + "=" + format_double(value) + ",";
  out += "sigma=" + format_double(spec.noise());
  return out;
}

namespace {

void add_noise(Matrix &X, double sigma, std::mt19937_64 &rng) {
  if (sigma == 0.0)
    return;
  for (Index i = 0; i < X.cols(); ++i)
    for (Index d = 0; d < X.rows(); ++d)
      X(d, i) += sigma * standard_normal(rng);
}

Generated half_moons(const GeneratorSpec &spec, const RandomStreams &rs) {
  const Index n1 = spec.count("n1", 20), n2 = spec.count("n2", 20);
  Matrix X(2, n1 + n2);
  Generated g;
  for (Index a = 0; a < n1; ++a) {
    const double t = n1 > 1 ? kPi * a / static_cast<double>(n1 - 1) : 0.0;
    X.col(a) << std::cos(t), std::sin(t);
    g.labels.push_back(0);
  }
  for (Index b = 0; b < n2; ++b) {
    const double t = n2 > 1 ? kPi * b / static_cast<double>(n2 - 1) : 0.0;
    X.col(n1 + b) << 1.0 - std::cos(t), 0.5 - std::sin(t);
    g.labels.push_back(1);
  }
  auto rng = rs.stream("half_moons.noise");
  add_noise(X, spec.noise(), rng);
  g.data = DataMatrix(std::move(X));
  return g;
}

/// Uniform point in the triangle (a, b, c).
Eigen::Vector2d in_triangle(const Eigen::Vector2d &a, const Eigen::Vector2d &b,
                            const Eigen::Vector2d &c, std::mt19937_64 &rng) {
  double r1 = uniform01(rng), r2 = uniform01(rng);
  if (r1 + r2 > 1.0) {
    r1 = 1.0 - r1;
    r2 = 1.0 - r2;
  }
  return a + r1 * (b - a) + r2 * (c - a);
}

// Each star is the union of `arms` isosceles triangles. Arm k has its apex
// at distance `radius` along angle θ_k and its base between the two core
// vertices at distance `core` and angles θ_k ± π/arms, so the bases close
// up into a regular core polygon that is filled by kites to the center.
Generated star_shaped(const GeneratorSpec &spec, const RandomStreams &rs) {
  const Index stars = spec.count("stars", 3), arms = spec.count("arms", 5);
  const Index per = spec.count("per_star", 40);
  const double radius = spec.get("radius", 1.0), core = spec.get("core", 0.3);
  const double gap = spec.get("gap", 1.0);
  if (arms < 3)
    throw InvalidArgument("a star needs at least 3 arms");
  if (!(radius > core) || !(core > 0.0) || !(gap >= 0.0))
    throw InvalidArgument("star needs radius > core > 0 and gap >= 0");
  auto rng = rs.stream("star_shaped.support");
  Matrix X(2, stars * per);
  Generated g;
  const double spacing = 2.0 * radius + gap;
  for (Index s = 0; s < stars; ++s) {
    // Centers on a regular polygon (a line for two stars) with the
    // required spacing between neighbors.
    Eigen::Vector2d center(0.0, 0.0);
    if (stars == 2) {
      center << spacing * s, 0.0;
    } else if (stars > 2) {
      const double R = spacing / (2.0 * std::sin(kPi / static_cast<double>(stars)));
      const double phi = 2.0 * kPi * s / static_cast<double>(stars) + 0.5 * kPi;
      center << R * std::cos(phi), R * std::sin(phi);
    }
    for (Index k = 0; k < per; ++k) {
      const Index arm = static_cast<Index>(uniform_index(rng, static_cast<std::uint64_t>(arms)));
      const double theta = 2.0 * kPi * arm / static_cast<double>(arms) + 0.5 * kPi;
      const double half = kPi / static_cast<double>(arms);
      const Eigen::Vector2d apex =
          center + radius * Eigen::Vector2d(std::cos(theta), std::sin(theta));
      const Eigen::Vector2d left =
          center + core * Eigen::Vector2d(std::cos(theta - half), std::sin(theta - half));
      const Eigen::Vector2d right =
          center + core * Eigen::Vector2d(std::cos(theta + half), std::sin(theta + half));
      // Area-proportional choice between the arm triangle and the core kite.
      const double arm_area = 0.5 * std::abs((left - apex).x() * (right - apex).y() -
                                             (left - apex).y() * (right - apex).x());
      const double core_area = 0.5 * core * core * std::sin(2.0 * half);
      Eigen::Vector2d x;
      if (uniform01(rng) * (arm_area + core_area) < arm_area)
        x = in_triangle(apex, left, right, rng);
      else
        x = in_triangle(center, left, right, rng);
      X.col(s * per + k) = x;
      g.labels.push_back(s);
    }
  }
  auto noise = rs.stream("star_shaped.noise");
  add_noise(X, spec.noise(), noise);
  g.data = DataMatrix(std::move(X));
  return g;
}

Generated two_cubes(const GeneratorSpec &spec, const RandomStreams &rs) {
  const Index n1 = spec.count("n1", 20), n2 = spec.count("n2", 20);
  const Index p = spec.count("p", 2);
  const double h1 = spec.get("half1", 0.5), h2 = spec.get("half2", 0.5);
  const double separation = spec.get("separation", 4.0);
  if (!(h1 >= 0.0) || !(h2 >= 0.0))
    throw InvalidArgument("cube half-lengths must be nonnegative");
  auto rng = rs.stream("two_cubes.points");
  Matrix X(p, n1 + n2);
  Generated g;
  for (Index i = 0; i < n1 + n2; ++i) {
    const bool second = i >= n1;
    const double h = second ? h2 : h1;
    for (Index d = 0; d < p; ++d)
      X(d, i) = h * (2.0 * uniform01(rng) - 1.0);
    if (second)
      X(0, i) += separation;
    g.labels.push_back(second ? 1 : 0);
  }
  auto noise = rs.stream("two_cubes.noise");
  add_noise(X, spec.noise(), noise);
  g.data = DataMatrix(std::move(X));
  return g;
}

Generated gaussian_mixture(const GeneratorSpec &spec, const RandomStreams &rs) {
  const Index k = spec.count("k", 3), per = spec.count("per", 20);
  const Index p = spec.count("p", 2);
  const double spread = spec.get("spread", 5.0);
  auto centers_rng = rs.stream("gaussian_mixture.centers");
  Matrix C(p, k);
  for (Index c = 0; c < k; ++c)
    for (Index d = 0; d < p; ++d)
      C(d, c) = spread * standard_normal(centers_rng);
  auto rng = rs.stream("gaussian_mixture.noise");
  Matrix X(p, k * per);
  Generated g;
  for (Index c = 0; c < k; ++c)
    for (Index a = 0; a < per; ++a) {
      X.col(c * per + a) = C.col(c);
      g.labels.push_back(c);
    }
  add_noise(X, spec.noise(), rng);
  g.data = DataMatrix(std::move(X));
  return g;
}

// Five clusters of five points; clusters 0–1 form one super-cluster and
// clusters 2–4 the other.
Generated hierarchy_5x5(const GeneratorSpec &spec, const RandomStreams &rs) {
  const double super_gap = spec.get("super_gap", 20.0);
  const double cluster_gap = spec.get("cluster_gap", 6.0);
  const Index super_of[5] = {0, 0, 1, 1, 1};
  Matrix C(2, 5);
  C.col(0) << 0.0, 0.0;
  C.col(1) << cluster_gap, 0.0;
  for (int c = 0; c < 3; ++c) {
    const double phi = 2.0 * kPi * c / 3.0;
    // Equilateral triangle with side cluster_gap.
    const double R = cluster_gap / std::sqrt(3.0);
    C.col(2 + c) << super_gap + R * std::cos(phi), R * std::sin(phi);
  }
  auto rng = rs.stream("hierarchy_5x5.noise");
  Matrix X(2, 25);
  Generated g;
  for (Index c = 0; c < 5; ++c)
    for (Index a = 0; a < 5; ++a) {
      X.col(5 * c + a) = C.col(c);
      g.labels.push_back(c);
      g.meta_labels.push_back(super_of[c]);
    }
  add_noise(X, spec.noise(), rng);
  g.data = DataMatrix(std::move(X));
  return g;
}

Generated two_balls(const GeneratorSpec &spec, const RandomStreams &rs) {
  const Index n = spec.count("n", 40), p = spec.count("p", 2);
  const double r = spec.get("r", 1.5);
  if (!(r > 1.0))
    throw InvalidArgument("two_balls needs r > 1 so the balls are disjoint");
  auto rng = rs.stream("two_balls.points");
  Matrix X(p, n);
  Generated g;
  for (Index i = 0; i < n; ++i) {
    // First half (rounded up) in the ball at +r·e₁.
    const Index side = i < (n + 1) / 2 ? 0 : 1;
    // Uniform in the unit ball: Gaussian direction, radius U^{1/p}.
    Vector x(p);
    for (Index d = 0; d < p; ++d)
      x(d) = standard_normal(rng);
    x *= std::pow(uniform01(rng), 1.0 / static_cast<double>(p)) / x.norm();
    x(0) += side == 0 ? r : -r;
    X.col(i) = x;
    g.labels.push_back(side);
  }
  auto noise = rs.stream("two_balls.noise");
  add_noise(X, spec.noise(), noise);
  g.data = DataMatrix(std::move(X));
  return g;
}

} // namespace

Generated generate(const GeneratorSpec &spec) {
  spec.validate();
  const RandomStreams rs(spec.seed);
  switch (spec.kind) {
  case GeneratorKind::half_moons: return half_moons(spec, rs);
  case GeneratorKind::star_shaped: return star_shaped(spec, rs);
  case GeneratorKind::two_cubes: return two_cubes(spec, rs);
  case GeneratorKind::gaussian_mixture: return gaussian_mixture(spec, rs);
  case GeneratorKind::hierarchy_5x5: return hierarchy_5x5(spec, rs);
  case GeneratorKind::two_balls: return two_balls(spec, rs);
  }
  throw InvalidArgument("unknown generator kind");
}

} // namespace son
