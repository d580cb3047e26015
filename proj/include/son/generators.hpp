#pragma once

#include "son/core.hpp"

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace son {

enum class GeneratorKind {
  half_moons,
  star_shaped,
  two_cubes,
  gaussian_mixture,
  hierarchy_5x5,
  two_balls
};

std::string to_string(GeneratorKind k);

struct GeneratorSpec {
  GeneratorKind kind = GeneratorKind::half_moons;
  /// Size and shape parameters by name; missing keys take defaults.
  std::map<std::string, double> params;
  /// Noise level; empty selects the kind's default.
  std::optional<double> sigma;
  std::uint64_t seed = 0;

  double noise() const;

  double get(const std::string &key, double fallback) const;
  /// Parameter value that must be a positive integer.
  Index count(const std::string &key, Index fallback) const;
  void validate() const;
};

/// "kind" or "kind:key=value,key=value"; `sigma` (or `noise`) sets σ.
GeneratorSpec parse_generator_spec(const std::string &text,
                                   std::uint64_t seed = 0);
std::string to_string(const GeneratorSpec &spec);

struct Generated {
  DataMatrix data;
  std::vector<Index> labels;
  /// Second-level labels (hierarchy_5x5 super-clusters); empty otherwise.
  std::vector<Index> meta_labels;
};

/// Parameters and defaults:
///   half_moons        n1=20 n2=20, σ default 0.02
///   star_shaped       stars=3 arms=5 per_star=40 radius=1 core=0.3 gap=1
///   two_cubes         n1=20 n2=20 p=2 half1=0.5 half2=0.5 separation=4
///   gaussian_mixture  k=3 per=20 p=2 spread=5, σ default 1
///   hierarchy_5x5     super_gap=20 cluster_gap=6, σ default 0.5
///   two_balls         n=40 p=2 r=1.5, first ceil(n/2) points at +r·e₁
Generated generate(const GeneratorSpec &spec);

} // namespace son
