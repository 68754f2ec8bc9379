#pragma once

#include "liouville/config.hpp"
#include "liouville/controls.hpp"
#include "liouville/optimizer.hpp"

#include <string>
#include <vector>

namespace liouville {

// Field library. Declared constants hold on all of R^n unless noted.

/// v = u (state and control dimension n).
ControlledField translation_field(int n, double control_bound);
/// v = (-x2, x1) + gain * u with u ∈ R^2.
ControlledField rotation_field(double gain, double control_bound);
/// v = 0 with a control of dimension m.
ControlledField zero_field(int n, int m);
/// v = a x + u.
ControlledField affine_field(int n, double a, double control_bound);
/// v = (-x1 + u1, -x2 + u2 + c sin x1), U ⊂ [-1,1]^2.
ControlAffineField uncertain_field(double coupling);
/// v = e^{-|x-u|} (x - u): sheep flee a dog at position u.
ControlledField flock_field();
/// Double integrator x' = v, v' = u.
ControlAffineField beam_field();

/// Exact signed distance of the box |x_i| <= half_i with corners rounded by `corner`.
TargetSet rounded_box(const Vec& center, const Vec& half_widths, double corner);

/// Smooth bump probability density centred at `center` with radius `radius`.
AnalyticDensity bump_density(const Vec& center, double radius);

std::vector<std::string> scenario_names();
/// Built-in defaults for a named scenario (throws ValidationError for unknown names).
Config default_config(const std::string& scenario);
/// Defaults of cfg's scenario overlaid with every key of cfg.
Config resolve_config(const Config& cfg);

struct Scenario {
  Config config;  // resolved
  Problem problem;
  std::uint64_t seed = 0;
};

/// Validates the resolved configuration and assembles the problem.
Scenario build_scenario(const Config& cfg);

}  // namespace liouville
