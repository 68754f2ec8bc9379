#include "liouville/quadrature.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>
#include <queue>

namespace liouville {
namespace {

constexpr std::array<double, 8> kXgk = {
    0.991455371120812639206854697526329, 0.949107912342758524526189684047851, 0.864864423359769072789712788640926,
    0.741531185599394439863864773280788, 0.586087235467691130294144845693013, 0.405845151377397166906606412076961,
    0.207784955007898467600689403773245, 0.000000000000000000000000000000000};
constexpr std::array<double, 8> kWgk = {
    0.022935322010529224963732008058970, 0.063092092629978553290700663189204, 0.104790010322250183839876322541518,
    0.140653259715525918745189590510238, 0.169004726639267902826583426598550, 0.190350578064785409913256402421014,
    0.204432940075298892414161999234649, 0.209482141084727828012999174891714};
constexpr std::array<double, 4> kWg = {0.129484966168869693270611432679082, 0.279705391489276667901467771423780,
                                       0.381830050505118944950369775488975, 0.417959183673469387755102040816327};

struct Interval {
  double a, b, value, error;
  std::size_t order;
};

struct WorseFirst {
  bool operator()(const Interval& x, const Interval& y) const {
    if (x.error != y.error) return x.error < y.error;
    return x.order > y.order;
  }
};

Interval gk15(const ScalarFn1& f, double a, double b, std::size_t order) {
  const double c = 0.5 * (a + b);
  const double h = 0.5 * (b - a);
  const double fc = f(c);
  double kron = fc * kWgk[7];
  double gauss = fc * kWg[3];
  for (int j = 0; j < 7; ++j) {
    const double dx = h * kXgk[j];
    const double s = f(c - dx) + f(c + dx);
    kron += kWgk[j] * s;
    if (j % 2 == 1) gauss += kWg[j / 2] * s;
  }
  return {a, b, kron * h, std::abs((kron - gauss) * h), order};
}

// Three-point Gauss-Legendre on [-1, 1].
constexpr std::array<double, 3> kGl3x = {-0.774596669241483377035853079956, 0.0, 0.774596669241483377035853079956};
constexpr std::array<double, 3> kGl3w = {5.0 / 9.0, 8.0 / 9.0, 5.0 / 9.0};

double triangle_rule(const ScalarFnN& f, const Vec2& a, const Vec2& b, const Vec2& c) {
  const double area = 0.5 * std::abs((b - a).x() * (c - a).y() - (b - a).y() * (c - a).x());
  if (area == 0.0) return 0.0;
  // Degree-2 rule with interior points.
  const Vec2 p1 = (4.0 * a + b + c) / 6.0;
  const Vec2 p2 = (a + 4.0 * b + c) / 6.0;
  const Vec2 p3 = (a + b + 4.0 * c) / 6.0;
  return area * (f(to_vec(p1)) + f(to_vec(p2)) + f(to_vec(p3))) / 3.0;
}

// Clip a convex polygon by the half-plane {x : d + g·(x - c) <= 0}.
std::vector<Vec2> clip_half_plane(const std::vector<Vec2>& poly, double d, const Vec2& g, const Vec2& c) {
  std::vector<Vec2> out;
  const auto level = [&](const Vec2& x) { return d + g.dot(x - c); };
  for (std::size_t i = 0; i < poly.size(); ++i) {
    const Vec2& p = poly[i];
    const Vec2& q = poly[(i + 1) % poly.size()];
    const double lp = level(p);
    const double lq = level(q);
    if (lp <= 0.0) out.push_back(p);
    if ((lp < 0.0 && lq > 0.0) || (lp > 0.0 && lq < 0.0)) {
      const double s = lp / (lp - lq);
      out.push_back(p + s * (q - p));
    }
  }
  return out;
}

double cell_gauss(const ScalarFnN& f, const Vec2& lo, double sx, double sy) {
  double acc = 0.0;
  for (int i = 0; i < 3; ++i) {
    for (int j = 0; j < 3; ++j) {
      const Vec2 p{lo.x() + 0.5 * sx * (1.0 + kGl3x[i]), lo.y() + 0.5 * sy * (1.0 + kGl3x[j])};
      acc += kGl3w[i] * kGl3w[j] * f(to_vec(p));
    }
  }
  return acc * 0.25 * sx * sy;
}

double cut_cell(const ScalarFnN& f, const SignedDistanceFn& sdf, const Vec2& lo, double sx, double sy, double dc) {
  const Vec2 c = lo + 0.5 * Vec2{sx, sy};
  const double step = 1e-3 * std::min(sx, sy);
  const Vec2 ex{step, 0.0};
  const Vec2 ey{0.0, step};
  Vec2 g{(sdf(to_vec(c + ex)) - sdf(to_vec(c - ex))) / (2 * step),
         (sdf(to_vec(c + ey)) - sdf(to_vec(c - ey))) / (2 * step)};
  if (g.norm() < 1e-8) {
    return dc <= 0.0 ? cell_gauss(f, lo, sx, sy) : 0.0;
  }
  const std::vector<Vec2> square = {lo, lo + Vec2{sx, 0.0}, lo + Vec2{sx, sy}, lo + Vec2{0.0, sy}};
  const std::vector<Vec2> poly = clip_half_plane(square, dc, g, c);
  if (poly.size() < 3) return 0.0;
  double acc = 0.0;
  for (std::size_t i = 1; i + 1 < poly.size(); ++i) acc += triangle_rule(f, poly[0], poly[i], poly[i + 1]);
  return acc;
}

double wrap_pi(double a) {
  while (a > std::numbers::pi) a -= 2 * std::numbers::pi;
  while (a <= -std::numbers::pi) a += 2 * std::numbers::pi;
  return a;
}

}  // namespace

QuadratureResult gauss_kronrod(const ScalarFn1& f, double a, double b, double abs_tol, int initial_panels,
                               int max_intervals) {
  QuadratureResult res;
  if (a == b) return res;
  std::size_t evals = 0;
  std::size_t next_order = 0;
  std::priority_queue<Interval, std::vector<Interval>, WorseFirst> queue;
  double total = 0.0;
  double total_err = 0.0;
  const int panels = std::max(1, initial_panels);
  for (int i = 0; i < panels; ++i) {
    const double lo = a + (b - a) * i / panels;
    const double hi = (i + 1 == panels) ? b : a + (b - a) * (i + 1) / panels;
    Interval iv = gk15(f, lo, hi, next_order++);
    evals += 15;
    total += iv.value;
    total_err += iv.error;
    queue.push(iv);
  }
  double previous = total;
  int count = panels;
  while (total_err > abs_tol) {
    if (count >= max_intervals) {
      throw QuadratureError("Gauss-Kronrod integration did not reach tolerance", total, previous);
    }
    const Interval worst = queue.top();
    queue.pop();
    const double mid = 0.5 * (worst.a + worst.b);
    const Interval left = gk15(f, worst.a, mid, next_order++);
    const Interval right = gk15(f, mid, worst.b, next_order++);
    evals += 30;
    previous = total;
    total += left.value + right.value - worst.value;
    total_err += left.error + right.error - worst.error;
    queue.push(left);
    queue.push(right);
    ++count;
  }
  // Re-sum in positional order so the result is independent of the refinement history.
  std::vector<Interval> all;
  all.reserve(queue.size());
  while (!queue.empty()) {
    all.push_back(queue.top());
    queue.pop();
  }
  std::sort(all.begin(), all.end(), [](const Interval& x, const Interval& y) { return x.a < y.a; });
  std::vector<double> values(all.size());
  std::vector<double> errors(all.size());
  for (std::size_t i = 0; i < all.size(); ++i) {
    values[i] = all[i].value;
    errors[i] = all[i].error;
  }
  res.value = pairwise_sum(values);
  res.error = pairwise_sum(errors);
  res.evaluations = evals;
  return res;
}

QuadratureResult integrate_disk(const ScalarFnN& f, const Vec2& center, double radius, const Box& region,
                                const QuadratureOptions& opts) {
  QuadratureResult res;
  if (region.empty() || radius <= 0.0) return res;
  const Vec2 lo = to_vec2(region.lo);
  const Vec2 hi = to_vec2(region.hi);
  const Vec2 nearest = center.cwiseMax(lo).cwiseMin(hi);
  const double r_min = (nearest - center).norm();
  double far = 0.0;
  const std::array<Vec2, 4> corners = {lo, Vec2{hi.x(), lo.y()}, hi, Vec2{lo.x(), hi.y()}};
  for (const auto& c : corners) far = std::max(far, (c - center).norm());
  const double r_max = std::min(radius, far);
  if (r_min >= r_max) return res;

  double phi_lo = 0.0;
  double phi_hi = 2 * std::numbers::pi;
  int phi_panels = 16;
  if (r_min > 0.0) {
    const Vec2 mid = 0.5 * (lo + hi) - center;
    const double ref = std::atan2(mid.y(), mid.x());
    double dmin = 0.0;
    double dmax = 0.0;
    for (const auto& c : corners) {
      const Vec2 d = c - center;
      const double rel = wrap_pi(std::atan2(d.y(), d.x()) - ref);
      dmin = std::min(dmin, rel);
      dmax = std::max(dmax, rel);
    }
    phi_lo = ref + dmin;
    phi_hi = ref + dmax;
    phi_panels = 4;
  }

  const double dr = r_max - r_min;
  const double inner_tol = 0.1 * opts.abs_tol / std::max(radius * dr, 1e-300);
  const double outer_tol = 0.9 * opts.abs_tol;
  std::size_t evals = 0;
  const auto ring = [&](double r) {
    if (r == 0.0) return 0.0;
    const auto g = [&](double phi) { return f(to_vec(center + r * Vec2{std::cos(phi), std::sin(phi)})); };
    const QuadratureResult inner = gauss_kronrod(g, phi_lo, phi_hi, inner_tol, phi_panels, opts.max_intervals);
    evals += inner.evaluations;
    return r * inner.value;
  };
  QuadratureResult outer = gauss_kronrod(ring, r_min, r_max, outer_tol, 4, opts.max_intervals);
  outer.evaluations = evals;
  outer.error += 0.1 * opts.abs_tol;
  return outer;
}

QuadratureResult integrate_set_2d(const ScalarFnN& f, const SignedDistanceFn& sdf, const Box& region,
                                  const QuadratureOptions& opts) {
  QuadratureResult res;
  if (region.empty() || region.volume() == 0.0) return res;
  const Vec2 lo = to_vec2(region.lo);
  const Vec2 span = to_vec2(region.hi) - lo;
  const auto estimate = [&](int n) {
    const double sx = span.x() / n;
    const double sy = span.y() / n;
    const double half_diag = 0.5 * std::hypot(sx, sy);
    std::vector<double> cells(static_cast<std::size_t>(n) * n, 0.0);
    parallel_for(static_cast<std::size_t>(n), [&](std::size_t row) {
      for (int col = 0; col < n; ++col) {
        const Vec2 cell_lo = lo + Vec2{col * sx, static_cast<double>(row) * sy};
        const Vec2 c = cell_lo + 0.5 * Vec2{sx, sy};
        const double d = sdf(to_vec(c));
        double v = 0.0;
        if (d > half_diag) {
          v = 0.0;
        } else if (d < -half_diag) {
          v = cell_gauss(f, cell_lo, sx, sy);
        } else {
          v = cut_cell(f, sdf, cell_lo, sx, sy, d);
        }
        cells[row * n + col] = v;
      }
    });
    return pairwise_sum(cells);
  };
  int n = 8;
  double previous = estimate(n);
  for (int k = 0; k < opts.max_refinements; ++k) {
    n *= 2;
    const double current = estimate(n);
    const double diff = std::abs(current - previous);
    if (diff <= opts.abs_tol) {
      res.value = current;
      res.error = diff;
      res.evaluations = static_cast<std::size_t>(n) * n * 9;
      return res;
    }
    if (k + 1 == opts.max_refinements) {
      throw QuadratureError("cut-cell quadrature did not stabilise", current, previous);
    }
    previous = current;
  }
  throw QuadratureError("cut-cell quadrature did not stabilise", previous, previous);
}

QuadratureResult integrate_set_nd(const ScalarFnN& f, const SignedDistanceFn& sdf, const Box& region,
                                  const QuadratureOptions& opts) {
  QuadratureResult res;
  if (region.empty() || region.volume() == 0.0) return res;
  const int dim = region.dim();
  const auto estimate = [&](int n) {
    std::size_t total = 1;
    for (int d = 0; d < dim; ++d) total *= static_cast<std::size_t>(n);
    const Vec step = (region.hi - region.lo) / n;
    const double cell_volume = step.prod();
    std::vector<double> cells(total, 0.0);
    parallel_for(total, [&](std::size_t idx) {
      Vec x(dim);
      std::size_t rem = idx;
      for (int d = 0; d < dim; ++d) {
        x[d] = region.lo[d] + (static_cast<double>(rem % n) + 0.5) * step[d];
        rem /= n;
      }
      if (sdf(x) <= 1e-12) cells[idx] = f(x) * cell_volume;
    });
    return pairwise_sum(cells);
  };
  int n = 4;
  double previous = estimate(n);
  for (int k = 0; k < opts.max_refinements; ++k) {
    n *= 2;
    const double current = estimate(n);
    if (std::abs(current - previous) <= opts.abs_tol) {
      res.value = current;
      res.error = std::abs(current - previous);
      return res;
    }
    if (k + 1 == opts.max_refinements) throw QuadratureError("n-D quadrature did not stabilise", current, previous);
    previous = current;
  }
  throw QuadratureError("n-D quadrature did not stabilise", previous, previous);
}

QuadratureResult integrate_box(const ScalarFnN& f, const Box& region, const QuadratureOptions& opts) {
  QuadratureResult res;
  if (region.empty() || region.volume() == 0.0) return res;
  const int dim = region.dim();
  const auto estimate = [&](int n) {
    std::size_t cells_total = 1;
    std::size_t points_per_cell = 1;
    for (int d = 0; d < dim; ++d) {
      cells_total *= static_cast<std::size_t>(n);
      points_per_cell *= 3;
    }
    const Vec step = (region.hi - region.lo) / n;
    const double jac = step.prod() / std::pow(2.0, dim);
    std::vector<double> cells(cells_total, 0.0);
    parallel_for(cells_total, [&](std::size_t idx) {
      Vec lo(dim);
      std::size_t rem = idx;
      for (int d = 0; d < dim; ++d) {
        lo[d] = region.lo[d] + static_cast<double>(rem % n) * step[d];
        rem /= n;
      }
      double acc = 0.0;
      Vec x(dim);
      for (std::size_t p = 0; p < points_per_cell; ++p) {
        std::size_t q = p;
        double w = 1.0;
        for (int d = 0; d < dim; ++d) {
          const int k = static_cast<int>(q % 3);
          q /= 3;
          x[d] = lo[d] + 0.5 * step[d] * (1.0 + kGl3x[k]);
          w *= kGl3w[k];
        }
        acc += w * f(x);
      }
      cells[idx] = acc * jac;
    });
    return pairwise_sum(cells);
  };
  int n = 2;
  double previous = estimate(n);
  for (int k = 0; k < opts.max_refinements; ++k) {
    n *= 2;
    const double current = estimate(n);
    if (std::abs(current - previous) <= opts.abs_tol) {
      res.value = current;
      res.error = std::abs(current - previous);
      return res;
    }
    if (k + 1 == opts.max_refinements) throw QuadratureError("box quadrature did not stabilise", current, previous);
    previous = current;
  }
  throw QuadratureError("box quadrature did not stabilise", previous, previous);
}

}  // namespace liouville
