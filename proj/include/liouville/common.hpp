#pragma once

#include <Eigen/Dense>

#include <cstddef>
#include <functional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace liouville {

/// Largest state or control dimension supported. Vectors live on the stack.
inline constexpr int kMaxDim = 8;

using Vec = Eigen::Matrix<double, Eigen::Dynamic, 1, Eigen::ColMajor, kMaxDim, 1>;
using Mat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::ColMajor, kMaxDim, kMaxDim>;
using Vec2 = Eigen::Vector2d;

Vec make_vec(std::initializer_list<double> values);
Vec to_vec(const Vec2& v);
Vec2 to_vec2(const Vec& v);

// Error hierarchy. ValidationError maps to CLI exit code 1, NumericalError to 2.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ValidationError : public Error {
 public:
  using Error::Error;
};

class DimensionError : public ValidationError {
 public:
  using ValidationError::ValidationError;
};

/// A theorem hypothesis that the optimality machinery needs is not met.
class HypothesisError : public ValidationError {
 public:
  HypothesisError(std::string hypothesis, const std::string& detail)
      : ValidationError("hypothesis violated (" + hypothesis + "): " + detail),
        hypothesis_(std::move(hypothesis)) {}
  const std::string& hypothesis() const noexcept { return hypothesis_; }

 private:
  std::string hypothesis_;
};

class NumericalError : public Error {
 public:
  using Error::Error;
};

class QuadratureError : public NumericalError {
 public:
  QuadratureError(const std::string& what, double last, double previous)
      : NumericalError(what + " (last iterate " + std::to_string(last) + ", previous " +
                       std::to_string(previous) + ")"),
        last_(last),
        previous_(previous) {}
  double last() const noexcept { return last_; }
  double previous() const noexcept { return previous_; }

 private:
  double last_;
  double previous_;
};

class FlowError : public NumericalError {
 public:
  FlowError(const std::string& what, double escape_time)
      : NumericalError(what + " at t=" + std::to_string(escape_time)), escape_time_(escape_time) {}
  double escape_time() const noexcept { return escape_time_; }

 private:
  double escape_time_;
};

/// Axis-aligned box [lo, hi].
struct Box {
  Vec lo;
  Vec hi;

  int dim() const { return static_cast<int>(lo.size()); }
  bool empty() const { return (hi.array() < lo.array()).any(); }
  bool contains(const Vec& x) const { return (x.array() >= lo.array()).all() && (x.array() <= hi.array()).all(); }
  Box inflated(double r) const { return {(lo.array() - r).matrix(), (hi.array() + r).matrix()}; }
  Box intersect(const Box& other) const {
    return {lo.cwiseMax(other.lo), hi.cwiseMin(other.hi)};
  }
  double volume() const { return empty() ? 0.0 : (hi - lo).prod(); }
};

/// Shortest decimal text that parses back to exactly x.
std::string format_number(double x);

/// Pairwise (tree) summation with a fixed association order.
double pairwise_sum(std::span<const double> values);

/// Thread count used by parallel_for. 0 selects std::thread::hardware_concurrency().
void set_num_threads(unsigned n);
unsigned num_threads();

namespace detail {
void run_chunks(std::size_t n, const std::function<void(std::size_t, std::size_t)>& chunk);
}

/// Runs body(i) for i in [0, n). Chunks are contiguous so per-index outputs do not
/// depend on the thread count; reductions must happen afterwards via pairwise_sum.
template <class Body>
void parallel_for(std::size_t n, Body&& body) {
  detail::run_chunks(n, [&](std::size_t begin, std::size_t end) {
    for (std::size_t i = begin; i < end; ++i) body(i);
  });
}

}  // namespace liouville
