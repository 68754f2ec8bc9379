#include "liouville/common.hpp"

#include <algorithm>
#include <atomic>
#include <charconv>
#include <exception>
#include <functional>
#include <thread>

namespace liouville {

Vec make_vec(std::initializer_list<double> values) {
  Vec v(static_cast<Eigen::Index>(values.size()));
  Eigen::Index i = 0;
  for (double x : values) v[i++] = x;
  return v;
}

Vec to_vec(const Vec2& v) { return make_vec({v.x(), v.y()}); }

Vec2 to_vec2(const Vec& v) {
  if (v.size() != 2) throw DimensionError("expected a 2-D point, got dimension " + std::to_string(v.size()));
  return {v[0], v[1]};
}

std::string format_number(double x) {
  char buf[32];
  const auto r = std::to_chars(buf, buf + sizeof buf, x);
  return std::string(buf, r.ptr);
}

double pairwise_sum(std::span<const double> values) {
  constexpr std::size_t kLeaf = 16;
  if (values.size() <= kLeaf) {
    double s = 0.0;
    for (double v : values) s += v;
    return s;
  }
  const std::size_t half = values.size() / 2;
  return pairwise_sum(values.first(half)) + pairwise_sum(values.subspan(half));
}

namespace {
std::atomic<unsigned> g_threads{0};
thread_local bool t_inside_parallel = false;
}

void set_num_threads(unsigned n) { g_threads = n; }

unsigned num_threads() {
  unsigned n = g_threads.load();
  if (n == 0) n = std::max(1u, std::thread::hardware_concurrency());
  return n;
}

namespace detail {

void run_chunks(std::size_t n, const std::function<void(std::size_t, std::size_t)>& chunk) {
  const unsigned threads = static_cast<unsigned>(std::min<std::size_t>(num_threads(), n));
  // Nested regions run serially on the calling worker.
  if (threads <= 1 || t_inside_parallel) {
    if (n > 0) chunk(0, n);
    return;
  }
  std::vector<std::thread> pool;
  std::vector<std::exception_ptr> errors(threads);
  const std::size_t per = (n + threads - 1) / threads;
  for (unsigned t = 0; t < threads; ++t) {
    const std::size_t begin = t * per;
    const std::size_t end = std::min(n, begin + per);
    if (begin >= end) break;
    pool.emplace_back([&, t, begin, end] {
      t_inside_parallel = true;
      try {
        chunk(begin, end);
      } catch (...) {
        errors[t] = std::current_exception();
      }
    });
  }
  for (auto& th : pool) th.join();
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

}  // namespace detail
}  // namespace liouville
