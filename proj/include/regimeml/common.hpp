#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <functional>
#include <limits>
#include <span>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

namespace regimeml {

inline constexpr double kPi = 3.14159265358979323846;
inline constexpr double kTwoPi = 2.0 * kPi;
inline constexpr double kNegInf = -std::numeric_limits<double>::infinity();

/// log(sum_i exp(v[i])) with max-subtraction; empty input yields -inf.
inline double log_sum_exp(std::span<const double> v) {
    double m = kNegInf;
    for (double x : v) m = std::max(m, x);
    if (!std::isfinite(m)) return m;
    double s = 0.0;
    for (double x : v) s += std::exp(x - m);
    return m + std::log(s);
}

inline double log_sum_exp(double a, double b) {
    if (a == kNegInf) return b;
    if (b == kNegInf) return a;
    double m = std::max(a, b);
    return m + std::log(std::exp(a - m) + std::exp(b - m));
}

/// Wrap an angle into [0, 2*pi).
inline double wrap_angle(double w) {
    double x = std::fmod(w, kTwoPi);
    if (x < 0.0) x += kTwoPi;
    return x;
}

/// Running mean/variance accumulator (Welford). Variance is the unbiased
/// sample variance; undefined (returns NaN) for fewer than two samples.
class RunningStat {
  public:
    void add(double x) {
        ++n_;
        double d = x - mean_;
        mean_ += d / static_cast<double>(n_);
        m2_ += d * (x - mean_);
    }
    std::int64_t count() const { return n_; }
    double mean() const { return mean_; }
    double variance() const {
        if (n_ < 2) return std::numeric_limits<double>::quiet_NaN();
        return m2_ / static_cast<double>(n_ - 1);
    }

  private:
    std::int64_t n_ = 0;
    double mean_ = 0.0;
    double m2_ = 0.0;
};

/// Worker count for parallel sections: hardware concurrency, capped by the
/// REGIMEML_THREADS environment variable when it is set to a positive value.
inline int worker_count() {
    int hw = static_cast<int>(std::thread::hardware_concurrency());
    if (hw < 1) hw = 1;
    if (const char* env = std::getenv("REGIMEML_THREADS")) {
        char* end = nullptr;
        long cap = std::strtol(env, &end, 10);
        if (end != env && cap > 0) hw = std::min<long>(hw, cap);
    }
    return hw;
}

/// Run fn(i) for i in [0, count) across worker threads. Exceptions from
/// workers are rethrown (first one wins). fn must be safe to call
/// concurrently for distinct i.
inline void parallel_for(std::int64_t count, const std::function<void(std::int64_t)>& fn) {
    int workers = std::min<std::int64_t>(worker_count(), count);
    if (workers <= 1) {
        for (std::int64_t i = 0; i < count; ++i) fn(i);
        return;
    }
    std::vector<std::thread> pool;
    std::vector<std::exception_ptr> errors(static_cast<std::size_t>(workers));
    for (int w = 0; w < workers; ++w) {
        pool.emplace_back([&, w] {
            try {
                for (std::int64_t i = w; i < count; i += workers) fn(i);
            } catch (...) {
                errors[static_cast<std::size_t>(w)] = std::current_exception();
            }
        });
    }
    for (auto& t : pool) t.join();
    for (auto& e : errors)
        if (e) std::rethrow_exception(e);
}

}  // namespace regimeml
