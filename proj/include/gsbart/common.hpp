#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <random>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

namespace gsbart {

// Thrown for bad user input (files, schemas, configs, argument contracts).
// The CLI maps this to exit code 1; everything else maps to exit code 2.
class ValidationError : public std::runtime_error {
  public:
    explicit ValidationError(const std::string& msg) : std::runtime_error(msg) {}
};

inline constexpr double kNegInf = -std::numeric_limits<double>::infinity();

// ------------------------------- RNG ----------------------------------------

// All stochastic operations take an explicit Rng (or a seed from which one is
// derived), so identical inputs + seed give identical outputs.
class Rng {
  public:
    explicit Rng(std::uint64_t seed) : gen_(seed) {}

    std::uint64_t next_u64() { return gen_(); }

    double uniform() { return std::uniform_real_distribution<double>(0.0, 1.0)(gen_); }

    double uniform(double lo, double hi) {
        return std::uniform_real_distribution<double>(lo, hi)(gen_);
    }

    // Uniform integer in [0, n).
    std::size_t uniform_index(std::size_t n) {
        return std::uniform_int_distribution<std::size_t>(0, n - 1)(gen_);
    }

    double normal(double mean, double sd) {
        return std::normal_distribution<double>(mean, sd)(gen_);
    }

    double gamma(double shape, double scale) {
        return std::gamma_distribution<double>(shape, scale)(gen_);
    }

    // Inverse-gamma with the (shape, scale) convention: mean = scale/(shape-1).
    double inv_gamma(double shape, double scale) {
        return 1.0 / gamma(shape, 1.0 / scale);
    }

    std::mt19937_64& engine() { return gen_; }

  private:
    std::mt19937_64 gen_;
};

// Deterministically derive an independent stream from (seed, salt...).
// splitmix64 finalizer; good enough to decorrelate seeds for mt19937_64.
inline std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t a, std::uint64_t b = 0,
                                 std::uint64_t c = 0) {
    auto mix = [](std::uint64_t z) {
        z += 0x9e3779b97f4a7c15ULL;
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return z ^ (z >> 31);
    };
    return mix(mix(mix(mix(seed) ^ a) ^ b) ^ c);
}

// --------------------------- numeric helpers --------------------------------

// log(sum(exp(x))) with max-shift; -inf entries contribute nothing.
inline double log_sum_exp(const std::vector<double>& x) {
    double m = kNegInf;
    for (double v : x) m = std::max(m, v);
    if (!std::isfinite(m)) return kNegInf;
    double s = 0.0;
    for (double v : x)
        if (std::isfinite(v)) s += std::exp(v - m);
    return m + std::log(s);
}

// Sample an index with probability exp(logw[i]) / sum_j exp(logw[j]).
// Entries equal to -inf have probability zero.
inline std::size_t sample_log_weights(const std::vector<double>& logw, Rng& rng) {
    double m = kNegInf;
    for (double v : logw) m = std::max(m, v);
    if (!std::isfinite(m)) throw std::runtime_error("sample_log_weights: all weights are zero");
    double total = 0.0;
    for (double v : logw)
        if (std::isfinite(v)) total += std::exp(v - m);
    double u = rng.uniform() * total;
    double acc = 0.0;
    std::size_t last = logw.size() - 1;
    for (std::size_t i = 0; i < logw.size(); ++i) {
        if (!std::isfinite(logw[i])) continue;
        acc += std::exp(logw[i] - m);
        last = i;
        if (u <= acc) return i;
    }
    return last;  // guard against roundoff at the upper end
}

// ------------------------------ parallel_for --------------------------------

// Runs fn(i) for i in [0, n) over `workers` threads. Tasks must write to
// disjoint state; results are then identical regardless of schedule.
inline void parallel_for(std::size_t n, unsigned workers, const std::function<void(std::size_t)>& fn) {
    if (n == 0) return;
    if (workers <= 1 || n == 1) {
        for (std::size_t i = 0; i < n; ++i) fn(i);
        return;
    }
    workers = std::min<unsigned>(workers, static_cast<unsigned>(n));
    std::vector<std::thread> pool;
    pool.reserve(workers);
    std::atomic<std::size_t> next{0};
    std::vector<std::exception_ptr> errors(workers);
    for (unsigned w = 0; w < workers; ++w) {
        pool.emplace_back([&, w] {
            try {
                for (std::size_t i = next.fetch_add(1); i < n; i = next.fetch_add(1)) fn(i);
            } catch (...) {
                errors[w] = std::current_exception();
            }
        });
    }
    for (auto& t : pool) t.join();
    for (auto& e : errors)
        if (e) std::rethrow_exception(e);
}

}  // namespace gsbart
