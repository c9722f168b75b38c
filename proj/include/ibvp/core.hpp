#pragma once
// Shared small utilities: 2-vectors, deterministic RNG, ASCII number
// formatting, error types and the thread-shard helper.

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <functional>
#include <mutex>
#include <random>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

namespace ibvp {

struct Vec2 {
    double x = 0.0;
    double y = 0.0;

    Vec2() = default;
    Vec2(double x_, double y_) : x(x_), y(y_) {}

    Vec2 operator+(const Vec2& o) const { return {x + o.x, y + o.y}; }
    Vec2 operator-(const Vec2& o) const { return {x - o.x, y - o.y}; }
    Vec2 operator*(double s) const { return {x * s, y * s}; }
    double dot(const Vec2& o) const { return x * o.x + y * o.y; }
    double cross(const Vec2& o) const { return x * o.y - y * o.x; }
    double norm() const { return std::hypot(x, y); }
};

inline Vec2 operator*(double s, const Vec2& v) { return v * s; }

/// Exit-code aligned error categories (see the CLI contract).
struct validation_error : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct numeric_error : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct check_failure : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Round-trip safe ASCII rendering (17 significant digits).
inline std::string fmt17(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

/// Deterministic RNG used everywhere randomness is called for.
class Rng {
  public:
    explicit Rng(std::uint64_t seed = 20240501u) : eng_(seed) {}

    double uniform(double a = 0.0, double b = 1.0) {
        std::uniform_real_distribution<double> d(a, b);
        return d(eng_);
    }
    double normal(double mean = 0.0, double stddev = 1.0) {
        std::normal_distribution<double> d(mean, stddev);
        return d(eng_);
    }
    int uniform_int(int a, int b) {
        std::uniform_int_distribution<int> d(a, b);
        return d(eng_);
    }
    std::vector<double> normal_vector(std::size_t n, double stddev = 1.0) {
        std::vector<double> v(n);
        for (auto& e : v) e = normal(0.0, stddev);
        return v;
    }
    std::mt19937_64& engine() { return eng_; }

  private:
    std::mt19937_64 eng_;
};

/// Shard width for parallelizable loops, capped by IRREGULARBVP_THREADS.
inline unsigned shard_width() {
    unsigned hw = std::thread::hardware_concurrency();
    if (hw == 0) hw = 1;
    if (const char* env = std::getenv("IRREGULARBVP_THREADS")) {
        long cap = std::strtol(env, nullptr, 10);
        if (cap >= 1 && static_cast<unsigned>(cap) < hw) hw = static_cast<unsigned>(cap);
    }
    return hw;
}

/// Runs fn(block) for block = 0..nblocks-1, possibly on several threads.
/// Each block must accumulate into its own state; callers merge results in
/// block order so floating-point sums stay deterministic.
inline void parallel_blocks(std::size_t nblocks, const std::function<void(std::size_t)>& fn) {
    unsigned width = shard_width();
    if (width <= 1 || nblocks <= 1) {
        for (std::size_t b = 0; b < nblocks; ++b) fn(b);
        return;
    }
    std::vector<std::thread> pool;
    std::size_t next = 0;
    std::mutex* mtx = new std::mutex;  // local scope; joined below
    for (unsigned t = 0; t < width; ++t) {
        pool.emplace_back([&, mtx] {
            for (;;) {
                std::size_t mine;
                {
                    std::lock_guard<std::mutex> lk(*mtx);
                    if (next >= nblocks) return;
                    mine = next++;
                }
                fn(mine);
            }
        });
    }
    for (auto& th : pool) th.join();
    delete mtx;
}

constexpr double kPi = 3.14159265358979323846;

}  // namespace ibvp
