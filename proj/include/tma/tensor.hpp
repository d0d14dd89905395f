#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <random>
#include <span>
#include <string>
#include <vector>

namespace tma {

// Row-major so that embedding rows and token rows are contiguous.
using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Vector = Eigen::VectorXd;
using CVector = Eigen::VectorXcd;

/// Mutable view of one parameter tensor, flattened.
struct TensorRef {
    std::string name;
    std::span<double> values;
};
using TensorList = std::vector<TensorRef>;

template <class Derived>
TensorRef tensor_ref(std::string name, Eigen::PlainObjectBase<Derived>& t) {
    return {std::move(name), std::span<double>(t.data(), static_cast<std::size_t>(t.size()))};
}

inline void append(TensorList& into, TensorList from, const std::string& prefix) {
    for (auto& t : from) {
        into.push_back({prefix + t.name, t.values});
    }
}

inline std::size_t total_size(const TensorList& list) {
    std::size_t n = 0;
    for (const auto& t : list) n += t.values.size();
    return n;
}

inline void fill_zero(const TensorList& list) {
    for (const auto& t : list) std::fill(t.values.begin(), t.values.end(), 0.0);
}

inline bool all_finite(const TensorList& list) {
    for (const auto& t : list)
        for (double v : t.values)
            if (!std::isfinite(v)) return false;
    return true;
}

/// Seeded generator. Only the raw mt19937_64 stream is used so draws are
/// identical across standard-library implementations.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    /// Uniform in [0, 1).
    double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }
    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    /// Box-Muller; one draw per call.
    double normal() {
        double u1 = uniform();
        while (u1 <= 0.0) u1 = uniform();
        const double u2 = uniform();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
    }

    /// Uniform integer in [0, n).
    std::size_t index(std::size_t n) { return static_cast<std::size_t>(engine_() % n); }

    template <class T>
    void shuffle(std::vector<T>& v) {
        for (std::size_t i = v.size(); i > 1; --i) {
            std::swap(v[i - 1], v[index(i)]);
        }
    }

    std::uint64_t next() { return engine_(); }

private:
    std::mt19937_64 engine_;
};

template <class Derived>
void fill_uniform(Eigen::PlainObjectBase<Derived>& t, Rng& rng, double bound) {
    for (Eigen::Index i = 0; i < t.size(); ++i) t.data()[i] = rng.uniform(-bound, bound);
}

/// Uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)).
inline Matrix scaled_uniform(Eigen::Index rows, Eigen::Index cols, Rng& rng) {
    Matrix m(rows, cols);
    fill_uniform(m, rng, 1.0 / std::sqrt(static_cast<double>(cols)));
    return m;
}

inline double sigmoid(double x) {
    if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
    const double e = std::exp(x);
    return e / (1.0 + e);
}

}  // namespace tma
