#pragma once

#include <cmath>
#include <cstdint>
#include <optional>

namespace ustatbench {

/// Neumaier-compensated running sum. Exact to within one rounding of the
/// true sum for all but pathological inputs.
class CompensatedSum {
public:
    void add(double x) noexcept {
        const double t = sum_ + x;
        if (std::abs(sum_) >= std::abs(x)) {
            comp_ += (sum_ - t) + x;
        } else {
            comp_ += (x - t) + sum_;
        }
        sum_ = t;
    }

    CompensatedSum& operator+=(double x) noexcept {
        add(x);
        return *this;
    }

    [[nodiscard]] double value() const noexcept {
        // Once an infinity entered, the compensation term is NaN garbage.
        if (!std::isfinite(sum_)) return sum_;
        return sum_ + comp_;
    }

private:
    double sum_ = 0.0;
    double comp_ = 0.0;
};

/// Unevaluated sum hi + lo with |lo| <= ulp(hi)/2 (double-double arithmetic).
struct DoubleDouble {
    double hi = 0.0;
    double lo = 0.0;

    [[nodiscard]] double value() const noexcept { return hi + lo; }
};

namespace detail {

inline DoubleDouble two_sum(double a, double b) noexcept {
    const double s = a + b;
    const double bb = s - a;
    const double err = (a - (s - bb)) + (b - bb);
    return {s, err};
}

inline DoubleDouble quick_two_sum(double a, double b) noexcept {
    const double s = a + b;
    return {s, b - (s - a)};
}

inline DoubleDouble two_prod(double a, double b) noexcept {
    const double p = a * b;
    return {p, std::fma(a, b, -p)};
}

} // namespace detail

inline DoubleDouble operator+(DoubleDouble a, DoubleDouble b) noexcept {
    DoubleDouble s = detail::two_sum(a.hi, b.hi);
    DoubleDouble t = detail::two_sum(a.lo, b.lo);
    s.lo += t.hi;
    s = detail::quick_two_sum(s.hi, s.lo);
    s.lo += t.lo;
    return detail::quick_two_sum(s.hi, s.lo);
}

inline DoubleDouble operator-(DoubleDouble a) noexcept { return {-a.hi, -a.lo}; }

inline DoubleDouble operator-(DoubleDouble a, DoubleDouble b) noexcept { return a + (-b); }

inline DoubleDouble operator*(DoubleDouble a, double b) noexcept {
    DoubleDouble p = detail::two_prod(a.hi, b);
    p.lo += a.lo * b;
    return detail::quick_two_sum(p.hi, p.lo);
}

inline DoubleDouble operator*(DoubleDouble a, DoubleDouble b) noexcept {
    DoubleDouble p = detail::two_prod(a.hi, b.hi);
    p.lo += a.hi * b.lo + a.lo * b.hi;
    return detail::quick_two_sum(p.hi, p.lo);
}

inline DoubleDouble operator/(DoubleDouble a, double b) noexcept {
    const double q1 = a.hi / b;
    DoubleDouble r = a - detail::two_prod(q1, b);
    const double q2 = r.hi / b;
    return detail::quick_two_sum(q1, q2);
}

/// C(n, k) as an exact integer, or nullopt on 64-bit overflow.
inline std::optional<std::uint64_t> binomial_exact(std::uint64_t n, std::uint64_t k) noexcept {
    if (k > n) return 0;
    if (k > n - k) k = n - k;
    unsigned __int128 result = 1;
    for (std::uint64_t i = 1; i <= k; ++i) {
        // C(n-k+i-1, i-1) * (n-k+i) is divisible by i.
        result = result * (n - k + i) / i;
        if (result > UINT64_MAX) return std::nullopt;
    }
    return static_cast<std::uint64_t>(result);
}

/// C(n, k) in floating point (lgamma-free product form; exact for the
/// sizes the bench enumerates).
inline double binomial(std::uint64_t n, std::uint64_t k) noexcept {
    if (k > n) return 0.0;
    if (k > n - k) k = n - k;
    double result = 1.0;
    for (std::uint64_t i = 1; i <= k; ++i) {
        result = result * static_cast<double>(n - k + i) / static_cast<double>(i);
    }
    return result;
}

} // namespace ustatbench
