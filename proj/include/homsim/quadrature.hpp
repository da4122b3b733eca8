#pragma once

#include <cstddef>
#include <stdexcept>

namespace homsim {

// Composite Simpson rule with n (even) intervals.
template <class F>
double simpson(F&& f, double a, double b, int n = 4096) {
    if (n < 2 || n % 2 != 0) throw std::invalid_argument("simpson: n must be even and >= 2");
    const double h = (b - a) / n;
    double sum = f(a) + f(b);
    double odd = 0.0, even = 0.0;
    for (int i = 1; i < n; i += 2) odd += f(a + i * h);
    for (int i = 2; i < n; i += 2) even += f(a + i * h);
    return (sum + 4.0 * odd + 2.0 * even) * h / 3.0;
}

}  // namespace homsim
