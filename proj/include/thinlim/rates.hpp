#pragma once

#include <vector>

namespace thinlim {

/// Least-squares slope of log y against log x.
struct RateFit {
    double exponent = 0.0;
    double stderr_ = 0.0;
    double intercept = 0.0; // log of the implied constant
    int points = 0;
};

/// Throws std::invalid_argument for fewer than 3 points or sizes that differ,
/// std::domain_error for non-positive data.
RateFit fit_rate(const std::vector<double>& x, const std::vector<double>& y);

} // namespace thinlim
