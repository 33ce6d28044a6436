#include "thinlim/rates.hpp"

#include <cmath>
#include <stdexcept>

namespace thinlim {

RateFit fit_rate(const std::vector<double>& x, const std::vector<double>& y)
{
    if (x.size() != y.size())
        throw std::invalid_argument("fit_rate: series lengths differ");
    if (x.size() < 3)
        throw std::invalid_argument("fit_rate: need at least 3 points");
    const int n = int(x.size());
    double mx = 0.0, my = 0.0;
    std::vector<double> lx(n), ly(n);
    for (int i = 0; i < n; ++i) {
        if (!(x[i] > 0.0) || !(y[i] > 0.0) || !std::isfinite(x[i]) || !std::isfinite(y[i]))
            throw std::domain_error("fit_rate: data must be positive and finite");
        lx[i] = std::log(x[i]);
        ly[i] = std::log(y[i]);
        mx += lx[i];
        my += ly[i];
    }
    mx /= n;
    my /= n;
    double sxx = 0.0, sxy = 0.0;
    for (int i = 0; i < n; ++i) {
        sxx += (lx[i] - mx) * (lx[i] - mx);
        sxy += (lx[i] - mx) * (ly[i] - my);
    }
    if (sxx == 0.0)
        throw std::invalid_argument("fit_rate: abscissae coincide");
    RateFit f;
    f.points = n;
    f.exponent = sxy / sxx;
    f.intercept = my - f.exponent * mx;
    double ssr = 0.0;
    for (int i = 0; i < n; ++i) {
        const double e = ly[i] - f.intercept - f.exponent * lx[i];
        ssr += e * e;
    }
    f.stderr_ = std::sqrt(ssr / (n - 2) / sxx);
    return f;
}

} // namespace thinlim
