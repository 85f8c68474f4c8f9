#pragma once

#include <boost/math/distributions/inverse_gamma.hpp>

#include "gsbart/likelihood.hpp"

namespace gsbart {

// Calibrate lambda of the sigma^2 ~ inv-Gamma(nu/2, nu*lambda/2) prior so that
// P(sigma < sigma_hat) = 0.9.
inline double calibrate_lambda(double sigma_hat, double nu) {
    if (!(sigma_hat > 0.0)) throw ValidationError("calibrate_lambda: sigma_hat must be > 0");
    // P(sigma^2 < q) = 0.9 with q = sigma_hat^2 fixes the scale directly:
    // scale = q * quantile_{invgamma(shape, 1)}(0.9)^{-1} ... solved via the
    // unit-scale distribution since scale enters multiplicatively.
    boost::math::inverse_gamma_distribution<double> unit(nu / 2.0, 1.0);
    const double q_unit = boost::math::quantile(unit, 0.9);  // 0.9 quantile at scale 1
    const double scale = sigma_hat * sigma_hat / q_unit;     // want 0.9 quantile at sigma_hat^2
    return 2.0 * scale / nu;
}

}  // namespace gsbart
