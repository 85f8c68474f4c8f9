#include <catch2/catch_amalgamated.hpp>

#include <boost/math/distributions/inverse_gamma.hpp>

#include "gsbart/likelihood.hpp"
#include "gsbart/stats.hpp"
#include "oracles.hpp"

using namespace gsbart;

namespace {

ResponseModel normal_model(double sigma) {
    ResponseModel m;
    m.kind = ModelKind::Normal;
    m.sigma = sigma;
    return m;
}

ResponseModel model_of(ModelKind k) {
    ResponseModel m;
    m.kind = k;
    return m;
}

}  // namespace

TEST_CASE("gradient formulas at hand-checked points") {
    double ldot, lddot;
    gradients(normal_model(1.0), 1.0, 0.5, ldot, lddot);
    CHECK(ldot == Catch::Approx(0.5).margin(1e-15));
    CHECK(lddot == Catch::Approx(-1.0).margin(1e-15));

    gradients(model_of(ModelKind::Logistic), 1.0, 0.0, ldot, lddot);
    CHECK(ldot == Catch::Approx(0.5).margin(1e-15));
    CHECK(lddot == Catch::Approx(-0.25).margin(1e-15));
}

TEST_CASE("gradients match finite differences of the exact log likelihood") {
    Rng rng(31);
    for (int rep = 0; rep < 500; ++rep) {
        ResponseModel m;
        double y, phi;
        switch (rep % 3) {
            case 0:
                m = normal_model(rng.uniform(0.3, 3.0));
                y = rng.uniform(-3.0, 3.0);
                phi = rng.uniform(-3.0, 3.0);
                break;
            case 1:
                m = model_of(ModelKind::Count);
                y = static_cast<double>(rng.uniform_index(50));
                phi = rng.uniform(-2.0, 3.0);
                break;
            default:
                m = model_of(ModelKind::Logistic);
                y = static_cast<double>(rng.uniform_index(2));
                phi = rng.uniform(-4.0, 4.0);
                break;
        }
        double ldot, lddot, fd1, fd2;
        gradients(m, y, phi, ldot, lddot);
        oracles::finite_diff_gradients(m, y, phi, fd1, fd2);
        CHECK(std::abs(ldot - fd1) / std::max(1.0, std::abs(fd1)) < 1e-6);
        CHECK(std::abs(lddot - fd2) / std::max(1.0, std::abs(fd2)) < 1e-6);
        CHECK(lddot <= 0.0);
    }
}

TEST_CASE("leaf stats: hand values and additivity") {
    GradientTable g;
    g.ldot = {1.0, -1.0};
    g.lddot = {-1.0, -1.0};
    g.phi_hat = {0.0, 0.0};
    g.phi_t_hat = {0.0, 0.0};
    const LeafStats empty = leaf_stats({}, g);
    CHECK(empty.J == 0.0);
    CHECK(empty.H == 0.0);

    const LeafStats s = leaf_stats({0, 1}, g);
    CHECK(s.J == Catch::Approx(0.0).margin(1e-15));
    CHECK(s.H == Catch::Approx(2.0).margin(1e-15));

    Rng rng(5);
    GradientTable big;
    for (int i = 0; i < 30; ++i) {
        big.ldot.push_back(rng.uniform(-2, 2));
        big.lddot.push_back(-rng.uniform(0.1, 2));
        big.phi_hat.push_back(rng.uniform(-1, 1));
        big.phi_t_hat.push_back(rng.uniform(-1, 1));
    }
    std::vector<int> A, B;
    for (int i = 0; i < 30; ++i) (i % 3 ? A : B).push_back(i);
    std::vector<int> U = A;
    U.insert(U.end(), B.begin(), B.end());
    const LeafStats sum = leaf_stats(A, big) + leaf_stats(B, big);
    const LeafStats whole = leaf_stats(U, big);
    CHECK(sum.J == Catch::Approx(whole.J).margin(1e-12));
    CHECK(sum.H == Catch::Approx(whole.H).margin(1e-12));
    CHECK(sum.count == whole.count);
}

TEST_CASE("log_m_hat equals the conjugate marginal for normal leaves") {
    CHECK(log_m_hat(LeafStats{0, 0, 0}, 0.0, PriorConfig{}) == Catch::Approx(0.0).margin(1e-15));

    Rng rng(17);
    for (int rep = 0; rep < 300; ++rep) {
        const int n = 1 + static_cast<int>(rng.uniform_index(50));
        const double sigma = rng.uniform(0.3, 2.5);
        PriorConfig prior;
        prior.sigma_mu2 = rng.uniform(0.05, 4.0);
        prior.mu0 = rng.uniform(-1.0, 1.0);
        const ResponseModel m = normal_model(sigma);

        std::vector<double> y(n), c(n), phi_t(n);
        GradientTable g;
        std::vector<int> idx(n);
        for (int i = 0; i < n; ++i) {
            y[i] = rng.uniform(-3, 3);
            c[i] = rng.uniform(-1, 1);       // other-trees fit
            phi_t[i] = rng.uniform(-1, 1);   // this tree's current contribution
            double ld, ldd;
            gradients(m, y[i], c[i] + phi_t[i], ld, ldd);
            g.ldot.push_back(ld);
            g.lddot.push_back(ldd);
            g.phi_hat.push_back(c[i] + phi_t[i]);
            g.phi_t_hat.push_back(phi_t[i]);
            idx[i] = i;
        }
        const LeafStats s = leaf_stats(idx, g);
        double const_term = 0.0;
        for (int i = 0; i < n; ++i)
            const_term += exact_log_likelihood(m, y[i], g.phi_hat[i]) -
                          g.phi_t_hat[i] * g.ldot[i] +
                          0.5 * g.phi_t_hat[i] * g.phi_t_hat[i] * g.lddot[i];
        const double got = log_m_hat(s, const_term, prior);
        const double want =
            oracles::conjugate_normal_log_marginal(y, c, sigma, prior.mu0, prior.sigma_mu2);
        CHECK(std::abs(got - want) < 1e-10);
    }
}

TEST_CASE("exp(log_m_hat) matches quadrature of the quadratic surrogate") {
    Rng rng(19);
    for (int rep = 0; rep < 40; ++rep) {
        const ModelKind kind = rep % 2 ? ModelKind::Logistic : ModelKind::Count;
        ResponseModel m = model_of(kind);
        const int n = 1 + static_cast<int>(rng.uniform_index(8));
        PriorConfig prior;
        prior.sigma_mu2 = rng.uniform(0.1, 2.0);
        prior.mu0 = rng.uniform(-0.5, 0.5);

        std::vector<double> y(n), c(n), phi_t(n);
        GradientTable g;
        std::vector<int> idx(n);
        for (int i = 0; i < n; ++i) {
            y[i] = kind == ModelKind::Logistic ? static_cast<double>(rng.uniform_index(2))
                                               : static_cast<double>(rng.uniform_index(12));
            c[i] = rng.uniform(-0.5, 0.5);
            phi_t[i] = rng.uniform(-0.5, 0.5);
            double ld, ldd;
            gradients(m, y[i], c[i] + phi_t[i], ld, ldd);
            g.ldot.push_back(ld);
            g.lddot.push_back(ldd);
            g.phi_hat.push_back(c[i] + phi_t[i]);
            g.phi_t_hat.push_back(phi_t[i]);
            idx[i] = i;
        }
        const LeafStats s = leaf_stats(idx, g);
        double const_term = 0.0;
        for (int i = 0; i < n; ++i)
            const_term += exact_log_likelihood(m, y[i], g.phi_hat[i]) -
                          g.phi_t_hat[i] * g.ldot[i] +
                          0.5 * g.phi_t_hat[i] * g.phi_t_hat[i] * g.lddot[i];
        const double got = log_m_hat(s, const_term, prior);

        // quadrature over mu of N(mu; mu0, s2) * exp(sum Lhat_i(mu))
        auto log_integrand = [&](double mu) {
            double v = -0.5 * std::log(2.0 * M_PI * prior.sigma_mu2) -
                       (mu - prior.mu0) * (mu - prior.mu0) / (2.0 * prior.sigma_mu2);
            for (int i = 0; i < n; ++i) {
                const double step = mu - g.phi_t_hat[i];
                v += exact_log_likelihood(m, y[i], g.phi_hat[i]) + step * g.ldot[i] +
                     0.5 * step * step * g.lddot[i];
            }
            return v;
        };
        const double sd = std::sqrt(prior.sigma_mu2);
        double shift = -1e300;
        for (int k = -200; k <= 200; ++k)
            shift = std::max(shift, log_integrand(prior.mu0 + sd * k / 12.0));
        auto f = [&](double mu) { return std::exp(log_integrand(mu) - shift); };
        const double integral = boost::math::quadrature::gauss_kronrod<double, 61>::integrate(
            f, prior.mu0 - 14 * sd, prior.mu0 + 14 * sd, 10, 1e-12);
        const double want = shift + std::log(integral);
        CHECK(std::abs(std::exp(got - want) - 1.0) < 1e-6);
    }
}

TEST_CASE("split and merge ratios compose and cancel") {
    Rng rng(41);
    PriorConfig prior;
    for (int rep = 0; rep < 200; ++rep) {
        prior.sigma_mu2 = rng.uniform(0.05, 3.0);
        prior.mu0 = rng.uniform(-1.0, 1.0);
        LeafStats l{rng.uniform(-5, 5), rng.uniform(0, 10), 3};
        LeafStats r{rng.uniform(-5, 5), rng.uniform(0, 10), 4};
        const LeafStats parent = l + r;
        const double split = split_log_ratio(parent, l, r, prior);
        const double composed = log_m_hat(l, 0, prior) + log_m_hat(r, 0, prior) -
                                log_m_hat(parent, 0, prior);
        CHECK(std::abs(split - composed) < 1e-12);
        CHECK(std::abs(split + merge_log_ratio(l, r, prior)) < 1e-12);
        CHECK(merge_log_ratio(l, r, prior) == Catch::Approx(merge_log_ratio(r, l, prior)).margin(1e-12));
    }
    // degenerate cases stay finite
    LeafStats parent{2.0, 5.0, 4};
    CHECK(std::isfinite(split_log_ratio(parent, parent, LeafStats{}, prior)));
    CHECK(std::isfinite(merge_log_ratio(LeafStats{}, LeafStats{}, prior)));

    // two-point normal leaf vs the conjugate oracle
    PriorConfig unit;
    unit.sigma_mu2 = 1.0;
    unit.mu0 = 0.0;
    GradientTable g;
    g.ldot = {1.0, -1.0};
    g.lddot = {-1.0, -1.0};
    g.phi_hat = {0.0, 0.0};
    g.phi_t_hat = {0.0, 0.0};
    const double got = split_log_ratio(leaf_stats({0, 1}, g), leaf_stats({0}, g),
                                       leaf_stats({1}, g), unit);
    const double want = oracles::conjugate_normal_log_marginal({1.0}, {0.0}, 1.0, 0.0, 1.0) +
                        oracles::conjugate_normal_log_marginal({-1.0}, {0.0}, 1.0, 0.0, 1.0) -
                        oracles::conjugate_normal_log_marginal({1.0, -1.0}, {0.0, 0.0}, 1.0, 0.0, 1.0);
    CHECK(got == Catch::Approx(want).margin(1e-12));
}

TEST_CASE("leaf weight draws follow the conjugate posterior") {
    PriorConfig prior;
    prior.mu0 = 0.3;
    prior.sigma_mu2 = 0.8;
    Rng rng(53);

    // no data: prior draws
    double mean = 0, var = 0;
    const int reps = 100000;
    std::vector<double> draws(reps);
    for (int i = 0; i < reps; ++i) draws[i] = sample_leaf_weight(LeafStats{}, prior, rng);
    for (double d : draws) mean += d / reps;
    for (double d : draws) var += (d - mean) * (d - mean) / (reps - 1);
    CHECK(std::abs(mean - prior.mu0) < 3.0 * std::sqrt(prior.sigma_mu2 / reps));
    CHECK(std::abs(var - prior.sigma_mu2) < 3.0 * prior.sigma_mu2 * std::sqrt(2.0 / reps));

    // data dominance: huge H pins the draw at J/H
    const LeafStats heavy{5e8, 1e9, 1000};
    for (int i = 0; i < 100; ++i)
        CHECK(sample_leaf_weight(heavy, prior, rng) == Catch::Approx(0.5).margin(1e-3));

    // general case against the formula
    const LeafStats s{4.0, 6.0, 10};
    const double A = s.H + 1.0 / prior.sigma_mu2;
    const double want_mean = (s.J + prior.mu0 / prior.sigma_mu2) / A;
    mean = 0;
    for (int i = 0; i < reps; ++i) mean += sample_leaf_weight(s, prior, rng) / reps;
    CHECK(std::abs(mean - want_mean) < 3.0 * std::sqrt(1.0 / (A * reps)));
}

TEST_CASE("sigma_mu^2 posterior draws") {
    PriorConfig prior;
    prior.a = 3.0;
    prior.b = 1.0;
    prior.mu0 = 0.0;
    Rng rng(59);
    const int reps = 100000;

    // no trees: inv-Gamma(1.5, 0.5); the variance is infinite at this shape,
    // so compare the median instead of a Monte Carlo mean
    boost::math::inverse_gamma_distribution<double> ig(1.5, 0.5);
    std::vector<double> draws(reps);
    for (int i = 0; i < reps; ++i) draws[i] = sample_sigma_mu2({}, prior, rng);
    std::sort(draws.begin(), draws.end());
    CHECK(std::abs(draws[reps / 2] - boost::math::median(ig)) < 0.02);

    // posterior mean matches scale/(shape-1) within 3 SE
    std::vector<double> weights{0.5, -0.2, 0.7, 0.1, -0.4, 0.3};
    double ss = 0;
    for (double w : weights) ss += w * w;
    const double shape = (weights.size() + prior.a) / 2.0;
    const double scale = (ss + prior.b) / 2.0;
    double mean = 0;
    for (int i = 0; i < reps; ++i) mean += sample_sigma_mu2(weights, prior, rng) / reps;
    const double want = scale / (shape - 1.0);
    const double sd = scale / ((shape - 1.0) * std::sqrt(shape - 2.0));
    CHECK(std::abs(mean - want) < 3.0 * sd / std::sqrt(static_cast<double>(reps)));

    // all weights at mu0: scale collapses to b/2
    std::vector<double> centered(4, prior.mu0);
    Rng r1(7), r2(7);
    const double d1 = sample_sigma_mu2(centered, prior, r1);
    // manual draw from inv-Gamma((4 + a)/2, b/2)
    const double d2 = r2.inv_gamma((4 + prior.a) / 2.0, prior.b / 2.0);
    CHECK(d1 == Catch::Approx(d2).margin(1e-12));
}

TEST_CASE("normal sigma^2 posterior and lambda calibration") {
    PriorConfig prior;
    prior.nu = 3.0;
    prior.lambda = calibrate_lambda(1.0, prior.nu);
    // the 0.9 quantile of the calibrated prior on sigma equals sigma_hat
    boost::math::inverse_gamma_distribution<double> ig(prior.nu / 2.0,
                                                       prior.nu * prior.lambda / 2.0);
    CHECK(std::abs(boost::math::cdf(ig, 1.0) - 0.9) < 1e-6);

    const double lam2 = calibrate_lambda(2.5, 3.0);
    boost::math::inverse_gamma_distribution<double> ig2(1.5, 3.0 * lam2 / 2.0);
    CHECK(std::abs(boost::math::quantile(ig2, 0.9) - 2.5 * 2.5) < 1e-6);

    // n = 0: prior draw
    Rng r1(11), r2(11);
    CHECK(sample_sigma2_normal({}, prior, r1) ==
          Catch::Approx(r2.inv_gamma(prior.nu / 2.0, prior.nu * prior.lambda / 2.0)).margin(1e-12));

    // Monte Carlo mean vs the analytic inverse-gamma mean
    Rng rng(61);
    std::vector<double> resid{0.5, -1.0, 0.3, 0.9, -0.2, 0.1, -0.6, 0.4};
    double ss = 0;
    for (double r : resid) ss += r * r;
    const double shape = (prior.nu + resid.size()) / 2.0;
    const double scale = (prior.nu * prior.lambda + ss) / 2.0;
    const int reps = 100000;
    double mean = 0;
    for (int i = 0; i < reps; ++i) mean += sample_sigma2_normal(resid, prior, rng) / reps;
    const double want = scale / (shape - 1.0);
    const double sd = scale / ((shape - 1.0) * std::sqrt(shape - 2.0));
    CHECK(std::abs(mean - want) < 3.0 * sd / std::sqrt(static_cast<double>(reps)));
}

TEST_CASE("exact log likelihood basics") {
    const ResponseModel m = normal_model(1.0);
    CHECK(exact_log_likelihood(m, 0.7, 0.7) ==
          Catch::Approx(-0.5 * std::log(2.0 * M_PI)).margin(1e-14));

    // the quadratic surrogate agrees exactly at the expansion point
    Rng rng(67);
    for (int rep = 0; rep < 60; ++rep) {
        ResponseModel mm = model_of(static_cast<ModelKind>(rep % 3));
        if (mm.kind == ModelKind::Normal) mm.sigma = rng.uniform(0.5, 2.0);
        const double y = mm.kind == ModelKind::Logistic
                             ? static_cast<double>(rng.uniform_index(2))
                             : std::abs(rng.uniform(0.0, 8.0));
        const double phi_hat = rng.uniform(-1.5, 1.5);
        const double phi_t = rng.uniform(-1.0, 1.0);
        double ld, ldd;
        gradients(mm, y, phi_hat, ld, ldd);
        const double mu = phi_t;  // step = 0 recovers the expansion point
        const double step = mu - phi_t;
        const double surrogate =
            exact_log_likelihood(mm, y, phi_hat) + step * ld + 0.5 * step * step * ldd;
        CHECK(surrogate == Catch::Approx(exact_log_likelihood(mm, y, phi_hat)).margin(1e-14));
    }
}
