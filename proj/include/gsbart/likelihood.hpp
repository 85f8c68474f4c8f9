#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "gsbart/common.hpp"

namespace gsbart {

enum class ModelKind { Normal, Count, Logistic };

inline std::string to_string(ModelKind k) {
    switch (k) {
        case ModelKind::Normal: return "normal";
        case ModelKind::Count: return "count";
        case ModelKind::Logistic: return "logistic";
    }
    return "?";
}

// Response model f_sigma(y | phi). For the count (variance) model phi is the
// log mean and an additive per-sample offset (log exposure) enters phi.
struct ResponseModel {
    ModelKind kind = ModelKind::Normal;
    double sigma = 1.0;                  // normal only
    const std::vector<double>* offset = nullptr;  // count only; may be null

    double offset_at(std::size_t i) const {
        return (offset && i < offset->size()) ? (*offset)[i] : 0.0;
    }
};

// phi values outside this range make exp(phi) useless for the count model;
// gradients clamp and the exact likelihood evaluates in log space.
inline constexpr double kCountPhiClamp = 30.0;

// First and second derivatives of the per-sample log likelihood at phi_hat.
// The second derivative is <= 0 for all three models.
inline void gradients(const ResponseModel& model, double y, double phi_hat, double& ldot,
                      double& lddot) {
    switch (model.kind) {
        case ModelKind::Normal: {
            const double s2 = model.sigma * model.sigma;
            ldot = (y - phi_hat) / s2;
            lddot = -1.0 / s2;
            break;
        }
        case ModelKind::Count: {
            const double p = std::clamp(phi_hat, -kCountPhiClamp, kCountPhiClamp);
            const double ep = std::exp(p);
            const double r = y - ep;
            ldot = -0.5 + r * r / (2.0 * ep) + r;
            lddot = -y - r * r / (2.0 * ep);
            break;
        }
        case ModelKind::Logistic: {
            // exp(phi)/(1+exp(phi)) evaluated stably on both tails
            const double s = phi_hat >= 0.0 ? 1.0 / (1.0 + std::exp(-phi_hat))
                                            : std::exp(phi_hat) / (1.0 + std::exp(phi_hat));
            ldot = y - s;
            lddot = -s * (1.0 - s);
            break;
        }
    }
    if (!std::isfinite(ldot) || !std::isfinite(lddot))
        throw std::runtime_error("gradients: non-finite derivative (y=" + std::to_string(y) +
                                 ", phi=" + std::to_string(phi_hat) + ")");
}

// Exact per-sample log density/mass at phi (sum over a vector elsewhere).
inline double exact_log_likelihood(const ResponseModel& model, double y, double phi) {
    switch (model.kind) {
        case ModelKind::Normal: {
            const double s2 = model.sigma * model.sigma;
            const double r = y - phi;
            return -0.5 * std::log(2.0 * M_PI * s2) - r * r / (2.0 * s2);
        }
        case ModelKind::Count: {
            // y ~ Normal(exp(phi), exp(phi)); kept in log space so large |phi|
            // degrades gracefully instead of overflowing.
            const double p = std::clamp(phi, -kCountPhiClamp, kCountPhiClamp);
            const double ep = std::exp(p);
            const double r = y - ep;
            return -0.5 * std::log(2.0 * M_PI) - 0.5 * p - r * r / (2.0 * ep);
        }
        case ModelKind::Logistic: {
            // y*phi - log(1+exp(phi)), stable form
            const double log1pe = phi > 0.0 ? phi + std::log1p(std::exp(-phi))
                                            : std::log1p(std::exp(phi));
            return y * phi - log1pe;
        }
    }
    return 0.0;
}

// --------------------------- gradient table ---------------------------------

// Per-training-sample derivatives at the current fit, rebuilt once per tree
// update and then read-only.
struct GradientTable {
    std::vector<double> ldot;
    std::vector<double> lddot;
    std::vector<double> phi_hat;    // expansion point (includes offset for count)
    std::vector<double> phi_t_hat;  // current contribution of the tree being updated

    std::size_t size() const { return ldot.size(); }

    // phi_total and phi_tree are over training samples; offsets are added here.
    static GradientTable build(const ResponseModel& model, const std::vector<double>& y,
                               const std::vector<double>& phi_total,
                               const std::vector<double>& phi_tree) {
        GradientTable t;
        const std::size_t n = y.size();
        t.ldot.resize(n);
        t.lddot.resize(n);
        t.phi_hat.resize(n);
        t.phi_t_hat = phi_tree;
        for (std::size_t i = 0; i < n; ++i) {
            t.phi_hat[i] = phi_total[i] + model.offset_at(i);
            gradients(model, y[i], t.phi_hat[i], t.ldot[i], t.lddot[i]);
        }
        return t;
    }
};

// ------------------------------ leaf stats ----------------------------------

// J = sum(ldot_i - phi_t_hat_i * lddot_i), H = -sum(lddot_i) over a leaf's
// training samples. Additive over disjoint sets.
struct LeafStats {
    double J = 0.0;
    double H = 0.0;
    long count = 0;

    LeafStats& operator+=(const LeafStats& o) {
        J += o.J;
        H += o.H;
        count += o.count;
        return *this;
    }
    friend LeafStats operator+(LeafStats a, const LeafStats& b) { return a += b; }
};

inline LeafStats leaf_stats(const std::vector<int>& indices, const GradientTable& g) {
    LeafStats s;
    for (int i : indices) {
        s.J += g.ldot[i] - g.phi_t_hat[i] * g.lddot[i];
        s.H -= g.lddot[i];
        ++s.count;
    }
    return s;
}

// ----------------------------- prior config ---------------------------------

struct PriorConfig {
    double alpha = 0.95;   // tree prior, in (0,1)
    double beta = 2.0;     // tree prior, >= 0
    double mu0 = 0.0;      // leaf-weight prior mean
    double sigma_mu2 = 1.0;  // leaf-weight prior variance (updated by Gibbs)
    double a = 3.0;        // sigma_mu^2 ~ inv-Gamma(a/2, b/2)
    double b = 1.0;
    double nu = 3.0;       // normal sigma^2 ~ inv-Gamma(nu/2, nu*lambda/2)
    double lambda = 1.0;

    void validate() const {
        if (!(alpha > 0.0 && alpha < 1.0)) throw ValidationError("prior: alpha must be in (0,1)");
        if (!(beta >= 0.0)) throw ValidationError("prior: beta must be >= 0");
        if (!(sigma_mu2 > 0.0)) throw ValidationError("prior: sigma_mu^2 must be > 0");
        if (!(a > 0.0 && b > 0.0)) throw ValidationError("prior: a and b must be > 0");
    }

    double p_split(int depth) const { return alpha * std::pow(1.0 + depth, -beta); }
};

// ------------------------- marginal likelihood ------------------------------

// Quadratic-approximation log marginal likelihood of one leaf. const_term
// carries sum(L - phi_t*Ldot + phi_t^2*Lddot/2), which cancels in split/merge
// ratios and defaults to zero.
inline double log_m_hat(const LeafStats& s, double const_term, const PriorConfig& prior) {
    const double prec = 1.0 / prior.sigma_mu2;
    const double A = s.H + prec;
    const double B = s.J + prior.mu0 * prec;
    return -prior.mu0 * prior.mu0 * prec / 2.0 + const_term + B * B / (2.0 * A) -
           std::log(std::sqrt(prior.sigma_mu2) * std::sqrt(A));
}

// Log marginal likelihood ratio of splitting a leaf with stats `parent` into
// `left` + `right`; the per-sample constant terms cancel.
inline double split_log_ratio(const LeafStats& parent, const LeafStats& left,
                              const LeafStats& right, const PriorConfig& prior) {
    const double prec = 1.0 / prior.sigma_mu2;
    const double m = prior.mu0 * prec;
    auto quad = [&](const LeafStats& s) {
        const double B = s.J + m;
        return B * B / (s.H + prec);
    };
    return 0.5 * (quad(left) + quad(right) - quad(parent) - prior.mu0 * prior.mu0 * prec) -
           0.5 * (std::log(left.H + prec) + std::log(right.H + prec) - std::log(parent.H + prec)) -
           0.5 * std::log(prior.sigma_mu2);
}

// Log ratio of merging two sibling leaves into one; exact negation of the
// corresponding split ratio, written out from its own closed form.
inline double merge_log_ratio(const LeafStats& left, const LeafStats& right,
                              const PriorConfig& prior) {
    const LeafStats merged = left + right;
    const double prec = 1.0 / prior.sigma_mu2;
    const double m = prior.mu0 * prec;
    auto quad = [&](const LeafStats& s) {
        const double B = s.J + m;
        return B * B / (s.H + prec);
    };
    return 0.5 * (quad(merged) - quad(left) - quad(right) + prior.mu0 * prior.mu0 * prec) -
           0.5 * (std::log(merged.H + prec) - std::log(left.H + prec) - std::log(right.H + prec)) +
           0.5 * std::log(prior.sigma_mu2);
}

// --------------------------- conjugate draws --------------------------------

// Leaf weight posterior: N((J + mu0/s2)/(H + 1/s2), 1/(H + 1/s2)).
inline double sample_leaf_weight(const LeafStats& s, const PriorConfig& prior, Rng& rng) {
    const double prec = 1.0 / prior.sigma_mu2;
    const double A = s.H + prec;
    return rng.normal((s.J + prior.mu0 * prec) / A, std::sqrt(1.0 / A));
}

// sigma_mu^2 | all leaf weights ~ inv-Gamma((sum l_t + a)/2, (sum (mu-mu0)^2 + b)/2).
inline double sample_sigma_mu2(const std::vector<double>& all_leaf_weights,
                               const PriorConfig& prior, Rng& rng) {
    double ss = 0.0;
    for (double w : all_leaf_weights) {
        const double d = w - prior.mu0;
        ss += d * d;
    }
    const double shape = (static_cast<double>(all_leaf_weights.size()) + prior.a) / 2.0;
    const double scale = (ss + prior.b) / 2.0;
    return rng.inv_gamma(shape, scale);
}

// sigma^2 | residuals ~ inv-Gamma((nu + n)/2, (nu*lambda + sum r^2)/2).
inline double sample_sigma2_normal(const std::vector<double>& residuals, const PriorConfig& prior,
                                   Rng& rng) {
    double ss = 0.0;
    for (double r : residuals) ss += r * r;
    const double shape = (prior.nu + static_cast<double>(residuals.size())) / 2.0;
    const double scale = (prior.nu * prior.lambda + ss) / 2.0;
    return rng.inv_gamma(shape, scale);
}

}  // namespace gsbart
