#include "arq/fading.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

namespace arq {
namespace {

constexpr double kEps = std::numeric_limits<double>::epsilon();
constexpr double kInf = std::numeric_limits<double>::infinity();

// Regularized lower incomplete gamma P(a,x), series branch (x < a+1).
double gammp_series(double a, double x, double gln) {
    double ap = a;
    double sum = 1.0 / a;
    double del = sum;
    for (int n = 0; n < 500; ++n) {
        ap += 1.0;
        del *= x / ap;
        sum += del;
        if (std::fabs(del) < std::fabs(sum) * kEps) break;
    }
    return sum * std::exp(-x + a * std::log(x) - gln);
}

// Regularized upper incomplete gamma Q(a,x), continued fraction (x >= a+1),
// modified Lentz evaluation.
double gammq_cf(double a, double x, double gln) {
    const double fpmin = std::numeric_limits<double>::min() / kEps;
    double b = x + 1.0 - a;
    double c = 1.0 / fpmin;
    double d = 1.0 / b;
    double h = d;
    for (int i = 1; i <= 500; ++i) {
        const double an = -i * (i - a);
        b += 2.0;
        d = an * d + b;
        if (std::fabs(d) < fpmin) d = fpmin;
        c = b + an / c;
        if (std::fabs(c) < fpmin) c = fpmin;
        d = 1.0 / d;
        const double del = d * c;
        h *= del;
        if (std::fabs(del - 1.0) < kEps) break;
    }
    return std::exp(-x + a * std::log(x) - gln) * h;
}

double gamma_p(double a, double x, double gln) {
    if (x <= 0.0) return 0.0;
    if (std::isinf(x)) return 1.0;
    if (x < a + 1.0) return gammp_series(a, x, gln);
    return 1.0 - gammq_cf(a, x, gln);
}

// Inverse of P(a,.) at probability p: Halley iteration from a Wilson-Hilferty
// style initial guess. Converges to full double precision in a few steps.
double gamma_p_inv(double a, double p, double gln) {
    if (p <= 0.0) return 0.0;
    if (p >= 1.0) return kInf;
    const double a1 = a - 1.0;
    double x;
    if (a > 1.0) {
        const double pp = p < 0.5 ? p : 1.0 - p;
        const double t = std::sqrt(-2.0 * std::log(pp));
        double z = (2.30753 + t * 0.27061) / (1.0 + t * (0.99229 + t * 0.04481)) - t;
        if (p < 0.5) z = -z;
        x = std::max(1e-3, a * std::pow(1.0 - 1.0 / (9.0 * a) - z / (3.0 * std::sqrt(a)), 3.0));
    } else {
        const double t = 1.0 - a * (0.253 + a * 0.12);
        x = (p < t) ? std::pow(p / t, 1.0 / a) : 1.0 - std::log1p(-(p - t) / (1.0 - t));
    }
    const double lna1 = a > 1.0 ? std::log(a1) : 0.0;
    const double afac = a > 1.0 ? std::exp(a1 * (lna1 - 1.0) - gln) : 0.0;
    for (int j = 0; j < 14; ++j) {
        if (x <= 0.0) return 0.0;
        const double err = gamma_p(a, x, gln) - p;
        double t;
        if (a > 1.0)
            t = afac * std::exp(-(x - a1) + a1 * (std::log(x) - lna1));
        else
            t = std::exp(-x + a1 * std::log(x) - gln);
        const double u = err / t;
        t = u / (1.0 - 0.5 * std::min(1.0, u * (a1 / x - 1.0)));
        x -= t;
        if (x <= 0.0) x = 0.5 * (x + t);
        if (std::fabs(t) < kEps * x) break;
    }
    return x;
}

}  // namespace

FadingDistribution FadingDistribution::nakagami(double n_shape, double w_scale) {
    if (!(n_shape > 0.0) || !(w_scale > 0.0))
        throw std::invalid_argument("nakagami: n_shape and w_scale must be positive");
    FadingDistribution d;
    d.kind_ = FadingKind::NakagamiN;
    d.n_shape_ = n_shape;
    d.w_scale_ = w_scale;
    d.log_gamma_n_ = std::lgamma(n_shape);
    return d;
}

FadingDistribution FadingDistribution::deterministic(double gain) {
    if (!(gain >= 0.0)) throw std::invalid_argument("deterministic: gain must be nonnegative");
    FadingDistribution d;
    d.kind_ = FadingKind::Deterministic;
    d.fixed_gain_ = gain;
    return d;
}

double FadingDistribution::pdf(double g) const {
    if (g < 0.0) throw std::domain_error("pdf: negative gain");
    if (kind_ == FadingKind::Deterministic)
        throw std::domain_error("pdf: deterministic law has no density");
    if (std::isinf(g)) return 0.0;
    const double n = n_shape_;
    if (g == 0.0) {
        if (2.0 * n - 1.0 > 0.0) return 0.0;
        if (2.0 * n - 1.0 == 0.0) return 2.0 * std::sqrt(n / w_scale_) / std::exp(log_gamma_n_);
        return kInf;
    }
    const double lg = n * std::log(n / w_scale_) + std::log(2.0) + (2.0 * n - 1.0) * std::log(g)
                      - n * g * g / w_scale_ - log_gamma_n_;
    return std::exp(lg);
}

double FadingDistribution::cdf(double g) const {
    if (g < 0.0 || std::isnan(g)) throw std::domain_error("cdf: negative gain");
    if (std::isinf(g)) return 1.0;
    if (kind_ == FadingKind::Deterministic) return g >= fixed_gain_ ? 1.0 : 0.0;
    if (n_shape_ == 1.0) return -std::expm1(-g * g / w_scale_);
    return gamma_p(n_shape_, n_shape_ * g * g / w_scale_, log_gamma_n_);
}

double FadingDistribution::prob_below(double g) const {
    if (kind_ == FadingKind::Deterministic) {
        if (g < 0.0 || std::isnan(g)) throw std::domain_error("prob_below: negative gain");
        return g > fixed_gain_ ? 1.0 : 0.0;
    }
    return cdf(g);  // continuous law: no atoms
}

double FadingDistribution::quantile(double p) const {
    if (!(p >= 0.0 && p <= 1.0)) throw std::domain_error("quantile: p outside [0,1]");
    if (p == 0.0) return 0.0;
    if (kind_ == FadingKind::Deterministic) return fixed_gain_;
    if (n_shape_ == 1.0) return std::sqrt(-w_scale_ * std::log1p(-p));
    const double x = gamma_p_inv(n_shape_, p, log_gamma_n_);
    return std::sqrt(w_scale_ * x / n_shape_);
}

double FadingDistribution::sample(RngStream& rng) const {
    if (kind_ == FadingKind::Deterministic) {
        rng.next_unit();  // keep stream consumption uniform across laws
        return fixed_gain_;
    }
    return quantile(rng.next_unit());
}

}  // namespace arq
