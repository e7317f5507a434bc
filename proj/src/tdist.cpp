#include "tgan/tdist.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <ostream>
#include <sstream>

namespace tgan::tdist {

namespace {

constexpr double kPi = std::numbers::pi;

std::string vec_str(std::span<const double> v) {
    std::ostringstream os;
    os << "(";
    for (std::size_t i = 0; i < v.size(); ++i) {
        if (i) os << ", ";
        os << v[i];
    }
    os << ")";
    return os.str();
}

}  // namespace

void TDistParams::validate() const {
    if (mu.empty()) throw DomainError("t params: dimension must be >= 1");
    if (sigma.size() != mu.size()) {
        throw DomainError("t params: mu has " + std::to_string(mu.size()) +
                          " entries but sigma has " + std::to_string(sigma.size()));
    }
    for (std::size_t i = 0; i < sigma.size(); ++i) {
        if (!(sigma[i] > 0.0)) {
            throw DomainError("t params: sigma[" + std::to_string(i) + "] = " +
                              std::to_string(sigma[i]) + " is not positive");
        }
    }
    if (!(nu > 0.0)) throw DomainError("t params: nu must be positive");
}

TDistParams TDistParams::standard(std::size_t p, double nu) {
    TDistParams s;
    s.mu.assign(p, 0.0);
    s.sigma.assign(p, 1.0);
    s.nu = nu;
    return s;
}

double lgamma_lanczos(double x) {
    // Lanczos, g = 7, 9 coefficients.
    static const double g = 7.0;
    static const double coef[9] = {
        0.99999999999980993,
        676.5203681218851,
        -1259.1392167224028,
        771.32342877765313,
        -176.61502916214059,
        12.507343278686905,
        -0.13857109526572012,
        9.9843695780195716e-6,
        1.5056327351493116e-7,
    };
    if (x < 0.5) {
        // Reflection: Gamma(x) Gamma(1-x) = pi / sin(pi x)
        return std::log(kPi / std::sin(kPi * x)) - lgamma_lanczos(1.0 - x);
    }
    x -= 1.0;
    double a = coef[0];
    const double t = x + g + 0.5;
    for (int i = 1; i < 9; ++i) a += coef[i] / (x + static_cast<double>(i));
    return 0.5 * std::log(2.0 * kPi) + (x + 0.5) * std::log(t) - t + std::log(a);
}

namespace {

double beta_continued_fraction(double a, double b, double x) {
    // Modified Lentz evaluation of the standard continued fraction for I_x.
    constexpr double tiny = 1e-300;
    constexpr double eps = 1e-15;
    const double qab = a + b, qap = a + 1.0, qam = a - 1.0;
    double c = 1.0;
    double d = 1.0 - qab * x / qap;
    if (std::abs(d) < tiny) d = tiny;
    d = 1.0 / d;
    double h = d;
    for (int m = 1; m <= 300; ++m) {
        const double m2 = 2.0 * m;
        double aa = m * (b - m) * x / ((qam + m2) * (a + m2));
        d = 1.0 + aa * d;
        if (std::abs(d) < tiny) d = tiny;
        c = 1.0 + aa / c;
        if (std::abs(c) < tiny) c = tiny;
        d = 1.0 / d;
        h *= d * c;
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
        d = 1.0 + aa * d;
        if (std::abs(d) < tiny) d = tiny;
        c = 1.0 + aa / c;
        if (std::abs(c) < tiny) c = tiny;
        d = 1.0 / d;
        const double del = d * c;
        h *= del;
        if (std::abs(del - 1.0) < eps) break;
    }
    return h;
}

}  // namespace

double regularized_incomplete_beta(double a, double b, double x) {
    if (!(a > 0.0) || !(b > 0.0)) {
        throw DomainError("incomplete beta: a and b must be positive");
    }
    if (x <= 0.0) return 0.0;
    if (x >= 1.0) return 1.0;
    const double log_front = lgamma_lanczos(a + b) - lgamma_lanczos(a) -
                             lgamma_lanczos(b) + a * std::log(x) +
                             b * std::log1p(-x);
    if (x < (a + 1.0) / (a + b + 2.0)) {
        return std::exp(log_front) * beta_continued_fraction(a, b, x) / a;
    }
    return 1.0 - std::exp(log_front) * beta_continued_fraction(b, a, 1.0 - x) / b;
}

double standard_t_cdf(double x, double nu) {
    if (!(nu > 0.0)) throw DomainError("t cdf: nu must be positive");
    if (x == 0.0) return 0.5;
    const double z = nu / (nu + x * x);
    const double tail = 0.5 * regularized_incomplete_beta(0.5 * nu, 0.5, z);
    return x > 0.0 ? 1.0 - tail : tail;
}

double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::numbers::sqrt2); }

double gamma_sample(double shape, Rng& rng) {
    if (!(shape > 0.0)) throw DomainError("gamma sample: shape must be positive");
    if (shape < 1.0) {
        const double u = rng.uniform01();
        return gamma_sample(shape + 1.0, rng) * std::pow(u, 1.0 / shape);
    }
    const double d = shape - 1.0 / 3.0;
    const double c = 1.0 / std::sqrt(9.0 * d);
    for (;;) {
        double x, v;
        do {
            x = rng.normal();
            v = 1.0 + c * x;
        } while (v <= 0.0);
        v = v * v * v;
        const double u = rng.uniform01();
        if (u < 1.0 - 0.0331 * x * x * x * x) return d * v;
        if (std::log(u) < 0.5 * x * x + d * (1.0 - v + std::log(v))) return d * v;
    }
}

double chi_square_sample(double nu, Rng& rng) {
    return 2.0 * gamma_sample(0.5 * nu, rng);
}

std::vector<double> sample_standard_t(std::size_t p, double nu, std::size_t n, Rng& rng) {
    if (p < 1) throw DomainError("t sample: dimension must be >= 1");
    if (n < 1) throw DomainError("t sample: count must be >= 1");
    if (!(nu > 0.0)) throw DomainError("t sample: nu must be positive");
    std::vector<double> out(n * p);
    for (auto& v : out) {
        const double z = rng.normal();
        const double chi2 = chi_square_sample(nu, rng);
        v = z * std::sqrt(nu / chi2);
    }
    return out;
}

namespace {

double log_norm_constant(const TDistParams& params) {
    const double p = static_cast<double>(params.dim());
    double log_det_sqrt = 0.0;  // log |Sigma|^{1/2} = sum log sigma_i
    for (double s : params.sigma) log_det_sqrt += std::log(s);
    return lgamma_lanczos(0.5 * (params.nu + p)) - lgamma_lanczos(0.5 * params.nu) -
           0.5 * p * std::log(params.nu) - 0.5 * p * std::log(kPi) - log_det_sqrt;
}

double log_pdf_with_norm(std::span<const double> x, const TDistParams& params,
                         double log_norm) {
    if (x.size() != params.dim()) {
        throw DomainError("t pdf: point has dimension " + std::to_string(x.size()) +
                          ", params have " + std::to_string(params.dim()));
    }
    double quad = 0.0;  // (x-mu)^T Sigma^{-1} (x-mu), Sigma diagonal
    for (std::size_t i = 0; i < x.size(); ++i) {
        if (!std::isfinite(x[i])) throw DomainError("t pdf: non-finite input");
        const double d = (x[i] - params.mu[i]) / params.sigma[i];
        quad += d * d;
    }
    const double p = static_cast<double>(x.size());
    return log_norm - 0.5 * (params.nu + p) * std::log1p(quad / params.nu);
}

}  // namespace

double log_pdf(std::span<const double> x, const TDistParams& params) {
    params.validate();
    return log_pdf_with_norm(x, params, log_norm_constant(params));
}

double pdf(std::span<const double> x, const TDistParams& params) {
    return std::exp(log_pdf(x, params));
}

Density::Density(TDistParams params) : params_(std::move(params)) {
    params_.validate();
    log_norm_ = log_norm_constant(params_);
}

double Density::log_pdf(std::span<const double> x) const {
    return log_pdf_with_norm(x, params_, log_norm_);
}

double Density::pdf(std::span<const double> x) const { return std::exp(log_pdf(x)); }

std::vector<double> standardize(std::span<const double> x, const TDistParams& params) {
    params.validate();
    if (x.size() != params.dim()) throw DomainError("standardize: dimension mismatch");
    std::vector<double> y(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) y[i] = (x[i] - params.mu[i]) / params.sigma[i];
    return y;
}

std::vector<double> unstandardize(std::span<const double> y, const TDistParams& params) {
    params.validate();
    if (y.size() != params.dim()) throw DomainError("unstandardize: dimension mismatch");
    std::vector<double> x(y.size());
    for (std::size_t i = 0; i < y.size(); ++i) x[i] = params.sigma[i] * y[i] + params.mu[i];
    return x;
}

std::pair<double, double> jacobian_dets(const TDistParams& params) {
    params.validate();
    double det_dy = 1.0;
    for (double s : params.sigma) det_dy *= s;
    return {1.0 / det_dy, det_dy};
}

KsResult ks_test(std::vector<double> samples, const std::function<double(double)>& cdf) {
    if (samples.empty()) throw DomainError("ks test: empty sample");
    std::sort(samples.begin(), samples.end());
    const double n = static_cast<double>(samples.size());
    double d = 0.0;
    for (std::size_t i = 0; i < samples.size(); ++i) {
        const double u = cdf(samples[i]);
        const double lo = u - static_cast<double>(i) / n;
        const double hi = (static_cast<double>(i) + 1.0) / n - u;
        d = std::max(d, std::max(lo, hi));
    }
    // Asymptotic Kolmogorov distribution with the Stephens small-n correction.
    const double sqn = std::sqrt(n);
    const double lambda = (sqn + 0.12 + 0.11 / sqn) * d;
    double p = 1.0;
    if (lambda > 0.0) {
        double sum = 0.0, sign = 1.0, prev = 0.0;
        const double e = -2.0 * lambda * lambda;
        bool converged = false;
        for (int k = 1; k <= 100; ++k) {
            const double term = sign * std::exp(e * k * k);
            sum += term;
            if (std::abs(term) <= 1e-3 * std::abs(prev) || std::abs(term) <= 1e-10 * sum) {
                converged = true;
                break;
            }
            prev = term;
            sign = -sign;
        }
        p = converged ? std::clamp(2.0 * sum, 0.0, 1.0) : 1.0;
    }
    return {d, p};
}

std::string params_digest(const TDistParams& params) {
    std::uint64_t h = fnv1a64(params.mu.data(), params.mu.size() * sizeof(double));
    h = fnv1a64(params.sigma.data(), params.sigma.size() * sizeof(double), h);
    h = fnv1a64(&params.nu, sizeof(double), h);
    return hex64(h);
}

bool TheoremReport::all_pass() const {
    for (const auto& c : checks)
        if (!c.pass) return false;
    return !checks.empty();
}

std::vector<std::vector<double>> axis_grid(const TDistParams& params,
                                           std::size_t points_per_axis,
                                           double span_sigmas) {
    params.validate();
    if (points_per_axis < 2) throw DomainError("axis grid: need at least 2 points per axis");
    const std::size_t p = params.dim();
    std::vector<std::vector<double>> axes(p);
    for (std::size_t i = 0; i < p; ++i) {
        const double lo = params.mu[i] - span_sigmas * params.sigma[i];
        const double hi = params.mu[i] + span_sigmas * params.sigma[i];
        axes[i].resize(points_per_axis);
        for (std::size_t j = 0; j < points_per_axis; ++j) {
            axes[i][j] = lo + (hi - lo) * static_cast<double>(j) /
                                  static_cast<double>(points_per_axis - 1);
        }
    }
    std::size_t total = 1;
    for (std::size_t i = 0; i < p; ++i) total *= points_per_axis;
    std::vector<std::vector<double>> grid;
    grid.reserve(total);
    std::vector<std::size_t> idx(p, 0);
    for (std::size_t g = 0; g < total; ++g) {
        std::vector<double> pt(p);
        for (std::size_t i = 0; i < p; ++i) pt[i] = axes[i][idx[i]];
        grid.push_back(std::move(pt));
        for (std::size_t i = 0; i < p; ++i) {
            if (++idx[i] < points_per_axis) break;
            idx[i] = 0;
        }
    }
    return grid;
}

TheoremReport verify_transform_theorem(const TDistParams& params,
                                       const std::vector<std::vector<double>>& grid,
                                       std::size_t samples, Rng& rng,
                                       const TheoremOptions& opts) {
    params.validate();
    if (grid.empty()) throw DomainError("verify theorem: empty grid");
    if (samples < 10000) throw DomainError("verify theorem: need at least 10000 samples");

    const std::size_t p = params.dim();
    const auto digest = params_digest(params);
    const double det_dy = jacobian_dets(params).second;
    const Density dens(params);
    const Density standard(TDistParams::standard(p, params.nu));

    TheoremReport report;

    // Density side of the theorem: f_x(x) |det D_y| == f_std(standardize(x)).
    double max_disc = 0.0;
    std::vector<double> worst_point;
    for (const auto& x : grid) {
        const double lhs = dens.pdf(x) * det_dy + opts.density_perturb;
        const double rhs = standard.pdf(standardize(x, params));
        const double disc = std::abs(lhs - rhs);
        if (disc > max_disc) {
            max_disc = disc;
            worst_point = x;
        }
    }
    TheoremCheck dc;
    dc.check = "density";
    dc.parameter_digest = digest;
    dc.statistic = max_disc;
    dc.threshold = opts.density_tol;
    dc.pass = max_disc < opts.density_tol;
    if (!dc.pass) dc.detail = "worst grid point " + vec_str(worst_point);
    report.checks.push_back(std::move(dc));

    // Sampling side: draw from t(mu, Sigma, nu), standardize, KS per coordinate.
    const auto eps = sample_standard_t(p, params.nu, samples, rng);
    for (std::size_t i = 0; i < p; ++i) {
        std::vector<double> coord(samples);
        for (std::size_t r = 0; r < samples; ++r) {
            const double draw = params.mu[i] + params.sigma[i] * eps[r * p + i];
            coord[r] = (draw - params.mu[i]) / params.sigma[i];
        }
        const auto ks =
            ks_test(std::move(coord), [&](double v) { return standard_t_cdf(v, params.nu); });
        TheoremCheck kc;
        kc.check = "ks_coord_" + std::to_string(i);
        kc.parameter_digest = digest;
        kc.statistic = ks.p_value;
        kc.threshold = opts.ks_significance;
        kc.pass = ks.p_value > opts.ks_significance;
        if (!kc.pass) {
            kc.detail = "coordinate " + std::to_string(i) + " D=" +
                        std::to_string(ks.statistic);
        }
        report.checks.push_back(std::move(kc));
    }
    return report;
}

void write_theorem_csv(const TheoremReport& report, std::ostream& os) {
    os << "check,parameter_digest,statistic,threshold,pass\n";
    char buf[64];
    for (const auto& c : report.checks) {
        std::snprintf(buf, sizeof(buf), "%.17g", c.statistic);
        os << c.check << "," << c.parameter_digest << "," << buf << ",";
        std::snprintf(buf, sizeof(buf), "%.17g", c.threshold);
        os << buf << "," << (c.pass ? "true" : "false") << "\n";
    }
}

}  // namespace tgan::tdist
