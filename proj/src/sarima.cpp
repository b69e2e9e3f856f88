#include "porkcast/sarima.hpp"

#include <cmath>
#include <limits>
#include <random>

#include <Eigen/Eigenvalues>
#include <Eigen/QR>

#include "optim.hpp"
#include "porkcast/errors.hpp"

namespace porkcast {

void SarimaSpec::validate() const {
    if (p < 0 || d < 0 || q < 0 || P < 0 || D < 0 || Q < 0) {
        throw std::invalid_argument("SARIMA orders must be non-negative: " + to_string());
    }
    if (M < 1) {
        throw std::invalid_argument("seasonal period must be >= 1");
    }
    if (d + D > 3) {
        throw std::invalid_argument("total differencing d + D must not exceed 3: " + to_string());
    }
    if (M == 1 && (P != 0 || D != 0 || Q != 0)) {
        throw std::invalid_argument("seasonal orders require M > 1: " + to_string());
    }
}

std::string SarimaSpec::to_string() const {
    std::string s = "(" + std::to_string(p) + "," + std::to_string(d) + "," + std::to_string(q) + ")";
    if (M > 1) {
        s += "x(" + std::to_string(P) + "," + std::to_string(D) + "," + std::to_string(Q) + ")" + std::to_string(M);
    }
    return s;
}

namespace {

struct Coefs {
    double c = 0.0;
    Eigen::VectorXd phi, theta, sphi, stheta;
};

Coefs unpack(const SarimaSpec& s, const Eigen::VectorXd& x, bool with_const) {
    const Eigen::Index expected = s.coefficient_count() + (with_const ? 1 : 0);
    if (x.size() != expected) {
        throw std::invalid_argument("SARIMA parameter vector has " + std::to_string(x.size()) + " entries, expected " +
                                    std::to_string(expected));
    }
    Coefs c;
    Eigen::Index i = 0;
    if (with_const) c.c = x(i++);
    c.phi = x.segment(i, s.p);
    i += s.p;
    c.theta = x.segment(i, s.q);
    i += s.q;
    c.sphi = x.segment(i, s.P);
    i += s.P;
    c.stheta = x.segment(i, s.Q);
    return c;
}

using Poly = std::vector<double>;  // coefficient of B^k at index k

Poly multiply(const Poly& a, const Poly& b) {
    Poly out(a.size() + b.size() - 1, 0.0);
    for (std::size_t i = 0; i < a.size(); ++i)
        for (std::size_t j = 0; j < b.size(); ++j) out[i + j] += a[i] * b[j];
    return out;
}

// sign = -1 gives 1 - sum c_i B^(i*lag) (AR), +1 gives 1 + sum c_i B^(i*lag) (MA).
Poly lag_poly(const Eigen::VectorXd& coefs, int lag, double sign) {
    Poly out(static_cast<std::size_t>(coefs.size() * lag + 1), 0.0);
    out[0] = 1.0;
    for (Eigen::Index i = 0; i < coefs.size(); ++i) out[static_cast<std::size_t>((i + 1) * lag)] = sign * coefs(i);
    return out;
}

// w_t = c + sum alpha_k w_{t-k} + e_t + sum beta_k e_{t-k}; alpha/beta indexed from lag 1.
struct Expanded {
    std::vector<double> alpha;
    std::vector<double> beta;
};

Expanded expand(const SarimaSpec& s, const Coefs& c) {
    const Poly ar = multiply(lag_poly(c.phi, 1, -1.0), lag_poly(c.sphi, s.M, -1.0));
    const Poly ma = multiply(lag_poly(c.theta, 1, 1.0), lag_poly(c.stheta, s.M, 1.0));
    Expanded e;
    for (std::size_t k = 1; k < ar.size(); ++k) e.alpha.push_back(-ar[k]);
    for (std::size_t k = 1; k < ma.size(); ++k) e.beta.push_back(ma[k]);
    return e;
}

Poly differencing_poly(const SarimaSpec& s) {
    Poly out{1.0};
    for (int i = 0; i < s.d; ++i) out = multiply(out, Poly{1.0, -1.0});
    Poly seasonal(static_cast<std::size_t>(s.M + 1), 0.0);
    seasonal[0] = 1.0;
    seasonal[static_cast<std::size_t>(s.M)] = -1.0;
    for (int i = 0; i < s.D; ++i) out = multiply(out, seasonal);
    return out;
}

std::vector<double> difference(std::span<const double> y, const SarimaSpec& s) {
    const Poly dp = differencing_poly(s);
    const std::size_t span = dp.size() - 1;
    std::vector<double> w;
    if (y.size() <= span) return w;
    w.reserve(y.size() - span);
    for (std::size_t t = span; t < y.size(); ++t) {
        double v = 0.0;
        for (std::size_t k = 0; k < dp.size(); ++k) v += dp[k] * y[t - k];
        w.push_back(v);
    }
    return w;
}

bool explosive(const Eigen::VectorXd& coefs) {
    const Eigen::Index n = coefs.size();
    if (n == 0) return false;
    if (n == 1) return std::abs(coefs(0)) > 1.0;
    Eigen::MatrixXd companion = Eigen::MatrixXd::Zero(n, n);
    companion.row(0) = coefs.transpose();
    companion.bottomLeftCorner(n - 1, n - 1).setIdentity();
    Eigen::EigenSolver<Eigen::MatrixXd> es(companion, false);
    if (es.info() != Eigen::Success) return true;
    return es.eigenvalues().cwiseAbs().maxCoeff() > 1.0;
}

// Residuals over the whole differenced series (zeros before `start`).
// Returns false on a non-finite intermediate.
bool residual_recursion(const std::vector<double>& w, const Expanded& e, double c, std::size_t start,
                        std::vector<double>& eps) {
    eps.assign(w.size(), 0.0);
    for (std::size_t t = start; t < w.size(); ++t) {
        double pred = c;
        for (std::size_t k = 1; k <= e.alpha.size(); ++k) pred += e.alpha[k - 1] * w[t - k];
        for (std::size_t k = 1; k <= e.beta.size() && k <= t; ++k) pred += e.beta[k - 1] * eps[t - k];
        eps[t] = w[t] - pred;
        if (!std::isfinite(eps[t])) return false;
    }
    return true;
}

double css_on_differenced(const std::vector<double>& w, const SarimaSpec& s, const Coefs& c,
                          std::vector<double>* eps_out = nullptr) {
    if (explosive(c.phi) || explosive(c.sphi)) {
        return std::numeric_limits<double>::infinity();
    }
    const Expanded e = expand(s, c);
    std::vector<double> eps;
    const auto start = static_cast<std::size_t>(s.ar_span());
    if (!residual_recursion(w, e, c.c, start, eps)) {
        return std::numeric_limits<double>::infinity();
    }
    double sse = 0.0;
    for (std::size_t t = start; t < w.size(); ++t) sse += eps[t] * eps[t];
    if (!std::isfinite(sse)) return std::numeric_limits<double>::infinity();
    if (eps_out) *eps_out = std::move(eps);
    return sse;
}

// Least-squares AR(p) on the differenced series, rows t = start..n-1.
Eigen::VectorXd ar_least_squares(const std::vector<double>& w, int p, std::size_t start, bool with_const) {
    const Eigen::Index rows = static_cast<Eigen::Index>(w.size() - start);
    const Eigen::Index cols = p + (with_const ? 1 : 0);
    Eigen::VectorXd out = Eigen::VectorXd::Zero(cols);
    if (cols == 0 || rows <= 0) return out;
    Eigen::MatrixXd X(rows, cols);
    Eigen::VectorXd target(rows);
    for (Eigen::Index r = 0; r < rows; ++r) {
        const std::size_t t = start + static_cast<std::size_t>(r);
        target(r) = w[t];
        Eigen::Index j = 0;
        if (with_const) X(r, j++) = 1.0;
        for (int k = 1; k <= p; ++k) X(r, j++) = w[t - static_cast<std::size_t>(k)];
    }
    return X.colPivHouseholderQr().solve(target);
}

}  // namespace

double css_objective(std::span<const double> series, const SarimaSpec& spec, const Eigen::VectorXd& params,
                     bool include_constant) {
    spec.validate();
    const Coefs c = unpack(spec, params, include_constant);
    const auto w = difference(series, spec);
    return css_on_differenced(w, spec, c);
}

Eigen::VectorXd sarima_params(const SarimaModel& m) {
    const auto& s = m.spec;
    Eigen::VectorXd x(s.coefficient_count() + (m.include_constant ? 1 : 0));
    Eigen::Index i = 0;
    if (m.include_constant) x(i++) = m.constant;
    x.segment(i, s.p) = m.ar;
    i += s.p;
    x.segment(i, s.q) = m.ma;
    i += s.q;
    x.segment(i, s.P) = m.seasonal_ar;
    i += s.P;
    x.segment(i, s.Q) = m.seasonal_ma;
    return x;
}

SarimaModel sarima_fit(std::span<const double> series, const SarimaSpec& spec, std::uint64_t seed,
                       const SarimaFitOptions& options) {
    spec.validate();
    for (double v : series) {
        if (!std::isfinite(v)) throw DataError("SARIMA input contains non-finite values");
    }
    const auto w = difference(series, spec);
    const std::size_t needed = 10 * static_cast<std::size_t>(spec.coefficient_count() + 1);
    const auto start = static_cast<std::size_t>(spec.ar_span());
    if (w.size() < needed || w.size() <= start + 1) {
        throw DataError("SARIMA " + spec.to_string() + " needs at least " + std::to_string(needed) +
                        " points after differencing, got " + std::to_string(w.size()));
    }
    const bool with_const = options.include_constant;
    const Eigen::Index dim = spec.coefficient_count() + (with_const ? 1 : 0);

    SarimaModel m;
    m.spec = spec;
    m.include_constant = with_const;
    m.seed = seed;

    Eigen::VectorXd best;
    double best_value = std::numeric_limits<double>::infinity();
    const bool pure_ar = spec.q == 0 && spec.Q == 0 && spec.P == 0;
    if (pure_ar && !options.force_simplex) {
        best = ar_least_squares(w, spec.p, start, with_const);
        best_value = css_on_differenced(w, spec, unpack(spec, best, with_const));
        m.used_least_squares = true;
    } else {
        Eigen::VectorXd x0 = Eigen::VectorXd::Zero(dim);
        const Eigen::VectorXd ls = ar_least_squares(w, spec.p, start, with_const);
        x0.head(ls.size()) = ls;
        Eigen::Map<const Eigen::VectorXd> wv(w.data(), static_cast<Eigen::Index>(w.size()));
        const double w_sd = std::sqrt((wv.array() - wv.mean()).square().mean());
        const double const_scale = std::max(w_sd, 1e-6);
        Eigen::VectorXd step = Eigen::VectorXd::Constant(dim, 0.1);
        if (with_const) step(0) = 0.1 * const_scale;
        auto f = [&](const Eigen::VectorXd& x) { return css_on_differenced(w, spec, unpack(spec, x, with_const)); };
        if (!std::isfinite(f(x0))) {
            x0.setZero();
            if (with_const) x0(0) = wv.mean();
        }
        std::mt19937_64 rng(seed);
        std::normal_distribution<double> noise(0.0, 0.1);
        for (int r = 0; r < std::max(1, options.restarts); ++r) {
            Eigen::VectorXd start_point = x0;
            if (r > 0) {
                for (Eigen::Index i = 0; i < dim; ++i) {
                    const double scale = (with_const && i == 0) ? const_scale : 1.0;
                    start_point(i) += scale * noise(rng);
                }
            }
            auto res = detail::nelder_mead(f, start_point, step, options.max_evaluations);
            // A restarted simplex around the optimum guards against early collapse.
            auto polished = detail::nelder_mead(f, res.x, step * 0.01, options.max_evaluations);
            if (polished.value < res.value) res = polished;
            if (res.value < best_value) {
                best_value = res.value;
                best = res.x;
            }
        }
    }
    if (!std::isfinite(best_value)) {
        std::string where;
        for (Eigen::Index i = 0; i < best.size(); ++i) where += (i ? "," : "") + std::to_string(best(i));
        throw FitError("SARIMA " + spec.to_string() + " objective is non-finite at [" + where + "]");
    }

    const Coefs c = unpack(spec, best, with_const);
    m.constant = c.c;
    m.ar = c.phi;
    m.ma = c.theta;
    m.seasonal_ar = c.sphi;
    m.seasonal_ma = c.stheta;
    std::vector<double> eps;
    m.css = css_on_differenced(w, spec, c, &eps);
    m.residuals.assign(eps.begin() + static_cast<long>(start), eps.end());
    const std::size_t tail = static_cast<std::size_t>(spec.differencing_span() + spec.ar_span());
    const std::size_t tail_len = std::min(tail, series.size());
    m.training_tail.assign(series.end() - static_cast<long>(tail_len), series.end());
    const auto ma_span = static_cast<std::size_t>(spec.ma_span());
    m.residual_tail.assign(ma_span, 0.0);
    for (std::size_t k = 0; k < ma_span && k < eps.size(); ++k) {
        m.residual_tail[ma_span - 1 - k] = eps[eps.size() - 1 - k];
    }
    return m;
}

std::vector<double> sarima_forecast(const SarimaModel& model, int steps) {
    if (steps < 1) throw std::invalid_argument("forecast steps must be >= 1");
    const auto& s = model.spec;
    Coefs c{model.constant, model.ar, model.ma, model.seasonal_ar, model.seasonal_ma};
    const Expanded e = expand(s, c);
    // Levels polynomial: a(B) * (1-B)^d * (1-B^M)^D = 1 - sum A_k B^k.
    Poly ar_poly{1.0};
    for (double a : e.alpha) ar_poly.push_back(-a);
    const Poly full = multiply(ar_poly, differencing_poly(s));
    std::vector<double> y = model.training_tail;
    std::vector<double> eps = model.residual_tail;
    const std::size_t lags = full.size() - 1;
    if (y.size() < lags) {
        y.insert(y.begin(), lags - y.size(), y.empty() ? 0.0 : y.front());
    }
    std::vector<double> out;
    out.reserve(static_cast<std::size_t>(steps));
    for (int h = 0; h < steps; ++h) {
        double v = model.constant;
        for (std::size_t k = 1; k <= lags; ++k) v -= full[k] * y[y.size() - k];
        for (std::size_t k = 1; k <= e.beta.size(); ++k) {
            if (k <= eps.size()) v += e.beta[k - 1] * eps[eps.size() - k];
        }
        y.push_back(v);
        eps.push_back(0.0);
        out.push_back(v);
    }
    return out;
}

std::vector<double> sarima_one_step(const SarimaModel& model, std::span<const double> series, std::size_t from) {
    const auto& s = model.spec;
    const auto dspan = static_cast<std::size_t>(s.differencing_span());
    const auto start = static_cast<std::size_t>(s.ar_span());
    if (from < dspan + start || from > series.size()) {
        throw std::invalid_argument("sarima_one_step: first prediction index " + std::to_string(from) +
                                    " precedes the first usable index " + std::to_string(dspan + start));
    }
    const auto w = difference(series, s);
    Coefs c{model.constant, model.ar, model.ma, model.seasonal_ar, model.seasonal_ma};
    std::vector<double> eps;
    if (!residual_recursion(w, expand(s, c), model.constant, start, eps)) {
        throw FitError("SARIMA residual recursion diverged");
    }
    std::vector<double> out;
    out.reserve(series.size() - from);
    for (std::size_t t = from; t < series.size(); ++t) out.push_back(series[t] - eps[t - dspan]);
    return out;
}

namespace {
std::vector<double> vec(const Eigen::VectorXd& v) { return {v.data(), v.data() + v.size()}; }
Eigen::VectorXd vec(const std::vector<double>& v) {
    return Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
}
}  // namespace

nlohmann::json to_json(const SarimaModel& m) {
    const auto& s = m.spec;
    return {
        {"family", "sarima"},
        {"hyperparams",
         {{"p", s.p}, {"d", s.d}, {"q", s.q}, {"P", s.P}, {"D", s.D}, {"Q", s.Q}, {"M", s.M},
          {"include_constant", m.include_constant}}},
        {"ar", vec(m.ar)},
        {"ma", vec(m.ma)},
        {"seasonal_ar", vec(m.seasonal_ar)},
        {"seasonal_ma", vec(m.seasonal_ma)},
        {"constant", m.constant},
        {"css", m.css},
        {"training_tail", m.training_tail},
        {"residual_tail", m.residual_tail},
        {"residuals", m.residuals},
        {"seed", m.seed},
    };
}

SarimaModel sarima_model_from_json(const nlohmann::json& j) {
    if (j.at("family").get<std::string>() != "sarima") {
        throw std::invalid_argument("not a sarima model");
    }
    SarimaModel m;
    const auto& h = j.at("hyperparams");
    m.spec = {h.at("p"), h.at("d"), h.at("q"), h.at("P"), h.at("D"), h.at("Q"), h.at("M")};
    m.spec.validate();
    m.include_constant = h.value("include_constant", true);
    m.ar = vec(j.at("ar").get<std::vector<double>>());
    m.ma = vec(j.at("ma").get<std::vector<double>>());
    m.seasonal_ar = vec(j.at("seasonal_ar").get<std::vector<double>>());
    m.seasonal_ma = vec(j.at("seasonal_ma").get<std::vector<double>>());
    m.constant = j.at("constant");
    m.css = j.value("css", 0.0);
    m.training_tail = j.at("training_tail").get<std::vector<double>>();
    m.residual_tail = j.at("residual_tail").get<std::vector<double>>();
    m.residuals = j.value("residuals", std::vector<double>{});
    m.seed = j.value("seed", std::uint64_t{0});
    return m;
}

}  // namespace porkcast
