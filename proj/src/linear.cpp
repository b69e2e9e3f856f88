#include "porkcast/linear.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <vector>

#include <Eigen/Cholesky>

#include "porkcast/errors.hpp"

namespace porkcast {

namespace {

void check_xy(const Eigen::MatrixXd& X, const Eigen::VectorXd& y) {
    if (X.rows() < 1 || X.cols() < 1) {
        throw std::invalid_argument("design matrix needs at least one row and one column");
    }
    if (X.rows() != y.size()) {
        throw std::invalid_argument("X has " + std::to_string(X.rows()) + " rows but y has " +
                                    std::to_string(y.size()));
    }
    if (!X.allFinite() || !y.allFinite()) {
        throw std::invalid_argument("non-finite values in regression inputs");
    }
}

double median_of(const Eigen::VectorXd& v) {
    std::vector<double> s(v.data(), v.data() + v.size());
    std::sort(s.begin(), s.end());
    const std::size_t n = s.size();
    return n % 2 == 1 ? s[n / 2] : 0.5 * (s[n / 2 - 1] + s[n / 2]);
}

}  // namespace

LinearModel ridge_fit(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, double alpha) {
    check_xy(X, y);
    if (!(alpha >= 0.0) || !std::isfinite(alpha)) {
        throw std::invalid_argument("ridge alpha must be finite and >= 0");
    }
    const Eigen::RowVectorXd x_mean = X.colwise().mean();
    const double y_mean = y.mean();
    const Eigen::MatrixXd Xc = X.rowwise() - x_mean;
    const Eigen::VectorXd yc = y.array() - y_mean;

    Eigen::MatrixXd gram = Xc.transpose() * Xc;
    gram.diagonal().array() += alpha;
    Eigen::LLT<Eigen::MatrixXd> llt(gram);
    const double scale = std::max(gram.diagonal().maxCoeff(), 1e-300);
    if (llt.info() != Eigen::Success) {
        throw FitError("ridge system is singular (alpha = " + std::to_string(alpha) + ")");
    }
    const Eigen::VectorXd l_diag = llt.matrixLLT().diagonal();
    if (l_diag.minCoeff() * l_diag.minCoeff() <= 1e-13 * scale) {
        throw FitError("ridge system is numerically singular (alpha = " + std::to_string(alpha) +
                       "); the design matrix is rank deficient");
    }
    LinearModel m;
    m.family = LinearFamily::Ridge;
    m.alpha = alpha;
    m.weights = llt.solve(Xc.transpose() * yc);
    m.intercept = y_mean - x_mean.dot(m.weights);
    if (!m.weights.allFinite() || !std::isfinite(m.intercept)) {
        throw FitError("ridge solution is not finite");
    }
    m.objective = ridge_objective(X, y, m.weights, m.intercept, alpha);
    return m;
}

double ridge_objective(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, const Eigen::VectorXd& w, double b,
                       double alpha) {
    const Eigen::VectorXd r = y - X * w - Eigen::VectorXd::Constant(y.size(), b);
    return r.squaredNorm() + alpha * w.squaredNorm();
}

double svr_objective(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, const Eigen::VectorXd& w, double b,
                     double C, double epsilon) {
    const Eigen::ArrayXd r = (y - X * w).array() - b;
    return 0.5 * w.squaredNorm() + C * (r.abs() - epsilon).max(0.0).sum();
}

LinearModel svr_fit(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, const SvrOptions& options,
                    std::uint64_t seed) {
    check_xy(X, y);
    if (!(options.C > 0.0) || !(options.epsilon >= 0.0) || options.max_iter < 1) {
        throw std::invalid_argument("SVR needs C > 0, epsilon >= 0 and at least one iteration");
    }
    const Eigen::Index n = X.rows();
    const Eigen::Index d = X.cols();
    const double C = options.C;
    const double eps = options.epsilon;

    // Centering (and optional scaling) is a reparameterization: with x = mu + s * z,
    // w = v / s and b = c - mu . w leave x w + b unchanged. Note 0.5 ||w||^2 is
    // evaluated on the original weights, so the scaled problem is the same problem.
    const Eigen::RowVectorXd mu = X.colwise().mean();
    Eigen::RowVectorXd s = Eigen::RowVectorXd::Ones(d);
    if (options.standardize) {
        const Eigen::MatrixXd centered = X.rowwise() - mu;
        for (Eigen::Index j = 0; j < d; ++j) {
            const double sd = std::sqrt(centered.col(j).squaredNorm() / static_cast<double>(n));
            s(j) = sd > 0.0 ? sd : 1.0;
        }
    }
    const Eigen::MatrixXd Z = (X.rowwise() - mu).array().rowwise() / s.array();
    const Eigen::ArrayXd inv_s2 = s.array().square().inverse().transpose();

    // Objective in (v, c): 0.5 * sum (v_j / s_j)^2 + C * hinge(y - Z v - c).
    auto objective = [&](const Eigen::VectorXd& v, double c) {
        const Eigen::ArrayXd r = (y - Z * v).array() - c;
        return 0.5 * (v.array().square() * inv_s2).sum() + C * (r.abs() - eps).max(0.0).sum();
    };

    Eigen::VectorXd v = Eigen::VectorXd::Zero(d);
    double c = median_of(y);
    Eigen::VectorXd best_v = v;
    double best_c = c;
    double best_obj = objective(v, c);
    Eigen::VectorXd avg_v = Eigen::VectorXd::Zero(d);
    double avg_c = 0.0;
    long avg_count = 0;

    const double y_range = y.maxCoeff() - y.minCoeff();
    const double radius = std::max({1.0, y_range, std::abs(c)});
    const double eta0 = 0.5 * radius;

    const Eigen::Index batch = std::min<Eigen::Index>(n, 64);
    std::mt19937_64 rng(seed);
    std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
    std::iota(order.begin(), order.end(), Eigen::Index{0});
    std::size_t cursor = order.size();
    const int eval_every = batch == n ? 1 : 8;
    const int tail_start = options.max_iter - options.max_iter / 10;
    double best_at_tail = best_obj;

    Eigen::VectorXd gv(d);
    for (int k = 1; k <= options.max_iter; ++k) {
        // Subgradient, rescaled from the mini-batch to the full sum.
        gv = (v.array() * inv_s2).matrix();
        double gc = 0.0;
        double hinge_scale = C;
        auto accumulate = [&](Eigen::Index i) {
            const double r = y(i) - Z.row(i).dot(v) - c;
            if (std::abs(r) > eps) {
                const double sg = r > 0 ? 1.0 : -1.0;
                gv.noalias() -= hinge_scale * sg * Z.row(i).transpose();
                gc -= hinge_scale * sg;
            }
        };
        if (batch == n) {
            for (Eigen::Index i = 0; i < n; ++i) accumulate(i);
        } else {
            hinge_scale = C * static_cast<double>(n) / static_cast<double>(batch);
            for (Eigen::Index b = 0; b < batch; ++b) {
                if (cursor == order.size()) {
                    std::shuffle(order.begin(), order.end(), rng);
                    cursor = 0;
                }
                accumulate(order[cursor++]);
            }
        }
        const double gnorm = std::sqrt(gv.squaredNorm() + gc * gc);
        if (gnorm == 0.0) {
            break;
        }
        const double step = eta0 / std::sqrt(static_cast<double>(k)) / gnorm;
        v -= step * gv;
        c -= step * gc;
        if (k > options.max_iter / 2) {
            avg_v += v;
            avg_c += c;
            ++avg_count;
        }
        if (k % eval_every == 0) {
            const double obj = objective(v, c);
            if (obj < best_obj) {
                best_obj = obj;
                best_v = v;
                best_c = c;
            }
        }
        if (k == tail_start) {
            best_at_tail = best_obj;
        }
    }
    bool converged = true;
    if (avg_count > 0) {
        avg_v /= static_cast<double>(avg_count);
        avg_c /= static_cast<double>(avg_count);
        const double avg_obj = objective(avg_v, avg_c);
        if (avg_obj < best_obj) {
            best_obj = avg_obj;
            best_v = avg_v;
            best_c = avg_c;
        }
        converged = best_at_tail - best_obj <= 1e-3 * std::max(std::abs(best_obj), 1e-12);
    }

    LinearModel m;
    m.family = LinearFamily::LinearSVR;
    m.C = C;
    m.epsilon = eps;
    m.seed = seed;
    m.weights = (best_v.array() / s.transpose().array()).matrix();
    m.intercept = best_c - mu.dot(m.weights);
    m.converged = converged;
    m.objective = svr_objective(X, y, m.weights, m.intercept, C, eps);
    if (!m.weights.allFinite() || !std::isfinite(m.intercept)) {
        throw FitError("SVR produced non-finite parameters");
    }
    return m;
}

Eigen::VectorXd linear_predict(const LinearModel& model, const Eigen::MatrixXd& X) {
    if (X.cols() != model.weights.size()) {
        throw std::invalid_argument("linear_predict: model has " + std::to_string(model.weights.size()) +
                                    " weights but input has " + std::to_string(X.cols()) + " columns");
    }
    Eigen::VectorXd out = X * model.weights;
    out.array() += model.intercept;
    return out;
}

nlohmann::json to_json(const LinearModel& model) {
    nlohmann::json j;
    j["family"] = model.family == LinearFamily::Ridge ? "ridge" : "linear_svr";
    if (model.family == LinearFamily::Ridge) {
        j["hyperparams"] = {{"alpha", model.alpha}};
    } else {
        j["hyperparams"] = {{"C", model.C}, {"epsilon", model.epsilon}};
    }
    j["weights"] = std::vector<double>(model.weights.data(), model.weights.data() + model.weights.size());
    j["intercept"] = model.intercept;
    j["seed"] = model.seed;
    j["converged"] = model.converged;
    return j;
}

LinearModel linear_model_from_json(const nlohmann::json& j) {
    LinearModel m;
    const auto family = j.at("family").get<std::string>();
    if (family == "ridge") {
        m.family = LinearFamily::Ridge;
        m.alpha = j.at("hyperparams").at("alpha").get<double>();
    } else if (family == "linear_svr") {
        m.family = LinearFamily::LinearSVR;
        m.C = j.at("hyperparams").at("C").get<double>();
        m.epsilon = j.at("hyperparams").at("epsilon").get<double>();
    } else {
        throw std::invalid_argument("not a linear model family: " + family);
    }
    const auto w = j.at("weights").get<std::vector<double>>();
    m.weights = Eigen::Map<const Eigen::VectorXd>(w.data(), static_cast<Eigen::Index>(w.size()));
    m.intercept = j.at("intercept").get<double>();
    m.seed = j.value("seed", std::uint64_t{0});
    m.converged = j.value("converged", true);
    return m;
}

}  // namespace porkcast
