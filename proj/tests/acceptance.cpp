// Acceptance suite: one PASS/FAIL line per criterion, exit status 1 if any fails.
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <iostream>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "porkcast/analysis.hpp"
#include "porkcast/cli.hpp"
#include "porkcast/evaluation.hpp"
#include "porkcast/linear.hpp"
#include "porkcast/models.hpp"
#include "porkcast/neural.hpp"
#include "porkcast/sarima.hpp"
#include "porkcast/synthetic.hpp"
#include "porkcast/windowing.hpp"
#include "test_util.hpp"

using namespace porkcast;

namespace {

struct Outcome {
    enum class Status { Pass, Fail, Skip } status = Status::Fail;
    std::string detail;
};

Outcome pass_if(bool ok, std::string detail) { return {ok ? Outcome::Status::Pass : Outcome::Status::Fail, std::move(detail)}; }

int g_failures = 0;

void criterion(const std::string& name, double limit_seconds, const std::function<Outcome()>& body) {
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
        o = body();
    } catch (const std::exception& e) {
        o = {Outcome::Status::Fail, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (o.status == Outcome::Status::Pass && limit_seconds > 0 && secs >= limit_seconds) {
        o.status = Outcome::Status::Fail;
        o.detail += "; over the " + std::to_string(static_cast<int>(limit_seconds)) + " s budget";
    }
    const char* tag = o.status == Outcome::Status::Pass ? "PASS" : o.status == Outcome::Status::Fail ? "FAIL" : "SKIP";
    if (o.status == Outcome::Status::Fail) ++g_failures;
    char time_buf[32];
    std::snprintf(time_buf, sizeof time_buf, "%.1f s", secs);
    std::cout << tag << "  " << name << "  (" << o.detail << "; " << time_buf << ")" << std::endl;
}

std::string fmt(double v, int digits = 3) {
    std::ostringstream ss;
    ss.precision(digits);
    ss << v;
    return ss.str();
}

// Reports produced along the way, checked for metric identities and scenario invariance.
std::vector<nlohmann::json> g_reports;

// ---------------------------------------------------------------- ridge

// Cyclic coordinate descent on the centered ridge objective, run to a fixed point.
Eigen::VectorXd ridge_coordinate_descent(const Eigen::MatrixXd& Xc, const Eigen::VectorXd& yc, double alpha) {
    const Eigen::Index p = Xc.cols();
    Eigen::VectorXd w = Eigen::VectorXd::Zero(p);
    Eigen::VectorXd r = yc;
    const Eigen::VectorXd col_sq = Xc.colwise().squaredNorm();
    for (int sweep = 0; sweep < 100000; ++sweep) {
        double max_step = 0.0;
        for (Eigen::Index j = 0; j < p; ++j) {
            const double rho = Xc.col(j).dot(r) + col_sq(j) * w(j);
            const double wj = rho / (col_sq(j) + alpha);
            const double step = wj - w(j);
            if (step != 0.0) {
                r -= step * Xc.col(j);
                w(j) = wj;
            }
            max_step = std::max(max_step, std::abs(step));
        }
        if (max_step < 1e-15) break;
    }
    return w;
}

Outcome ridge_oracle() {
    std::mt19937_64 rng(2024);
    std::normal_distribution<double> g(0.0, 1.0);
    std::uniform_real_distribution<double> log_alpha(-3.0, 2.0);
    double worst_residual = 0.0;
    double worst_weight = 0.0;
    for (int problem = 0; problem < 100; ++problem) {
        Eigen::MatrixXd X(50, 8);
        Eigen::VectorXd y(50);
        Eigen::VectorXd beta(8);
        for (auto& b : beta) b = g(rng);
        for (Eigen::Index i = 0; i < 50; ++i) {
            for (Eigen::Index j = 0; j < 8; ++j) X(i, j) = 1.3 + 0.2 * g(rng);
        }
        y = X * beta + 0.1 * Eigen::VectorXd::NullaryExpr(50, [&] { return g(rng); });
        const double alpha = std::pow(10.0, log_alpha(rng));
        const auto m = ridge_fit(X, y, alpha);

        const Eigen::MatrixXd Xc = X.rowwise() - X.colwise().mean();
        const Eigen::VectorXd yc = y.array() - y.mean();
        Eigen::MatrixXd A = Xc.transpose() * Xc;
        A.diagonal().array() += alpha;
        const Eigen::VectorXd rhs = Xc.transpose() * yc;
        worst_residual = std::max(worst_residual, (A * m.weights - rhs).norm() / rhs.norm());
        const Eigen::VectorXd w = ridge_coordinate_descent(Xc, yc, alpha);
        worst_weight = std::max(worst_weight, (w - m.weights).cwiseAbs().maxCoeff());
        const double b = y.mean() - X.colwise().mean().dot(w);
        worst_weight = std::max(worst_weight, std::abs(b - m.intercept));
    }
    return pass_if(worst_residual < 1e-8 && worst_weight < 1e-6,
                   "100 problems 50x8, max relative residual " + fmt(worst_residual) + ", max |w - w_cd| " +
                       fmt(worst_weight));
}

// ---------------------------------------------------------------- sarima

std::vector<double> arma_series(double phi, double theta, std::size_t n, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> e(0.0, 1.0);
    std::vector<double> y;
    y.reserve(n);
    double prev_y = 0.0, prev_e = 0.0;
    for (std::size_t t = 0; t < n + 500; ++t) {
        const double shock = e(rng);
        const double v = phi * prev_y + shock + theta * prev_e;
        prev_y = v;
        prev_e = shock;
        if (t >= 500) y.push_back(v);
    }
    return y;
}

Outcome sarima_recovery() {
    int ar_ok = 0;
    int ma_ok = 0;
    for (std::uint64_t seed = 0; seed < 100; ++seed) {
        const auto ar = sarima_fit(arma_series(0.8, 0.0, 2000, 10'000 + seed), SarimaSpec{1, 0, 0, 0, 0, 0, 1}, seed);
        ar_ok += std::abs(ar.ar(0) - 0.8) <= 0.05;
        const auto ma = sarima_fit(arma_series(0.0, 0.5, 2000, 20'000 + seed), SarimaSpec{0, 0, 1, 0, 0, 0, 1}, seed);
        ma_ok += std::abs(ma.ma(0) - 0.5) <= 0.05;
    }
    return pass_if(ar_ok >= 95 && ma_ok >= 95,
                   "AR(1) 0.8 within 0.05 in " + std::to_string(ar_ok) + "/100, MA(1) 0.5 within 0.05 in " +
                       std::to_string(ma_ok) + "/100");
}

// ---------------------------------------------------------------- neural

Outcome gradient_checks() {
    std::mt19937_64 rng(77);
    std::normal_distribution<double> g(0.0, 1.0);
    double worst = 0.0;
    int checked = 0;
    for (NetKind kind : {NetKind::RNN, NetKind::LSTM}) {
        for (int i = 0; i < 20; ++i) {
            NetSpec spec;
            spec.kind = kind;
            spec.dropout = 0.0;
            spec.activation = (i % 2 == 0) ? Activation::Tanh : Activation::ReLU;
            spec.layer_sizes.clear();
            const int depth = 1 + static_cast<int>(rng() % 2);
            for (int d = 0; d < depth; ++d) spec.layer_sizes.push_back(2 + static_cast<int>(rng() % 4));
            spec.layer_sizes.push_back(1);
            const InputLayout layout{1 + static_cast<int>(rng() % 4), 1 + static_cast<int>(rng() % 3)};
            auto model = net_init(spec, layout, rng());
            // Zero biases can sit a dead ReLU unit exactly on its kink, where finite differences mean nothing.
            for (Eigen::Index k = 0; k < model.parameters.size(); ++k) {
                if (model.parameters(k) == 0.0) model.parameters(k) = 0.1 * g(rng);
            }
            Eigen::MatrixXd x(layout.time_steps, layout.step_features);
            for (Eigen::Index r = 0; r < x.rows(); ++r) {
                for (Eigen::Index c = 0; c < x.cols(); ++c) x(r, c) = g(rng);
            }
            worst = std::max(worst, gradient_check(model, x, g(rng)));
            ++checked;
        }
    }
    return pass_if(worst < 1e-4, std::to_string(checked) + " configurations, max relative error " + fmt(worst));
}

// ---------------------------------------------------------------- leakage

Outcome no_leakage() {
    // Each cell encodes its (week, market) so features can be traced to their source.
    const auto cal = PublicationCalendar::spanish_default();
    PricePanel panel;
    const std::vector<std::string> ids = {"ES-BARCELONA", "ES-HUESCA",    "ES-LLEIDA",  "ES-MURCIA",
                                          "ES-PONTEVEDRA", "ES-SALAMANCA", "ES-SEGOVIA", "ES-ZARAGOZA"};
    for (const auto& m : ids) panel.markets.emplace_back(m);
    panel.values.resize(322, 8);
    panel.fill_flags.setConstant(322, 8, false);
    for (int t = 0; t < 322; ++t) {
        panel.weeks.push_back(week_add(IsoWeek(2016, 1), t));
        for (int j = 0; j < 8; ++j) panel.values(t, j) = 1000.0 * (t + 1) + j;
    }
    const Weekday target_day = cal.weekday_of("ES-LLEIDA");
    long cells = 0;
    long violations = 0;
    for (const auto& sc : {LagScenario::public_delayed(2), LagScenario::subscription()}) {
        for (int window = 2; window <= 12; ++window) {
            const auto ds = build_dataset(panel, MarketId("ES-LLEIDA"), window, sc, cal);
            for (Eigen::Index i = 0; i < ds.features.rows(); ++i) {
                const long target_idx = std::lround(ds.targets(i)) / 1000 - 1;
                for (Eigen::Index c = 0; c < ds.features.cols(); ++c) {
                    const long code = std::lround(ds.features(i, c));
                    const long week_idx = code / 1000 - 1;
                    const std::size_t market = static_cast<std::size_t>(code % 1000);
                    const long age = target_idx - week_idx;
                    // Published strictly before the target's decision: an earlier week, or the same
                    // week on an earlier weekday when same-week data is bought.
                    bool available = false;
                    if (sc.kind == LagScenario::Kind::PublicDelayed) {
                        available = age >= sc.delay_weeks;
                    } else {
                        available = age >= 1 || (age == 0 && static_cast<int>(cal.weekday_of(ids[market])) <
                                                                 static_cast<int>(target_day));
                    }
                    violations += !available;
                    ++cells;
                }
            }
        }
    }
    const auto pub = build_dataset(panel, MarketId("ES-LLEIDA"), 2, LagScenario::public_delayed(2), cal).samples();
    const auto sub = build_dataset(panel, MarketId("ES-LLEIDA"), 2, LagScenario::subscription(), cal).samples();
    return pass_if(violations == 0 && pub == 319 && sub == 320,
                   std::to_string(cells) + " feature cells, " + std::to_string(violations) +
                       " violations; samples public/w2 " + std::to_string(pub) + ", subscription/w2 " +
                       std::to_string(sub));
}

// ---------------------------------------------------------------- central claim

Outcome central_claim() {
    int wins = 0;
    double sum_pub = 0.0, sum_sub = 0.0;
    for (std::uint64_t seed = 0; seed < 100; ++seed) {
        const auto panel = synthetic_panel(1000 + seed);
        EvaluationOptions opt;
        opt.models = {ModelFamily::Ridge};
        opt.trials = 20;
        opt.seed = seed;
        const auto report = scenario_report(panel, MarketId("ES-LLEIDA"), opt);
        double pub = 0.0, sub = 0.0;
        for (const auto& row : report.rows) {
            if (row.scenario == "public") pub = row.rmse;
            if (row.scenario == "subscription") sub = row.rmse;
        }
        wins += sub < pub;
        sum_pub += pub;
        sum_sub += sub;
        g_reports.push_back(report.to_json());
    }
    return pass_if(wins >= 95, "subscription RMSE below public in " + std::to_string(wins) +
                                   "/100 seeds; mean RMSE public " + fmt(sum_pub / 100, 4) + ", subscription " +
                                   fmt(sum_sub / 100, 4));
}

// ---------------------------------------------------------------- real data

Outcome real_data() {
    const char* path = std::getenv("PORKCAST_REAL_CSV");
    if (!path || !*path) return {Outcome::Status::Skip, "set PORKCAST_REAL_CSV to a public-format price CSV"};
    std::ifstream in(path, std::ios::binary);
    if (!in) return {Outcome::Status::Fail, std::string("cannot read ") + path};
    std::stringstream ss;
    ss << in.rdbuf();
    std::vector<MarketSeries> repaired;
    for (const auto& s : parse_price_csv(ss.str())) repaired.push_back(repair_outliers(s).series);
    const auto panel = align_panel(repaired).panel;
    auto params = reference_params(ModelFamily::Ridge);
    params["window"] = std::int64_t{2};
    const auto ds = build_dataset(panel, MarketId("ES-LLEIDA"), 2, LagScenario::public_delayed(2),
                                  PublicationCalendar::spanish_default());
    const auto [train, test] = chrono_split(ds);
    const auto model = fit_tabular(ModelFamily::Ridge, train, params, 7);
    const double score = r2(test.targets, predict_tabular(model, test.features));
    return pass_if(score >= 0.95, std::to_string(panel.rows()) + " weeks, public Ridge window 2 test R2 " + fmt(score, 5));
}

// ---------------------------------------------------------------- metrics

Outcome metric_identities() {
    std::mt19937_64 rng(5);
    std::normal_distribution<double> g(1.3, 0.1);
    double worst_mean = 0.0, worst_perfect = 0.0;
    for (int i = 0; i < 1000; ++i) {
        Eigen::VectorXd y(2 + static_cast<Eigen::Index>(rng() % 200));
        for (auto& v : y) v = g(rng);
        worst_mean = std::max(worst_mean, std::abs(r2(y, Eigen::VectorXd::Constant(y.size(), y.mean()))));
        worst_perfect = std::max(worst_perfect, rmse(y, y));
    }
    double worst_row = 0.0;
    std::size_t rows = 0;
    for (const auto& report : g_reports) {
        for (const auto& row : report.at("rows")) {
            if (!row.at("ok").get<bool>()) continue;
            const double e = row.at("rmse");
            const double n = row.at("test_samples");
            const double sst = row.at("sst");
            worst_row = std::max(worst_row, std::abs(row.at("r2").get<double>() - (1.0 - e * e * n / sst)));
            ++rows;
        }
    }
    return pass_if(worst_mean <= 1e-12 && worst_perfect <= 1e-12 && worst_row <= 1e-12 && rows > 0,
                   "|R2(mean)| " + fmt(worst_mean) + ", RMSE(perfect) " + fmt(worst_perfect) + ", " +
                       std::to_string(rows) + " report rows, max |R2 - (1 - rmse^2 n / SStot)| " + fmt(worst_row));
}

// ---------------------------------------------------------------- ADF

Outcome adf_calibration() {
    int rejected = 0;
    int kept = 0;
    for (std::uint64_t seed = 0; seed < 100; ++seed) {
        rejected += adf_test(arma_series(0.5, 0.0, 300, 30'000 + seed)).rejects(Significance::Pct5);
        std::mt19937_64 rng(40'000 + seed);
        std::normal_distribution<double> e(0.0, 1.0);
        std::vector<double> walk(300);
        double x = 0.0;
        for (auto& v : walk) v = (x += e(rng));
        kept += !adf_test(walk).rejects(Significance::Pct5);
    }
    return pass_if(rejected >= 90 && kept >= 90, "AR(1) 0.5 rejected in " + std::to_string(rejected) +
                                                     "/100, random walk not rejected in " + std::to_string(kept) +
                                                     "/100");
}

// ---------------------------------------------------------------- end to end

std::string slurp(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

struct E2ERun {
    int code = 0;
    std::string out;
    std::string json;
};

E2ERun run_evaluate(const std::filesystem::path& prefix, int threads) {
    const std::vector<std::string> args = {"evaluate", "--data",  (test::source_dir() / "data" / "sample").string(),
                                           "--scenario", "both",   "--models",
                                           "all",        "--trials", "50",
                                           "--seed",     "7",       "--threads",
                                           std::to_string(threads), "--out", prefix.string()};
    std::ostringstream out, err;
    E2ERun r;
    r.code = run_command(args, out, err);
    r.out = out.str();
    r.json = slurp(prefix.string() + ".json");
    return r;
}

Outcome end_to_end() {
    test::TempDir dir("acceptance");
    const int n = static_cast<int>(std::max(2u, std::thread::hardware_concurrency()));
    const auto a = run_evaluate(dir.path() / "a", 1);
    const auto b = run_evaluate(dir.path() / "b", 1);
    const auto c = run_evaluate(dir.path() / "c", n);
    if (a.code != 0 || b.code != 0 || c.code != 0) {
        return {Outcome::Status::Fail, "evaluate exited with " + std::to_string(a.code) + "/" +
                                           std::to_string(b.code) + "/" + std::to_string(c.code)};
    }
    g_reports.push_back(nlohmann::json::parse(a.json));
    const bool same = a.out == b.out && a.out == c.out && a.json == b.json && a.json == c.json;
    return pass_if(same && !a.out.empty(), std::string(same ? "byte-identical" : "outputs differ") +
                                               " stdout and JSON over 2 runs at 1 thread and 1 run at " +
                                               std::to_string(n) + " threads");
}

// ---------------------------------------------------------------- invariance

Outcome arima_invariance() {
    std::set<std::string> single;
    for (const auto& f : model_families()) {
        if (f.single_series) single.insert(f.id);
    }
    std::size_t checked = 0;
    std::size_t mismatches = 0;
    std::size_t unpaired = 0;
    for (const auto& report : g_reports) {
        std::map<std::string, nlohmann::json> first;
        std::map<std::string, int> seen;
        for (auto row : report.at("rows")) {
            const std::string family = row.at("family");
            if (!single.count(family)) continue;
            ++seen[family];
            row.erase("scenario");
            const auto [it, inserted] = first.emplace(family, row);
            if (!inserted) {
                ++checked;
                mismatches += it->second != row;
            }
        }
        for (const auto& [family, n] : seen) unpaired += n < 2;
    }
    return pass_if(checked > 0 && mismatches == 0 && unpaired == 0,
                   std::to_string(checked) + " single-series row pairs compared across scenarios, " +
                       std::to_string(mismatches) + " differ, " + std::to_string(unpaired) + " unpaired");
}

}  // namespace

int main() {
    std::cout << "porkcast acceptance" << std::endl;
    criterion("ridge-oracle", 5, ridge_oracle);
    criterion("sarima-recovery", 120, sarima_recovery);
    criterion("neural-gradient-check", 120, gradient_checks);
    criterion("no-leakage", 0, no_leakage);
    criterion("subscription-beats-public", 180, central_claim);
    criterion("real-data-r2", 60, real_data);
    criterion("end-to-end-determinism", 600, end_to_end);
    criterion("arima-scenario-invariance", 0, arima_invariance);
    criterion("metric-identities", 0, metric_identities);
    criterion("adf-calibration", 60, adf_calibration);
    std::cout << (g_failures == 0 ? "all criteria met" : std::to_string(g_failures) + " criteria failed") << std::endl;
    return g_failures == 0 ? 0 : 1;
}
