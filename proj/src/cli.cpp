#include "porkcast/cli.hpp"

#include <atomic>
#include <csignal>
#include <cstdio>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <thread>

#include <CLI11.hpp>

#include "porkcast/analysis.hpp"
#include "porkcast/api.hpp"
#include "porkcast/config.hpp"
#include "porkcast/errors.hpp"
#include "porkcast/evaluation.hpp"
#include "porkcast/models.hpp"
#include "porkcast/service.hpp"
#include "porkcast/store.hpp"
#include "porkcast/windowing.hpp"

namespace porkcast {

namespace {

/// Bad flag values found after parsing.
class UsageError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct GlobalOptions {
    std::string config;
    std::string data;
    std::uint64_t seed = 7;
    std::string out;
    int threads = 1;
    std::string target;
};

struct Inputs {
    ServiceConfig config;
    bool has_config = false;
    std::vector<MarketSeries> series;
    std::string target;
};

std::string read_file(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    if (!in) throw DataError("cannot read " + p.string());
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_file(const std::filesystem::path& p, const std::string& text) {
    if (p.has_parent_path()) std::filesystem::create_directories(p.parent_path());
    std::ofstream out(p, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write " + p.string());
    out << text;
}

/// Concatenates per-file series of the same market; duplicate weeks are a data error.
std::vector<MarketSeries> merge_series(std::vector<MarketSeries> parts) {
    std::map<std::string, MarketSeries> by_market;
    for (auto& s : parts) {
        auto& dst = by_market[s.market.id];
        if (dst.market.id.empty()) dst.market = s.market;
        dst.observations.insert(dst.observations.end(), s.observations.begin(), s.observations.end());
    }
    std::vector<MarketSeries> out;
    for (auto& [id, s] : by_market) {
        std::sort(s.observations.begin(), s.observations.end(),
                  [](const PriceObservation& a, const PriceObservation& b) { return a.week < b.week; });
        for (std::size_t i = 1; i < s.observations.size(); ++i) {
            if (s.observations[i].week == s.observations[i - 1].week) {
                throw DataError(id + " has two prices for " + s.observations[i].week.to_string());
            }
        }
        out.push_back(std::move(s));
    }
    return out;
}

Inputs load_inputs(const GlobalOptions& g, bool need_data = true) {
    Inputs in;
    if (!g.config.empty()) {
        in.config = load_config(g.config);
        in.has_config = true;
    }
    in.target = g.target.empty() ? in.config.target_market : g.target;
    if (!need_data) return in;
    std::vector<MarketSeries> parts;
    if (!g.data.empty()) {
        const std::filesystem::path p(g.data);
        if (!std::filesystem::exists(p)) throw DataError("data path " + p.string() + " does not exist");
        std::vector<std::filesystem::path> files;
        if (std::filesystem::is_directory(p)) {
            for (const auto& e : std::filesystem::directory_iterator(p)) {
                if (e.is_regular_file() && e.path().extension() == ".csv") files.push_back(e.path());
            }
            std::sort(files.begin(), files.end());
            if (files.empty()) throw DataError("no .csv files in " + p.string());
        } else {
            files.push_back(p);
        }
        for (const auto& f : files) {
            try {
                auto s = parse_price_csv(read_file(f));
                parts.insert(parts.end(), s.begin(), s.end());
            } catch (const ParseError& e) {
                throw DataError(f.string() + ": " + e.what());
            }
        }
    } else if (!in.config.sources.empty()) {
        for (const auto& src : in.config.sources) {
            auto s = parse_price_csv(fetch_source(src));
            parts.insert(parts.end(), s.begin(), s.end());
        }
    } else {
        throw UsageError("no input data: pass --data PATH or a --config with sources");
    }
    in.series = merge_series(std::move(parts));
    return in;
}

struct CleanPanel {
    PricePanel panel;
    RepairLog repairs;
    std::vector<GapFill> gaps;
};

CleanPanel clean_panel(const std::vector<MarketSeries>& series, double threshold) {
    CleanPanel c;
    std::vector<MarketSeries> repaired;
    for (const auto& s : series) {
        const auto report = validate_series(s);
        if (!report.ok()) throw DataError(s.market.id + ": " + report.violations.front().message);
        RepairResult r = repair_outliers(s, threshold);
        c.repairs.insert(c.repairs.end(), r.log.begin(), r.log.end());
        repaired.push_back(std::move(r.series));
    }
    AlignResult a = align_panel(repaired);
    c.panel = std::move(a.panel);
    c.gaps = std::move(a.gaps);
    return c;
}

std::vector<LagScenario> parse_scenarios(const std::string& s) {
    if (s == "both") return {LagScenario::public_delayed(2), LagScenario::subscription()};
    return {LagScenario::parse(s)};
}

std::string fixed(double v, int decimals) {
    char buf[48];
    std::snprintf(buf, sizeof buf, "%.*f", decimals, v);
    return buf;
}

std::string params_text(const Params& p) {
    std::string out;
    for (const auto& [k, v] : p) {
        if (!out.empty()) out += ' ';
        out += k + "=" + to_string(v);
    }
    return out;
}

/// `--out` as a prefix: "report", "report.txt" and "report.json" all give report.txt + report.json.
std::pair<std::filesystem::path, std::filesystem::path> artifact_paths(const std::string& out) {
    std::filesystem::path base(out);
    if (base.extension() == ".txt" || base.extension() == ".json") base.replace_extension();
    auto txt = base;
    auto json = base;
    txt += ".txt";
    json += ".json";
    return {txt, json};
}

std::atomic<bool> g_stop{false};
extern "C" void on_signal(int) { g_stop = true; }

}  // namespace

int run_command(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"Weekly pork reference-price forecasting", "porkcast"};
    app.require_subcommand(1);
    app.fallthrough();
    GlobalOptions g;
    app.add_option("--config", g.config, "Service/pipeline config JSON");
    app.add_option("--data", g.data, "Price CSV file, or a directory of them");
    app.add_option("--seed", g.seed, "Master seed")->capture_default_str();
    app.add_option("--out", g.out, "Output path");
    app.add_option("--threads", g.threads, "Worker threads")->check(CLI::Range(1, 256))->capture_default_str();
    app.add_option("--target", g.target, "Target market (default: config, else ES-LLEIDA)");

    const std::vector<std::string> scenario_names{"public", "subscription"};
    const std::vector<std::string> scenario_names_both{"public", "subscription", "both"};

    // ingest
    auto* ingest = app.add_subcommand("ingest", "Parse, validate, repair and align price data");
    double threshold = -1.0;
    std::string repairs_path;
    std::string gaps_path;
    ingest->add_option("--threshold", threshold, "Outlier threshold in EUR/kg (default: config, else 0.5)")
        ->check(CLI::PositiveNumber);
    ingest->add_option("--repairs", repairs_path, "Write the repair log as NDJSON");
    ingest->add_option("--gaps", gaps_path, "Write the gap-fill report as NDJSON");

    // analyze
    auto* analyze = app.add_subcommand("analyze", "Correlations, market selection and ADF tests");
    double corr_threshold = 0.98;
    analyze->add_option("--corr-threshold", corr_threshold, "Market selection threshold")->capture_default_str();

    // build-dataset
    auto* build = app.add_subcommand("build-dataset", "Build the supervised dataset for one scenario and window");
    std::string build_scenario = "public";
    int build_window = 2;
    build->add_option("--scenario", build_scenario, "public | subscription")
        ->check(CLI::IsMember(scenario_names))
        ->capture_default_str();
    build->add_option("--window", build_window, "Weeks per market")->check(CLI::Range(1, 52))->capture_default_str();

    // tune
    auto* tune = app.add_subcommand("tune", "Seeded random search for one model and scenario");
    std::string tune_model_name;
    std::string tune_scenario = "public";
    int tune_trials = 200;
    std::optional<int> tune_window;
    tune->add_option("--model", tune_model_name, "Model id")->required();
    tune->add_option("--scenario", tune_scenario, "public | subscription")
        ->check(CLI::IsMember(scenario_names))
        ->capture_default_str();
    tune->add_option("--trials", tune_trials, "Search trials")->check(CLI::Range(1, 100000))->capture_default_str();
    tune->add_option("--window", tune_window, "Fix the window instead of tuning it")->check(CLI::Range(1, 52));

    // train
    auto* train = app.add_subcommand("train", "Fit one model on every available sample");
    std::string train_model_name;
    std::string train_scenario;
    std::string train_params;
    train->add_option("--model", train_model_name, "Model id (default: config champion)");
    train->add_option("--scenario", train_scenario, "public | subscription (default: config)")
        ->check(CLI::IsMember(scenario_names));
    train->add_option("--params", train_params, "JSON object overriding the reference hyperparameters");

    // evaluate
    auto* evaluate = app.add_subcommand("evaluate", "Scenario comparison report over the fixed test weeks");
    std::string eval_scenario = "both";
    std::string eval_window;
    std::string eval_models = "all";
    int eval_trials = 200;
    bool walk_forward = false;
    bool publish = false;
    evaluate->add_option("--scenario", eval_scenario, "public | subscription | both")
        ->check(CLI::IsMember(scenario_names_both))
        ->capture_default_str();
    evaluate->add_option("--window", eval_window, "Fixed window N, or 'sweep' for 2..12")
        ->check([](const std::string& v) -> std::string {
            if (v == "sweep") return {};
            try {
                std::size_t used = 0;
                const int w = std::stoi(v, &used);
                if (used == v.size() && w >= 1 && w <= 52) return {};
            } catch (const std::exception&) {
            }
            return "window must be an integer in 1..52 or 'sweep'";
        });
    evaluate->add_option("--models", eval_models, "Comma-separated model ids, or 'all'")->capture_default_str();
    evaluate->add_option("--trials", eval_trials, "Search trials per model and scenario")
        ->check(CLI::Range(1, 100000))
        ->capture_default_str();
    evaluate->add_flag("--walk-forward", walk_forward, "Refit before every test week");
    evaluate->add_flag("--publish", publish, "Store the report in the service store (needs --config)");

    // forecast
    auto* forecast = app.add_subcommand("forecast", "Forecast the week after the last data week");
    std::string model_path;
    forecast->add_option("--model", model_path, "Trained model JSON (default: train the config champion)");

    // serve
    auto* serve = app.add_subcommand("serve", "Run the HTTP API and the weekly scheduler");
    std::string listen;
    serve->add_option("--listen", listen, "host:port (default: config listen_addr)");

    // cycle
    auto* cycle = app.add_subcommand("cycle", "Run one weekly fetch, retrain and forecast cycle");

    std::vector<std::string> argv_store{"porkcast"};
    argv_store.insert(argv_store.end(), args.begin(), args.end());
    std::vector<const char*> argv;
    for (const auto& a : argv_store) argv.push_back(a.c_str());

    try {
        app.parse(static_cast<int>(argv.size()), argv.data());
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e, out, err);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e, out, err);
    } catch (const CLI::ParseError& e) {
        app.exit(e, err, err);
        return kExitUsage;
    }

    try {
        const double default_threshold = 0.5;
        if (ingest->parsed()) {
            const Inputs in = load_inputs(g);
            const double t = threshold > 0 ? threshold : (in.has_config ? in.config.outlier_threshold : default_threshold);
            const CleanPanel c = clean_panel(in.series, t);
            std::size_t observations = 0;
            for (const auto& s : in.series) observations += s.observations.size();
            out << "markets: " << in.series.size() << " (" << observations << " observations)\n";
            for (const auto& s : in.series) {
                out << "  " << s.market.id << "  " << default_display_name(s.market.id) << "  "
                    << s.observations.front().week.to_string() << ".." << s.observations.back().week.to_string()
                    << "  " << s.observations.size() << " weeks\n";
            }
            out << "panel: " << c.panel.rows() << " weeks x " << c.panel.cols() << " markets ("
                << c.panel.weeks.front().to_string() << ".." << c.panel.weeks.back().to_string() << ")\n";
            out << "repairs: " << c.repairs.size() << "\n";
            for (const auto& r : c.repairs) {
                out << "  " << r.market.id << " " << r.week.to_string() << " " << r.original_value.to_string()
                    << " -> " << r.replaced_value.to_string() << "\n";
            }
            out << "gaps filled: " << c.gaps.size() << "\n";
            if (!repairs_path.empty()) {
                std::string nd;
                for (const auto& r : c.repairs) {
                    nd += nlohmann::json{{"market", r.market.id},
                                         {"week", r.week.to_string()},
                                         {"original", r.original_value.to_string()},
                                         {"replaced", r.replaced_value.to_string()},
                                         {"rule", r.rule}}
                              .dump() +
                          "\n";
                }
                write_file(repairs_path, nd);
            }
            if (!gaps_path.empty()) {
                std::string nd;
                for (const auto& gap : c.gaps) {
                    nd += nlohmann::json{{"market", gap.market.id},
                                         {"week", gap.week.to_string()},
                                         {"filled_value", gap.filled_value},
                                         {"source_week", gap.source_week.to_string()}}
                              .dump() +
                          "\n";
                }
                write_file(gaps_path, nd);
            }
            if (!g.out.empty()) {
                std::vector<MarketSeries> cleaned;
                for (const auto& s : in.series) cleaned.push_back(repair_outliers(s, t).series);
                write_file(g.out, serialize_price_csv(cleaned));
            }
            return kExitOk;
        }

        if (analyze->parsed()) {
            const Inputs in = load_inputs(g);
            const CleanPanel c = clean_panel(in.series, in.has_config ? in.config.outlier_threshold : default_threshold);
            const CorrelationMatrix m = pearson_matrix(c.panel);
            out << "pearson correlations (" << c.panel.rows() << " weeks)\n";
            std::size_t width = 6;
            for (const auto& mk : m.markets) width = std::max(width, mk.id.size());
            out << std::string(width, ' ');
            for (const auto& mk : m.markets) out << "  " << std::string(width - mk.id.size(), ' ') << mk.id;
            out << "\n";
            for (Eigen::Index i = 0; i < m.r.rows(); ++i) {
                const auto& id = m.markets[static_cast<std::size_t>(i)].id;
                out << id << std::string(width - id.size(), ' ');
                for (Eigen::Index j = 0; j < m.r.cols(); ++j) {
                    const std::string v = fixed(m.r(i, j), 4);
                    out << "  " << std::string(width - v.size(), ' ') << v;
                }
                out << "\n";
            }
            nlohmann::json selected = nlohmann::json::array();
            if (c.panel.has_market(in.target)) {
                out << "\nmarkets with r > " << fixed(corr_threshold, 2) << " against " << in.target << ":";
                for (const auto& mk : select_markets(m, in.target, corr_threshold)) {
                    out << " " << mk.id;
                    selected.push_back(mk.id);
                }
                out << "\n";
            }
            out << "\nADF (constant, AIC lag choice)\n";
            nlohmann::json adf_j = nlohmann::json::array();
            for (std::size_t k = 0; k < c.panel.cols(); ++k) {
                const Eigen::VectorXd col = c.panel.values.col(static_cast<Eigen::Index>(k));
                const std::vector<double> level(col.data(), col.data() + col.size());
                std::vector<double> diff(level.size() - 1);
                for (std::size_t t = 1; t < level.size(); ++t) diff[t - 1] = level[t] - level[t - 1];
                const AdfResult a = adf_test(level);
                const AdfResult d = adf_test(diff);
                auto verdict = [](const AdfResult& r) {
                    return r.rejects(Significance::Pct5) ? std::string("stationary") : std::string("unit root");
                };
                const auto& id = c.panel.markets[k].id;
                out << "  " << id << std::string(width - id.size(), ' ') << "  level " << fixed(a.statistic, 3)
                    << " (lags " << a.lags_used << ", " << verdict(a) << ")  diff " << fixed(d.statistic, 3)
                    << " (lags " << d.lags_used << ", " << verdict(d) << ")\n";
                adf_j.push_back({{"market", id},
                                 {"level", {{"statistic", a.statistic}, {"lags", a.lags_used}, {"nobs", a.nobs},
                                            {"critical_values", a.critical_values}}},
                                 {"difference", {{"statistic", d.statistic}, {"lags", d.lags_used}, {"nobs", d.nobs},
                                                 {"critical_values", d.critical_values}}}});
            }
            if (!g.out.empty()) {
                nlohmann::json ids = nlohmann::json::array();
                for (const auto& mk : m.markets) ids.push_back(mk.id);
                std::vector<std::vector<double>> rows;
                for (Eigen::Index i = 0; i < m.r.rows(); ++i) {
                    rows.emplace_back();
                    for (Eigen::Index j = 0; j < m.r.cols(); ++j) rows.back().push_back(m.r(i, j));
                }
                write_file(g.out, nlohmann::json{{"markets", ids},
                                                 {"correlations", rows},
                                                 {"selected", selected},
                                                 {"adf", adf_j}}
                                          .dump(2) +
                                      "\n");
            }
            return kExitOk;
        }

        if (build->parsed()) {
            const Inputs in = load_inputs(g);
            const CleanPanel c = clean_panel(in.series, in.has_config ? in.config.outlier_threshold : default_threshold);
            const SupervisedDataset ds = build_dataset(c.panel, MarketId(in.target), build_window,
                                                       LagScenario::parse(build_scenario), in.config.calendar);
            out << "dataset " << ds.scenario.name() << " window " << ds.window << ": " << ds.samples()
                << " samples x " << ds.features.cols() << " features, target " << ds.target << " "
                << ds.target_weeks.front().to_string() << ".." << ds.target_weeks.back().to_string() << "\n";
            out << "offsets:";
            for (std::size_t m = 0; m < ds.markets.size(); ++m) out << " " << ds.markets[m] << "=" << ds.offsets[m];
            out << "\nfingerprint " << ds.fingerprint() << "\n";
            if (!g.out.empty()) write_file(g.out, ds.to_csv());
            return kExitOk;
        }

        if (tune->parsed()) {
            const Inputs in = load_inputs(g);
            const CleanPanel c = clean_panel(in.series, in.has_config ? in.config.outlier_threshold : default_threshold);
            const ModelFamily family = family_from_string(tune_model_name);
            EvaluationOptions opt;
            opt.trials = tune_trials;
            opt.seed = g.seed;
            opt.threads = g.threads;
            opt.window = tune_window;
            opt.calendar = in.config.calendar;
            const SearchResult r =
                tune_model(c.panel, MarketId(in.target), family, LagScenario::parse(tune_scenario), opt);
            std::size_t failed = 0;
            for (const auto& t : r.trials) failed += t.ok ? 0 : 1;
            out << family_info(family).display << " (" << tune_scenario << "), " << r.trials.size() << " trials, "
                << failed << " failed\n";
            out << "best trial " << r.best_index << ": validation RMSE " << fixed(r.best_rmse, 6) << "\n";
            out << "params " << params_text(r.best) << "\n";
            if (!g.out.empty()) write_file(g.out, trials_to_ndjson(r.trials));
            return kExitOk;
        }

        if (train->parsed()) {
            const Inputs in = load_inputs(g);
            const CleanPanel c = clean_panel(in.series, in.has_config ? in.config.outlier_threshold : default_threshold);
            const ModelFamily family =
                train_model_name.empty() ? in.config.champion.family : family_from_string(train_model_name);
            Params params = train_model_name.empty() ? in.config.champion.params : reference_params(family);
            if (!train_params.empty()) {
                nlohmann::json j;
                try {
                    j = nlohmann::json::parse(train_params);
                } catch (const nlohmann::json::exception& e) {
                    throw UsageError(std::string("--params is not valid JSON: ") + e.what());
                }
                for (const auto& [k, v] : params_from_json(j)) params[k] = v;
            }
            const LagScenario sc = train_scenario.empty() ? in.config.scenario : LagScenario::parse(train_scenario);
            TrainedModel model;
            if (family_info(family).single_series) {
                const auto col = static_cast<Eigen::Index>(c.panel.column_of(in.target));
                const Eigen::VectorXd y = c.panel.values.col(col);
                model = fit_series(family, std::span<const double>(y.data(), static_cast<std::size_t>(y.size())),
                                   params, g.seed);
                model.target = in.target;
            } else {
                const int window = static_cast<int>(param_int(params, "window"));
                const SupervisedDataset ds = build_dataset(c.panel, MarketId(in.target), window, sc, in.config.calendar);
                model = fit_tabular(family, ds, params, g.seed, g.threads);
            }
            out << family_info(family).display << " trained on " << model.trained_on << ", fingerprint "
                << model.fingerprint() << "\n";
            out << "params " << params_text(model.params) << "\n";
            if (!g.out.empty()) write_file(g.out, to_json(model).dump(1) + "\n");
            return kExitOk;
        }

        if (evaluate->parsed()) {
            const Inputs in = load_inputs(g);
            if (publish && !in.has_config) throw UsageError("--publish needs --config");
            const CleanPanel c = clean_panel(in.series, in.has_config ? in.config.outlier_threshold : default_threshold);
            EvaluationOptions opt;
            try {
                opt.models = parse_model_list(eval_models);
            } catch (const std::invalid_argument& e) {
                throw UsageError(e.what());
            }
            opt.scenarios = parse_scenarios(eval_scenario);
            opt.trials = eval_trials;
            opt.seed = g.seed;
            opt.threads = g.threads;
            opt.walk_forward = walk_forward;
            opt.calendar = in.config.calendar;
            if (eval_window == "sweep") {
                opt.sweep = true;
            } else if (!eval_window.empty()) {
                opt.window = std::stoi(eval_window);
            }
            const EvaluationReport report = scenario_report(c.panel, MarketId(in.target), opt);
            const std::string text = report.to_text();
            out << text;
            if (!g.out.empty()) {
                const auto [txt, json] = artifact_paths(g.out);
                write_file(txt, text);
                write_file(json, report.to_json().dump(1) + "\n");
            }
            if (publish) {
                Service service(in.config);
                service.publish_report(report.to_json());
            }
            return kExitOk;
        }

        if (forecast->parsed()) {
            const Inputs in = load_inputs(g);
            const CleanPanel c = clean_panel(in.series, in.has_config ? in.config.outlier_threshold : default_threshold);
            TrainedModel model;
            if (!model_path.empty()) {
                try {
                    model = trained_model_from_json(nlohmann::json::parse(read_file(model_path)));
                } catch (const nlohmann::json::exception& e) {
                    throw DataError("cannot load model " + model_path + ": " + e.what());
                }
            } else {
                const int window = static_cast<int>(param_int(in.config.champion.params, "window"));
                const SupervisedDataset ds =
                    build_dataset(c.panel, MarketId(in.target), window, in.config.scenario, in.config.calendar);
                model = fit_tabular(in.config.champion.family, ds, in.config.champion.params, g.seed, g.threads);
            }
            const IsoWeek week = week_add(c.panel.weeks.back(), 1);
            ForecastRecord f;
            f.target = model.target;
            f.week = week;
            f.model_fingerprint = model.fingerprint();
            f.data_through = c.panel.weeks.back().to_string();
            const auto target_col = static_cast<Eigen::Index>(c.panel.column_of(model.target));
            f.last_observed = c.panel.values(static_cast<Eigen::Index>(c.panel.rows()) - 1, target_col);
            if (family_info(model.family).single_series) {
                const Eigen::VectorXd y = c.panel.values.col(target_col);
                std::vector<double> ext(y.data(), y.data() + y.size());
                ext.push_back(ext.back());  // placeholder; the one-step forecast uses data before it only
                f.predicted_price = predict_series(model, ext, ext.size() - 1).front();
            } else {
                SupervisedDataset layout;
                layout.window = model.window;
                layout.markets = model.markets;
                layout.offsets = model.offsets;
                layout.target = model.target;
                const FeatureRow row = feature_row(c.panel, layout, week);
                const Eigen::MatrixXd x = row.values;
                f.predicted_price = predict_tabular(model, x)(0);
                f.forward_filled = row.forward_filled;
            }
            f.direction = direction_of(f.predicted_price, f.last_observed);
            out << "forecast " << f.target << " " << week.to_string() << ": " << fixed(f.predicted_price, 4)
                << " EUR/kg, " << f.direction << " from " << fixed(f.last_observed, 4) << " ("
                << family_info(model.family).display << ", model " << f.model_fingerprint << ", forward-filled cells "
                << f.forward_filled << ")\n";
            if (!g.out.empty()) write_file(g.out, f.to_json().dump(1) + "\n");
            return kExitOk;
        }

        if (serve->parsed()) {
            if (g.config.empty()) throw UsageError("serve needs --config");
            Inputs in = load_inputs(g, false);
            if (!listen.empty()) in.config.listen_addr = listen;
            Service service(in.config);
            for (const auto& w : service.store_warnings()) err << "store: " << w << "\n";
            ApiServer server(service);
            const int port = server.bind(in.config.listen_host(), in.config.listen_port());
            out << "listening on " << in.config.listen_host() << ":" << port << "\n" << std::flush;
            g_stop = false;
            auto previous_int = std::signal(SIGINT, on_signal);
            auto previous_term = std::signal(SIGTERM, on_signal);
            service.start_scheduler();
            server.start();
            while (!g_stop) std::this_thread::sleep_for(std::chrono::milliseconds(200));
            server.stop();
            service.stop_scheduler();
            std::signal(SIGINT, previous_int);
            std::signal(SIGTERM, previous_term);
            return kExitOk;
        }

        if (cycle->parsed()) {
            if (g.config.empty()) throw UsageError("cycle needs --config");
            Inputs in = load_inputs(g, false);
            if (!g.data.empty()) in.config.sources = {Source{g.data, "csv"}};
            if (!g.target.empty()) in.config.target_market = g.target;
            Service service(in.config);
            for (const auto& w : service.store_warnings()) err << "store: " << w << "\n";
            const CycleSummary s = service.run_weekly_cycle();
            out << s.to_json().dump(2) << "\n";
            return s.status == "failed" ? kExitRuntime : kExitOk;
        }
    } catch (const UsageError& e) {
        err << "error: " << e.what() << "\n";
        return kExitUsage;
    } catch (const DataError& e) {
        err << "data error: " << e.what() << "\n";
        return kExitData;
    } catch (const FetchError& e) {
        err << "fetch error: " << e.what() << "\n";
        return kExitData;
    } catch (const std::invalid_argument& e) {
        err << "error: " << e.what() << "\n";
        return kExitUsage;
    } catch (const std::exception& e) {
        err << "failed: " << e.what() << "\n";
        return kExitRuntime;
    }
    return kExitUsage;
}

}  // namespace porkcast
