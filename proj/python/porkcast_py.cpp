#include <sstream>

#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "porkcast/analysis.hpp"
#include "porkcast/cli.hpp"
#include "porkcast/errors.hpp"
#include "porkcast/evaluation.hpp"
#include "porkcast/ingest.hpp"
#include "porkcast/linear.hpp"
#include "porkcast/models.hpp"
#include "porkcast/sarima.hpp"
#include "porkcast/synthetic.hpp"
#include "porkcast/windowing.hpp"

namespace py = pybind11;
using namespace porkcast;

namespace {

py::object to_python(const nlohmann::json& j) { return py::module_::import("json").attr("loads")(j.dump()); }

std::vector<std::string> ids(const std::vector<MarketId>& markets) {
    std::vector<std::string> out;
    for (const auto& m : markets) out.push_back(m.id);
    return out;
}

std::vector<std::string> week_strings(const std::vector<IsoWeek>& weeks) {
    std::vector<std::string> out;
    for (const auto& w : weeks) out.push_back(w.to_string());
    return out;
}

// Parses, repairs and aligns; returns the panel and the repair log.
std::pair<PricePanel, py::list> load_panel(const std::string& text, bool repair, double threshold) {
    auto series = parse_price_csv(text);
    py::list log;
    if (repair) {
        for (auto& s : series) {
            auto r = repair_outliers(s, threshold);
            for (const auto& e : r.log) {
                py::dict d;
                d["market"] = e.market.id;
                d["week"] = e.week.to_string();
                d["original"] = e.original_value.value();
                d["replaced"] = e.replaced_value.value();
                log.append(d);
            }
            s = std::move(r.series);
        }
    }
    return {align_panel(series).panel, log};
}

std::vector<LagScenario> parse_scenarios(const std::string& text) {
    if (text == "both") return {LagScenario::public_delayed(2), LagScenario::subscription()};
    return {LagScenario::parse(text)};
}

}  // namespace

PYBIND11_MODULE(_porkcast, m) {
    m.doc() = "Weekly pork price forecasting: ingestion, analysis, datasets and model evaluation.";

    auto data_error = py::register_exception<DataError>(m, "DataError", PyExc_ValueError);
    py::register_exception<FitError>(m, "FitError", PyExc_RuntimeError);
    py::register_exception<FetchError>(m, "FetchError", PyExc_IOError);
    (void)data_error;

    py::class_<PricePanel>(m, "Panel")
        .def_property_readonly("markets", [](const PricePanel& p) { return ids(p.markets); })
        .def_property_readonly("weeks", [](const PricePanel& p) { return week_strings(p.weeks); })
        .def_property_readonly("values", [](const PricePanel& p) { return p.values; })
        .def_property_readonly("fill_flags",
                               [](const PricePanel& p) { return Eigen::MatrixXi(p.fill_flags.cast<int>()); })
        .def("subset", &panel_subset, py::arg("markets"))
        .def("__len__", &PricePanel::rows)
        .def("__repr__", [](const PricePanel& p) {
            std::ostringstream s;
            s << "<Panel " << p.rows() << " weeks x " << p.cols() << " markets>";
            return s.str();
        });

    m.def(
        "load_csv",
        [](const std::string& text, bool repair, double threshold) { return load_panel(text, repair, threshold); },
        py::arg("text"), py::arg("repair") = true, py::arg("threshold") = 0.5,
        "Parse long-format price CSV text. Returns (panel, repair_log).");

    m.def(
        "synthetic_panel",
        [](std::uint64_t seed, int weeks, bool outlier) {
            SyntheticOptions opt;
            opt.weeks = weeks;
            opt.inject_outlier = outlier;
            return synthetic_panel(seed, opt);
        },
        py::arg("seed"), py::arg("weeks") = 322, py::arg("outlier") = false);

    m.def(
        "correlations",
        [](const PricePanel& p) {
            const auto c = pearson_matrix(p);
            return std::make_pair(ids(c.markets), c.r);
        },
        py::arg("panel"), "Returns (markets, Pearson matrix).");

    m.def(
        "select_markets",
        [](const PricePanel& p, const std::string& target, double threshold) {
            return ids(select_markets(pearson_matrix(p), target, threshold));
        },
        py::arg("panel"), py::arg("target"), py::arg("threshold") = 0.98);

    m.def(
        "adf_test",
        [](const std::vector<double>& series, std::optional<int> max_lag) {
            const auto r = adf_test(series, max_lag);
            py::dict d;
            d["statistic"] = r.statistic;
            d["lags_used"] = r.lags_used;
            d["nobs"] = r.nobs;
            d["critical_values"] = r.critical_values;
            d["rejects_5pct"] = r.rejects(Significance::Pct5);
            return d;
        },
        py::arg("series"), py::arg("max_lag") = py::none());

    m.def(
        "build_dataset",
        [](const PricePanel& p, const std::string& target, int window, const std::string& scenario) {
            const auto ds = build_dataset(p, MarketId(target), window, LagScenario::parse(scenario),
                                          PublicationCalendar::spanish_default());
            py::dict d;
            d["features"] = ds.features;
            d["targets"] = ds.targets;
            d["target_weeks"] = week_strings(ds.target_weeks);
            d["offsets"] = ds.offsets;
            d["markets"] = ds.markets;
            return d;
        },
        py::arg("panel"), py::arg("target"), py::arg("window"), py::arg("scenario"));

    m.def(
        "ridge_fit",
        [](const Eigen::MatrixXd& X, const Eigen::VectorXd& y, double alpha) {
            const auto model = ridge_fit(X, y, alpha);
            return std::make_pair(model.weights, model.intercept);
        },
        py::arg("X"), py::arg("y"), py::arg("alpha"), "Returns (weights, intercept).");

    m.def(
        "sarima_forecast",
        [](const std::vector<double>& series, std::array<int, 3> order, std::array<int, 4> seasonal, int steps,
           std::uint64_t seed) {
            const SarimaSpec spec{order[0], order[1], order[2], seasonal[0], seasonal[1], seasonal[2], seasonal[3]};
            const auto model = sarima_fit(series, spec, seed);
            py::dict d;
            d["model"] = to_python(to_json(model));
            d["forecast"] = sarima_forecast(model, steps);
            return d;
        },
        py::arg("series"), py::arg("order"), py::arg("seasonal_order") = std::array<int, 4>{0, 0, 0, 1},
        py::arg("steps") = 1, py::arg("seed") = 0);

    m.def("rmse", &rmse, py::arg("y"), py::arg("yhat"));
    m.def("r2", &r2, py::arg("y"), py::arg("yhat"));

    m.def(
        "evaluate",
        [](const PricePanel& p, const std::string& target, const std::string& models, const std::string& scenario,
           int trials, std::uint64_t seed, int threads, std::optional<int> window) {
            EvaluationOptions opt;
            opt.models = parse_model_list(models);
            opt.scenarios = parse_scenarios(scenario);
            opt.trials = trials;
            opt.seed = seed;
            opt.threads = threads;
            opt.window = window;
            EvaluationReport report;
            {
                py::gil_scoped_release release;
                report = scenario_report(p, MarketId(target), opt);
            }
            return to_python(report.to_json());
        },
        py::arg("panel"), py::arg("target") = "ES-LLEIDA", py::arg("models") = "ridge", py::arg("scenario") = "both",
        py::arg("trials") = 20, py::arg("seed") = 7, py::arg("threads") = 1, py::arg("window") = py::none(),
        "Scenario comparison report as a dict.");

    m.def(
        "run_command",
        [](const std::vector<std::string>& args) {
            std::ostringstream out, err;
            int code = 0;
            {
                py::gil_scoped_release release;
                code = run_command(args, out, err);
            }
            return py::make_tuple(code, out.str(), err.str());
        },
        py::arg("args"), "Runs one CLI invocation. Returns (exit_code, stdout, stderr).");
}
