#include "porkcast/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <stdexcept>

#include "porkcast/errors.hpp"
#include "porkcast/hash.hpp"

namespace porkcast {

double rmse(const Eigen::VectorXd& y, const Eigen::VectorXd& yhat) {
    if (y.size() == 0) throw std::invalid_argument("rmse of an empty vector");
    if (y.size() != yhat.size()) throw std::invalid_argument("rmse: length mismatch");
    return std::sqrt((y - yhat).squaredNorm() / static_cast<double>(y.size()));
}

double r2(const Eigen::VectorXd& y, const Eigen::VectorXd& yhat) {
    if (y.size() != yhat.size()) throw std::invalid_argument("r2: length mismatch");
    if (y.size() < 2) throw std::invalid_argument("r2 needs at least 2 values");
    const double sst = (y.array() - y.mean()).square().sum();
    if (!(sst > 0.0)) throw DataError("r2 undefined for a constant target");
    return 1.0 - (y - yhat).squaredNorm() / sst;
}

std::string panel_fingerprint(const PricePanel& panel) {
    Fnv1a h;
    for (const auto& m : panel.markets) h.update(m.id);
    for (const auto& w : panel.weeks) h.update(w.to_string());
    for (Eigen::Index i = 0; i < panel.values.rows(); ++i)
        for (Eigen::Index j = 0; j < panel.values.cols(); ++j) h.update(panel.values(i, j));
    return h.hex();
}

IsoWeek fixed_test_start(const PricePanel& panel, const MarketId& target, const std::vector<LagScenario>& scenarios,
                         const PublicationCalendar& calendar, double train_fraction) {
    if (scenarios.empty()) throw std::invalid_argument("no scenarios");
    for (int w = 12; w >= 1; --w) {
        std::optional<SupervisedDataset> widest;
        try {
            for (const auto& sc : scenarios) {
                SupervisedDataset ds = build_dataset(panel, target, w, sc, calendar);
                if (!widest || ds.samples() < widest->samples()) widest = std::move(ds);
            }
        } catch (const DataError&) {
            continue;
        }
        return chrono_split(*widest, train_fraction).second.target_weeks.front();
    }
    throw DataError("panel too short for a train/test split");
}

namespace {

constexpr std::uint64_t kFitSalt = 0x66697400;

std::size_t family_index(ModelFamily f) {
    const auto& all = model_families();
    for (std::size_t i = 0; i < all.size(); ++i) {
        if (all[i].family == f) return i;
    }
    return 0;
}

void score(ReportRow& row, const Eigen::VectorXd& y, const Eigen::VectorXd& yhat) {
    if (!yhat.allFinite()) throw FitError("non-finite test predictions");
    row.predictions.assign(yhat.data(), yhat.data() + yhat.size());
    row.test_samples = static_cast<std::size_t>(y.size());
    row.sse = (y - yhat).squaredNorm();
    row.sst = (y.array() - y.mean()).square().sum();
    row.rmse = rmse(y, yhat);
    row.r2 = r2(y, yhat);
    row.ok = true;
}

SearchSpace without_window(SearchSpace space) {
    space.params.erase(std::remove_if(space.params.begin(), space.params.end(),
                                      [](const ParamSpec& p) { return p.name == "window"; }),
                       space.params.end());
    return space;
}

class Evaluator {
public:
    Evaluator(const PricePanel& panel, const MarketId& target, const EvaluationOptions& opt)
        : panel_(panel), target_(target), opt_(opt) {
        const auto col = static_cast<Eigen::Index>(panel.column_of(target.id));
        series_.assign(panel.values.col(col).data(), panel.values.col(col).data() + panel.values.rows());
        test_start_ = fixed_test_start(panel, target, opt.scenarios, opt.calendar, opt.train_fraction);
        test_row_ = static_cast<std::size_t>(weeks_between(panel.weeks.front(), test_start_));
        test_y_ = Eigen::Map<const Eigen::VectorXd>(series_.data() + test_row_,
                                                    static_cast<Eigen::Index>(series_.size() - test_row_));
    }

    IsoWeek test_start() const { return test_start_; }
    std::size_t test_row() const { return test_row_; }
    const Eigen::VectorXd& test_targets() const { return test_y_; }

    const SupervisedDataset& dataset(const LagScenario& sc, int window) {
        const auto key = std::make_pair(sc.name(), window);
        auto it = cache_.find(key);
        if (it == cache_.end()) {
            it = cache_.emplace(key, build_dataset(panel_, target_, window, sc, opt_.calendar)).first;
        }
        return it->second;
    }

    SearchResult search_series(ModelFamily family) {
        const std::uint64_t fit_seed = mix_seed(opt_.seed, kFitSalt + family_index(family));
        const std::size_t n_train = test_row_;
        const auto n_val = static_cast<std::size_t>(std::floor(static_cast<double>(n_train) * opt_.validation_fraction));
        const std::size_t n_inner = n_train - n_val;
        if (n_val == 0 || n_inner == 0) throw DataError("training split too short for inner validation");
        const std::span<const double> all(series_);
        const Eigen::Map<const Eigen::VectorXd> val_y(series_.data() + n_inner, static_cast<Eigen::Index>(n_val));
        const Objective objective = [&](const Params& p) {
            const TrainedModel m = fit_series(family, all.first(n_inner), p, fit_seed);
            const auto pred = predict_series(m, all.first(n_train), n_inner);
            return rmse(val_y, Eigen::Map<const Eigen::VectorXd>(pred.data(), static_cast<Eigen::Index>(pred.size())));
        };
        return random_search(without_window(default_search_space(family)), opt_.trials, objective,
                             mix_seed(opt_.seed, family_index(family)), opt_.threads);
    }

    ReportRow series_row(ModelFamily family) {
        ReportRow row = blank(family, "");
        const std::uint64_t fit_seed = mix_seed(opt_.seed, kFitSalt + family_index(family));
        const std::size_t n_train = test_row_;
        const std::span<const double> all(series_);
        const SearchResult search = search_series(family);
        record_search(row, search);
        std::vector<double> pred;
        if (opt_.walk_forward) {
            for (std::size_t t = n_train; t < series_.size(); ++t) {
                const TrainedModel m = fit_series(family, all.first(t), search.best, fit_seed);
                pred.push_back(predict_series(m, all.first(t + 1), t).front());
            }
        } else {
            const TrainedModel m = fit_series(family, all.first(n_train), search.best, fit_seed);
            pred = predict_series(m, all, n_train);
        }
        score(row, test_y_, Eigen::Map<const Eigen::VectorXd>(pred.data(), static_cast<Eigen::Index>(pred.size())));
        return row;
    }

    SearchResult search_tabular(ModelFamily family, const LagScenario& sc, std::optional<int> window) {
        const std::uint64_t fit_seed = mix_seed(opt_.seed, kFitSalt + family_index(family));
        SearchSpace space = default_search_space(family);
        if (window) space = without_window(space);
        auto window_of = [&](const Params& p) { return window ? *window : static_cast<int>(param_int(p, "window")); };
        const Objective objective = [&](const Params& p) {
            const SupervisedDataset& ds = dataset(sc, window_of(p));
            const std::size_t n_train = ds.rows_before(test_start_);
            const auto n_val =
                static_cast<std::size_t>(std::floor(static_cast<double>(n_train) * opt_.validation_fraction));
            if (n_val == 0 || n_val == n_train) throw DataError("training split too short for inner validation");
            const std::size_t n_inner = n_train - n_val;
            const TrainedModel m = fit_tabular(family, ds.slice(0, n_inner), p, fit_seed, 1);
            const SupervisedDataset val = ds.slice(n_inner, n_train);
            return rmse(val.targets, predict_tabular(m, val.features));
        };
        // Datasets are built before the (possibly parallel) search so the cache is read-only inside it.
        if (window) {
            dataset(sc, *window);
        } else {
            for (int w = 2; w <= 12; ++w) dataset(sc, w);
        }
        return random_search(space, opt_.trials, objective, mix_seed(opt_.seed, family_index(family)), opt_.threads);
    }

    ReportRow tabular_row(ModelFamily family, const LagScenario& sc, std::optional<int> window) {
        ReportRow row = blank(family, sc.name());
        const std::uint64_t fit_seed = mix_seed(opt_.seed, kFitSalt + family_index(family));
        auto window_of = [&](const Params& p) { return window ? *window : static_cast<int>(param_int(p, "window")); };
        const SearchResult search = search_tabular(family, sc, window);
        record_search(row, search);
        row.window = window_of(search.best);
        const SupervisedDataset& ds = dataset(sc, row.window);
        const std::size_t n_train = ds.rows_before(test_start_);
        const SupervisedDataset test = ds.slice(n_train, ds.samples());
        if (test.samples() != static_cast<std::size_t>(test_y_.size())) {
            throw std::logic_error("test weeks differ between datasets");
        }
        Eigen::VectorXd pred(static_cast<Eigen::Index>(test.samples()));
        if (opt_.walk_forward) {
            for (std::size_t i = 0; i < test.samples(); ++i) {
                const TrainedModel m = fit_tabular(family, ds.slice(0, n_train + i), search.best, fit_seed, opt_.threads);
                pred(static_cast<Eigen::Index>(i)) = predict_tabular(m, test.features.row(static_cast<Eigen::Index>(i)))(0);
            }
        } else {
            const TrainedModel m = fit_tabular(family, ds.slice(0, n_train), search.best, fit_seed, opt_.threads);
            pred = predict_tabular(m, test.features);
        }
        score(row, test.targets, pred);
        return row;
    }

    ReportRow custom_row(const CustomModel& cm, const LagScenario& sc, int window) {
        ReportRow row;
        row.model = cm.name;
        row.family = cm.name;
        row.scenario = sc.name();
        row.window = window;
        const SupervisedDataset& ds = dataset(sc, window);
        const std::size_t n_train = ds.rows_before(test_start_);
        const SupervisedDataset test = ds.slice(n_train, ds.samples());
        score(row, test.targets, cm.fit_predict(ds.slice(0, n_train), test));
        return row;
    }

private:
    static ReportRow blank(ModelFamily family, const std::string& scenario) {
        ReportRow row;
        row.model = family_info(family).display;
        row.family = family_info(family).id;
        row.scenario = scenario;
        return row;
    }

    static void record_search(ReportRow& row, const SearchResult& search) {
        row.params = search.best;
        row.validation_rmse = search.best_rmse;
        row.best_trial = search.best_index;
    }

    const PricePanel& panel_;
    const MarketId& target_;
    const EvaluationOptions& opt_;
    std::vector<double> series_;
    IsoWeek test_start_;
    std::size_t test_row_ = 0;
    Eigen::VectorXd test_y_;
    std::map<std::pair<std::string, int>, SupervisedDataset> cache_;
};

template <class F>
ReportRow guarded(const std::string& model, const std::string& family, const std::string& scenario, int window,
                  F&& compute) {
    try {
        return compute();
    } catch (const std::exception& e) {
        ReportRow row;
        row.model = model;
        row.family = family;
        row.scenario = scenario;
        row.window = window;
        row.error = e.what();
        return row;
    }
}

bool row_order(const ReportRow& a, const ReportRow& b) {
    if (a.ok != b.ok) return a.ok;
    if (a.ok && a.r2 != b.r2) return a.r2 > b.r2;
    if (a.model != b.model) return a.model < b.model;
    return a.window < b.window;
}

}  // namespace

EvaluationReport scenario_report(const PricePanel& panel, const MarketId& target, const EvaluationOptions& opt) {
    if (!panel.has_market(target.id)) throw DataError("target market '" + target.id + "' not in panel");
    if (opt.models.empty() && opt.custom_models.empty()) throw std::invalid_argument("no models to evaluate");
    if (opt.scenarios.empty()) throw std::invalid_argument("no scenarios to evaluate");
    if (opt.trials < 1) throw std::invalid_argument("trials must be >= 1");
    if (opt.window && (*opt.window < 1)) throw std::invalid_argument("window must be >= 1");

    Evaluator ev(panel, target, opt);
    EvaluationReport rep;
    rep.target = target.id;
    for (const auto& m : panel.markets) rep.markets.push_back(m.id);
    for (const auto& sc : opt.scenarios) rep.scenarios.push_back(sc.name());
    rep.seed = opt.seed;
    rep.trials = opt.trials;
    rep.data_fingerprint = panel_fingerprint(panel);
    rep.first_week = panel.weeks.front().to_string();
    rep.last_week = panel.weeks.back().to_string();
    rep.test_start = ev.test_start().to_string();
    for (std::size_t i = ev.test_row(); i < panel.rows(); ++i) rep.test_weeks.push_back(panel.weeks[i].to_string());
    rep.test_targets.assign(ev.test_targets().data(), ev.test_targets().data() + ev.test_targets().size());

    std::vector<std::optional<int>> windows;
    if (opt.sweep) {
        for (int w = 2; w <= 12; ++w) windows.emplace_back(w);
    } else {
        windows.push_back(opt.window);
    }

    std::map<ModelFamily, ReportRow> series_rows;
    for (const auto& sc : opt.scenarios) {
        std::vector<ReportRow> rows;
        for (ModelFamily f : opt.models) {
            const auto& info = family_info(f);
            if (info.single_series) {
                auto it = series_rows.find(f);
                if (it == series_rows.end()) {
                    it = series_rows.emplace(f, guarded(info.display, info.id, "", 0, [&] { return ev.series_row(f); }))
                             .first;
                }
                ReportRow row = it->second;
                row.scenario = sc.name();
                rows.push_back(std::move(row));
                continue;
            }
            for (const auto& w : windows) {
                rows.push_back(guarded(info.display, info.id, sc.name(), w.value_or(0),
                                       [&] { return ev.tabular_row(f, sc, w); }));
            }
        }
        for (const auto& cm : opt.custom_models) {
            const int w = opt.window.value_or(2);
            rows.push_back(guarded(cm.name, cm.name, sc.name(), w, [&] { return ev.custom_row(cm, sc, w); }));
        }
        std::stable_sort(rows.begin(), rows.end(), row_order);
        for (auto& r : rows) rep.rows.push_back(std::move(r));
    }

    if (opt.sweep) {
        for (const auto& sc : opt.scenarios) {
            for (ModelFamily f : opt.models) {
                const ReportRow* best = nullptr;
                for (const auto& r : rep.rows) {
                    if (r.scenario != sc.name() || r.family != family_info(f).id || !r.ok) continue;
                    if (!best || r.rmse < best->rmse || (r.rmse == best->rmse && r.window < best->window)) best = &r;
                }
                if (best) rep.window_summary.push_back({best->model, sc.name(), best->window, best->rmse, best->r2});
            }
        }
    }
    check_scenario_invariance(rep);
    return rep;
}

SearchResult tune_model(const PricePanel& panel, const MarketId& target, ModelFamily family, const LagScenario& scenario,
                        const EvaluationOptions& opt) {
    if (!panel.has_market(target.id)) throw DataError("target market '" + target.id + "' not in panel");
    if (opt.trials < 1) throw std::invalid_argument("trials must be >= 1");
    Evaluator ev(panel, target, opt);
    if (family_info(family).single_series) return ev.search_series(family);
    return ev.search_tabular(family, scenario, opt.window);
}

void check_scenario_invariance(const EvaluationReport& report) {
    std::map<std::string, const ReportRow*> first;
    for (const auto& r : report.rows) {
        bool single = false;
        for (const auto& f : model_families()) single |= f.single_series && f.id == r.family;
        if (!single) continue;
        const auto [it, inserted] = first.emplace(r.family, &r);
        if (inserted) continue;
        const ReportRow& a = *it->second;
        const bool same = a.ok == r.ok && a.error == r.error && a.rmse == r.rmse && a.r2 == r.r2 &&
                          a.predictions == r.predictions && a.params == r.params && a.sse == r.sse;
        if (!same) {
            throw std::logic_error(r.model + " differs between scenarios " + a.scenario + " and " + r.scenario);
        }
    }
}

namespace {

std::string fmt(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.5f", v);
    return buf;
}

std::string pad(const std::string& s, std::size_t width, bool right) {
    if (s.size() >= width) return s;
    const std::string fill(width - s.size(), ' ');
    return right ? fill + s : s + fill;
}

nlohmann::json num_or_null(bool ok, double v) { return ok ? nlohmann::json(v) : nlohmann::json(nullptr); }

}  // namespace

std::string EvaluationReport::to_text() const {
    struct Line {
        std::string label;
        std::map<std::string, const ReportRow*> cells;
        double best = -std::numeric_limits<double>::infinity();
    };
    std::vector<Line> lines;
    const bool several_windows = [&] {
        std::map<std::pair<std::string, std::string>, int> count;
        for (const auto& r : rows) {
            if (++count[{r.family, r.scenario}] > 1) return true;
        }
        return false;
    }();
    for (const auto& r : rows) {
        std::string label = r.model;
        if (several_windows && r.window > 0) label += " [w=" + std::to_string(r.window) + "]";
        auto it = std::find_if(lines.begin(), lines.end(), [&](const Line& l) { return l.label == label; });
        if (it == lines.end()) {
            lines.push_back({label, {}, -std::numeric_limits<double>::infinity()});
            it = std::prev(lines.end());
        }
        it->cells[r.scenario] = &r;
        if (r.ok) it->best = std::max(it->best, r.r2);
    }
    std::stable_sort(lines.begin(), lines.end(), [](const Line& a, const Line& b) {
        if (a.best != b.best) return a.best > b.best;
        return a.label < b.label;
    });

    std::vector<std::string> header{"Model"};
    for (const auto& sc : scenarios) {
        header.push_back(sc + " RMSE");
        header.push_back(sc + " R2");
    }
    std::vector<std::vector<std::string>> table{header};
    for (const auto& l : lines) {
        std::vector<std::string> cells{l.label};
        for (const auto& sc : scenarios) {
            const auto it = l.cells.find(sc);
            if (it == l.cells.end()) {
                cells.insert(cells.end(), {"-", "-"});
            } else if (!it->second->ok) {
                cells.insert(cells.end(), {"failed", "failed"});
            } else {
                cells.push_back(fmt(it->second->rmse));
                cells.push_back(fmt(it->second->r2));
            }
        }
        table.push_back(std::move(cells));
    }
    std::vector<std::size_t> width(header.size(), 0);
    for (const auto& row : table)
        for (std::size_t c = 0; c < row.size(); ++c) width[c] = std::max(width[c], row[c].size());

    std::string out;
    out += "target " + target + ", " + std::to_string(markets.size()) + " markets, weeks " + first_week + ".." +
           last_week + "\n";
    out += "test weeks " + test_start + ".." + last_week + " (" + std::to_string(test_weeks.size()) + "), seed " +
           std::to_string(seed) + ", trials " + std::to_string(trials) + ", data " + data_fingerprint + "\n\n";
    for (std::size_t r = 0; r < table.size(); ++r) {
        std::string line;
        for (std::size_t c = 0; c < table[r].size(); ++c) {
            if (c > 0) line += "  ";
            line += pad(table[r][c], width[c], c > 0);
        }
        while (!line.empty() && line.back() == ' ') line.pop_back();
        out += line + "\n";
        if (r == 0) {
            std::size_t total = 0;
            for (std::size_t c = 0; c < width.size(); ++c) total += width[c] + (c > 0 ? 2 : 0);
            out += std::string(total, '-') + "\n";
        }
    }
    bool any_failed = false;
    for (const auto& r : rows) {
        if (r.ok) continue;
        if (!any_failed) out += "\nfailures:\n";
        any_failed = true;
        out += "  " + r.model + " (" + r.scenario + "): " + r.error + "\n";
    }
    if (!window_summary.empty()) {
        out += "\nbest window per model:\n";
        for (const auto& s : window_summary) {
            out += "  " + pad(s.model, 26, false) + pad(s.scenario, 14, false) + "window " +
                   pad(std::to_string(s.best_window), 2, true) + "  RMSE " + fmt(s.rmse) + "  R2 " + fmt(s.r2) + "\n";
        }
    }
    return out;
}

nlohmann::json EvaluationReport::to_json() const {
    nlohmann::json rows_j = nlohmann::json::array();
    for (const auto& r : rows) {
        nlohmann::json j = {{"model", r.model},
                            {"family", r.family},
                            {"scenario", r.scenario},
                            {"window", r.window},
                            {"ok", r.ok},
                            {"rmse", num_or_null(r.ok, r.rmse)},
                            {"r2", num_or_null(r.ok, r.r2)},
                            {"test_samples", r.test_samples},
                            {"sse", num_or_null(r.ok, r.sse)},
                            {"sst", num_or_null(r.ok, r.sst)},
                            {"validation_rmse", num_or_null(r.ok, r.validation_rmse)},
                            {"best_trial", r.best_trial},
                            {"hyperparams", porkcast::to_json(r.params)},
                            {"predictions", r.predictions}};
        if (!r.ok) j["error"] = r.error;
        rows_j.push_back(std::move(j));
    }
    nlohmann::json summary = nlohmann::json::array();
    for (const auto& s : window_summary) {
        summary.push_back(
            {{"model", s.model}, {"scenario", s.scenario}, {"best_window", s.best_window}, {"rmse", s.rmse}, {"r2", s.r2}});
    }
    return {{"metadata",
             {{"target", target},
              {"markets", markets},
              {"scenarios", scenarios},
              {"seed", seed},
              {"trials", trials},
              {"data_fingerprint", data_fingerprint},
              {"first_week", first_week},
              {"last_week", last_week},
              {"test_start", test_start}}},
            {"test_weeks", test_weeks},
            {"test_targets", test_targets},
            {"rows", std::move(rows_j)},
            {"window_summary", std::move(summary)}};
}

}  // namespace porkcast
