#include "porkcast/models.hpp"

#include <algorithm>
#include <sstream>
#include <stdexcept>

#include "porkcast/hash.hpp"

namespace porkcast {

const std::vector<FamilyInfo>& model_families() {
    static const std::vector<FamilyInfo> families = {
        {ModelFamily::Ridge, "ridge", "Ridge", false},
        {ModelFamily::ARIMA, "arima", "Arima", true},
        {ModelFamily::SARIMA, "sarimax", "Sarimax", true},
        {ModelFamily::SVR, "svr", "Support Vector Regressor", false},
        {ModelFamily::XGBoost, "xgboost", "XGBoost Regressor", false},
        {ModelFamily::LGBM, "lgbm", "LGBM Regressor", false},
        {ModelFamily::RandomForest, "rf", "Random Forest", false},
        {ModelFamily::ExtraTrees, "ert", "Extremely Random trees", false},
        {ModelFamily::RNN, "rnn", "RNN", false},
        {ModelFamily::LSTM, "lstm", "LSTM", false},
        {ModelFamily::CatBoost, "catboost", "CatBoost Regressor", false},
    };
    return families;
}

const FamilyInfo& family_info(ModelFamily family) {
    for (const auto& f : model_families()) {
        if (f.family == family) return f;
    }
    throw std::invalid_argument("unknown model family");
}

ModelFamily family_from_string(const std::string& name) {
    std::string s = name;
    std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    for (const auto& f : model_families()) {
        if (f.id == s) return f.family;
    }
    if (s == "sarima") return ModelFamily::SARIMA;
    if (s == "random_forest" || s == "randomforest") return ModelFamily::RandomForest;
    if (s == "extra_trees" || s == "extratrees") return ModelFamily::ExtraTrees;
    if (s == "linear_svr") return ModelFamily::SVR;
    throw std::invalid_argument("unknown model family '" + name + "'");
}

std::vector<ModelFamily> parse_model_list(const std::string& list) {
    std::vector<ModelFamily> out;
    if (list == "all") {
        for (const auto& f : model_families()) out.push_back(f.family);
        return out;
    }
    std::stringstream ss(list);
    std::string item;
    while (std::getline(ss, item, ',')) {
        if (item.empty()) continue;
        const ModelFamily f = family_from_string(item);
        if (std::find(out.begin(), out.end(), f) == out.end()) out.push_back(f);
    }
    if (out.empty()) throw std::invalid_argument("empty model list");
    return out;
}

std::vector<int> parse_layers(const std::string& text) {
    std::vector<int> sizes;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, '/')) {
        std::size_t used = 0;
        int v = 0;
        try {
            v = std::stoi(item, &used);
        } catch (const std::exception&) {
            used = 0;
        }
        if (used == 0 || used != item.size()) throw std::invalid_argument("bad layer list '" + text + "'");
        sizes.push_back(v);
    }
    if (sizes.empty()) throw std::invalid_argument("bad layer list '" + text + "'");
    return sizes;
}

namespace {

ParamSpec window_param() { return {"window", IntUniform{2, 12}}; }

SearchSpace gbdt_space(const std::string& family, bool min_child) {
    SearchSpace s{family,
                  {window_param(),
                   {"learning_rate", LogUniform{0.01, 0.3}},
                   {"max_depth", IntUniform{2, 8}},
                   {"n_estimators", IntUniform{20, 200}}}};
    if (min_child) s.params.push_back({"min_child_samples", IntUniform{1, 20}});
    return s;
}

SearchSpace neural_space(const std::string& family, std::vector<ParamValue> layers) {
    return {family,
            {window_param(),
             {"layers", Choice{std::move(layers)}},
             {"dropout", Uniform{0.0, 0.1}},
             {"activation", Choice{{std::string("relu"), std::string("tanh")}}},
             {"epochs", IntUniform{10, 40}},
             {"batch_size", IntUniform{5, 20}},
             {"learning_rate", LogUniform{5e-4, 2e-2}}}};
}

}  // namespace

SearchSpace default_search_space(ModelFamily family) {
    const std::string id = family_info(family).id;
    switch (family) {
        case ModelFamily::Ridge: return {id, {window_param(), {"alpha", LogUniform{1e-4, 10.0}}}};
        case ModelFamily::SVR:
            return {id, {window_param(), {"C", LogUniform{1e-3, 10.0}}, {"epsilon", LogUniform{1e-4, 0.1}}}};
        case ModelFamily::ARIMA:
            return {id,
                    {window_param(), {"p", IntUniform{0, 6}}, {"d", IntUniform{0, 1}}, {"q", IntUniform{0, 2}}}};
        case ModelFamily::SARIMA:
            return {id,
                    {window_param(),
                     {"p", IntUniform{0, 2}},
                     {"d", IntUniform{0, 1}},
                     {"q", IntUniform{0, 2}},
                     {"P", IntUniform{0, 1}},
                     {"D", IntUniform{0, 1}},
                     {"Q", IntUniform{0, 1}},
                     {"M", Choice{{std::int64_t{12}}}}}};
        case ModelFamily::RandomForest:
            return {id,
                    {window_param(),
                     {"n_estimators", IntUniform{10, 150}},
                     {"min_samples_leaf", Uniform{0.001, 0.05}},
                     {"min_samples_split", IntUniform{2, 10}},
                     {"max_features", Choice{{std::string("all"), std::string("sqrt")}}}}};
        case ModelFamily::ExtraTrees:
            return {id,
                    {window_param(),
                     {"n_estimators", IntUniform{10, 150}},
                     {"max_depth", IntUniform{2, 200}},
                     {"min_samples_leaf", Uniform{0.001, 0.05}},
                     {"min_samples_split", IntUniform{2, 10}},
                     {"max_features", Choice{{std::string("all"), std::string("sqrt")}}}}};
        case ModelFamily::XGBoost: return gbdt_space(id, false);
        case ModelFamily::LGBM: return gbdt_space(id, true);
        case ModelFamily::CatBoost: return gbdt_space(id, false);
        case ModelFamily::RNN: return neural_space(id, {std::string("8/1"), std::string("16/4/1")});
        case ModelFamily::LSTM: return neural_space(id, {std::string("8/1"), std::string("8/4/1")});
    }
    throw std::invalid_argument("unknown model family");
}

Params reference_params(ModelFamily family) {
    using I = std::int64_t;
    switch (family) {
        case ModelFamily::Ridge: return {{"window", I{2}}, {"alpha", 0.010034555}};
        case ModelFamily::SVR: return {{"window", I{4}}, {"C", 0.151861}, {"epsilon", 0.002203}};
        case ModelFamily::ARIMA: return {{"window", I{4}}, {"p", I{4}}, {"d", I{0}}, {"q", I{0}}};
        case ModelFamily::SARIMA:
            return {{"window", I{12}}, {"p", I{1}}, {"d", I{1}}, {"q", I{2}},
                    {"P", I{0}},       {"D", I{1}}, {"Q", I{1}}, {"M", I{12}}};
        case ModelFamily::RandomForest:
            return {{"window", I{6}},
                    {"n_estimators", I{99}},
                    {"min_samples_leaf", 0.002446626},
                    {"min_samples_split", I{5}},
                    {"max_features", std::string("all")}};
        case ModelFamily::ExtraTrees:
            return {{"window", I{5}},
                    {"n_estimators", I{115}},
                    {"max_depth", I{198}},
                    {"min_samples_leaf", 0.012833897},
                    {"min_samples_split", I{2}},
                    {"max_features", std::string("all")}};
        case ModelFamily::XGBoost:
            return {{"window", I{7}}, {"learning_rate", 0.111361130}, {"max_depth", I{5}}, {"n_estimators", I{114}}};
        case ModelFamily::LGBM:
            return {{"window", I{4}},
                    {"learning_rate", 0.080865967},
                    {"max_depth", I{3}},
                    {"n_estimators", I{185}},
                    {"min_child_samples", I{5}}};
        case ModelFamily::CatBoost:
            return {{"window", I{3}}, {"learning_rate", 0.218951837}, {"max_depth", I{5}}, {"n_estimators", I{148}}};
        case ModelFamily::RNN:
            return {{"window", I{7}},          {"layers", std::string("16/4/1")}, {"dropout", 0.02},
                    {"activation", std::string("relu")}, {"epochs", I{30}},  {"batch_size", I{10}},
                    {"learning_rate", 1e-3}};
        case ModelFamily::LSTM:
            return {{"window", I{6}},          {"layers", std::string("8/4/1")}, {"dropout", 0.02},
                    {"activation", std::string("relu")}, {"epochs", I{30}}, {"batch_size", I{10}},
                    {"learning_rate", 1e-3}};
    }
    throw std::invalid_argument("unknown model family");
}

SarimaSpec sarima_spec_from_params(ModelFamily family, const Params& params) {
    SarimaSpec spec;
    spec.p = static_cast<int>(param_int_or(params, "p", 0));
    spec.d = static_cast<int>(param_int_or(params, "d", 0));
    spec.q = static_cast<int>(param_int_or(params, "q", 0));
    if (family == ModelFamily::SARIMA) {
        spec.P = static_cast<int>(param_int_or(params, "P", 0));
        spec.D = static_cast<int>(param_int_or(params, "D", 0));
        spec.Q = static_cast<int>(param_int_or(params, "Q", 0));
        spec.M = static_cast<int>(param_int_or(params, "M", spec.P + spec.D + spec.Q > 0 ? 12 : 1));
    }
    spec.validate();
    return spec;
}

namespace {

MaxFeatures max_features_from(const Params& params) {
    const std::string mf = param_string_or(params, "max_features", "all");
    MaxFeatures out;
    if (mf == "all" || mf == "auto") {
        out.kind = MaxFeatures::Kind::All;
    } else if (mf == "sqrt") {
        out.kind = MaxFeatures::Kind::Sqrt;
    } else {
        throw std::invalid_argument("unknown max_features '" + mf + "'");
    }
    return out;
}

NetSpec net_spec_from(ModelFamily family, const Params& params) {
    NetSpec spec = family == ModelFamily::LSTM ? NetSpec::lstm_default() : NetSpec::rnn_default();
    if (params.count("layers")) spec.layer_sizes = parse_layers(param_string(params, "layers"));
    spec.dropout = param_double_or(params, "dropout", spec.dropout);
    spec.activation = activation_from_string(param_string_or(params, "activation", "relu"));
    spec.epochs = static_cast<int>(param_int_or(params, "epochs", spec.epochs));
    spec.batch_size = static_cast<int>(param_int_or(params, "batch_size", spec.batch_size));
    spec.adam.learning_rate = param_double_or(params, "learning_rate", spec.adam.learning_rate);
    spec.validate();
    return spec;
}

bool flattened(const Params& params) { return param_string_or(params, "layout", "sequence") == "flattened"; }

std::string series_fingerprint(std::span<const double> series) {
    Fnv1a h;
    for (double v : series) h.update(v);
    return h.hex();
}

}  // namespace

TrainedModel fit_tabular(ModelFamily family, const SupervisedDataset& train, const Params& params, std::uint64_t seed,
                         int threads) {
    if (family_info(family).single_series) {
        throw std::invalid_argument(family_info(family).id + " is a single-series model");
    }
    if (train.samples() == 0) throw std::invalid_argument("empty training set");
    TrainedModel tm;
    tm.family = family;
    tm.params = params;
    tm.params["window"] = std::int64_t{train.window};
    tm.window = train.window;
    tm.scenario = train.scenario;
    tm.target = train.target;
    tm.markets = train.markets;
    tm.offsets = train.offsets;
    for (const auto& f : train.feature_names) tm.feature_names.push_back(f.to_string());
    tm.trained_on = train.fingerprint();
    tm.seed = seed;
    const Eigen::MatrixXd& X = train.features;
    const Eigen::VectorXd& y = train.targets;
    switch (family) {
        case ModelFamily::Ridge: tm.model = ridge_fit(X, y, param_double(params, "alpha")); break;
        case ModelFamily::SVR: {
            SvrOptions opt;
            opt.C = param_double(params, "C");
            opt.epsilon = param_double(params, "epsilon");
            opt.standardize = param_int_or(params, "standardize", 0) != 0;
            tm.model = svr_fit(X, y, opt, seed);
            break;
        }
        case ModelFamily::RandomForest:
        case ModelFamily::ExtraTrees: {
            TreeParams tp;
            if (params.count("max_depth")) tp.max_depth = static_cast<int>(param_int(params, "max_depth"));
            tp.min_samples_split = static_cast<int>(param_int_or(params, "min_samples_split", 2));
            tp.min_samples_leaf = param_double_or(params, "min_samples_leaf", 1.0);
            tp.max_features = max_features_from(params);
            const auto ef = family == ModelFamily::RandomForest ? EnsembleFamily::RandomForest : EnsembleFamily::ExtraTrees;
            ForestOptions fo;
            fo.threads = threads;
            tm.model = forest_fit(X, y, ef, static_cast<int>(param_int_or(params, "n_estimators", 100)), tp, seed, fo);
            break;
        }
        case ModelFamily::XGBoost:
        case ModelFamily::LGBM:
        case ModelFamily::CatBoost: {
            GbdtParams gp;
            gp.learning_rate = param_double(params, "learning_rate");
            gp.max_depth = static_cast<int>(param_int(params, "max_depth"));
            gp.n_estimators = static_cast<int>(param_int(params, "n_estimators"));
            gp.min_samples_leaf = static_cast<double>(param_int_or(params, "min_child_samples", 1));
            tm.model = gbdt_fit(X, y, gp, seed);
            break;
        }
        case ModelFamily::RNN:
        case ModelFamily::LSTM: {
            const NetSpec spec = net_spec_from(family, params);
            tm.model = net_fit(to_sequences(X, train.markets.size(), train.window, flattened(params)), y, spec, seed);
            break;
        }
        case ModelFamily::ARIMA:
        case ModelFamily::SARIMA: break;
    }
    return tm;
}

Eigen::VectorXd predict_tabular(const TrainedModel& tm, const Eigen::MatrixXd& features) {
    return std::visit(
        [&](const auto& m) -> Eigen::VectorXd {
            using T = std::decay_t<decltype(m)>;
            if constexpr (std::is_same_v<T, LinearModel>) {
                return linear_predict(m, features);
            } else if constexpr (std::is_same_v<T, EnsembleModel>) {
                return ensemble_predict(m, features);
            } else if constexpr (std::is_same_v<T, NetworkModel>) {
                return net_predict(m, to_sequences(features, tm.markets.size(), tm.window, flattened(tm.params)));
            } else {
                throw std::invalid_argument("single-series models predict from a series, not a feature matrix");
            }
        },
        tm.model);
}

TrainedModel fit_series(ModelFamily family, std::span<const double> series, const Params& params,
                        std::uint64_t seed) {
    if (!family_info(family).single_series) {
        throw std::invalid_argument(family_info(family).id + " is not a single-series model");
    }
    TrainedModel tm;
    tm.family = family;
    tm.params = params;
    tm.params.erase("window");
    tm.trained_on = series_fingerprint(series);
    tm.seed = seed;
    tm.model = sarima_fit(series, sarima_spec_from_params(family, params), seed);
    return tm;
}

std::vector<double> predict_series(const TrainedModel& tm, std::span<const double> series, std::size_t from) {
    const auto* m = std::get_if<SarimaModel>(&tm.model);
    if (!m) throw std::invalid_argument("not a single-series model");
    return sarima_one_step(*m, series, from);
}

namespace {

nlohmann::json inner_json(const ModelVariant& v) {
    return std::visit([](const auto& m) { return to_json(m); }, v);
}

}  // namespace

std::string TrainedModel::fingerprint() const {
    Fnv1a h;
    h.update(to_json(*this).dump());
    return h.hex();
}

nlohmann::json to_json(const TrainedModel& tm) {
    nlohmann::json j = {{"family", family_info(tm.family).id},
                        {"hyperparams", to_json(tm.params)},
                        {"seed", tm.seed},
                        {"trained_on", tm.trained_on},
                        {"model", inner_json(tm.model)}};
    if (!family_info(tm.family).single_series) {
        j["window"] = tm.window;
        j["scenario"] = tm.scenario.name();
        j["target"] = tm.target;
        j["markets"] = tm.markets;
        j["offsets"] = tm.offsets;
        j["feature_names"] = tm.feature_names;
    } else if (!tm.target.empty()) {
        j["target"] = tm.target;
    }
    return j;
}

TrainedModel trained_model_from_json(const nlohmann::json& j) {
    TrainedModel tm;
    tm.family = family_from_string(j.at("family").get<std::string>());
    tm.params = params_from_json(j.at("hyperparams"));
    tm.seed = j.value("seed", std::uint64_t{0});
    tm.trained_on = j.value("trained_on", std::string());
    tm.target = j.value("target", std::string());
    const auto& inner = j.at("model");
    switch (tm.family) {
        case ModelFamily::Ridge:
        case ModelFamily::SVR: tm.model = linear_model_from_json(inner); break;
        case ModelFamily::ARIMA:
        case ModelFamily::SARIMA: tm.model = sarima_model_from_json(inner); break;
        case ModelFamily::RandomForest:
        case ModelFamily::ExtraTrees:
        case ModelFamily::XGBoost:
        case ModelFamily::LGBM:
        case ModelFamily::CatBoost: tm.model = ensemble_model_from_json(inner); break;
        case ModelFamily::RNN:
        case ModelFamily::LSTM: tm.model = network_model_from_json(inner); break;
    }
    if (!family_info(tm.family).single_series) {
        tm.window = j.at("window");
        tm.scenario = LagScenario::parse(j.at("scenario").get<std::string>());
        tm.markets = j.at("markets").get<std::vector<std::string>>();
        tm.offsets = j.at("offsets").get<std::vector<int>>();
        tm.feature_names = j.at("feature_names").get<std::vector<std::string>>();
        if (tm.offsets.size() != tm.markets.size()) throw std::invalid_argument("offsets do not match markets");
    }
    return tm;
}

}  // namespace porkcast
