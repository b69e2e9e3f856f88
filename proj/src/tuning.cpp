#include "porkcast/tuning.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <set>
#include <stdexcept>

#include "porkcast/errors.hpp"
#include "porkcast/hash.hpp"
#include "porkcast/parallel.hpp"

namespace porkcast {

namespace {

template <class... Ts>
struct overloaded : Ts... {
    using Ts::operator()...;
};
template <class... Ts>
overloaded(Ts...) -> overloaded<Ts...>;

}  // namespace

void SearchSpace::validate() const {
    std::set<std::string> seen;
    for (const auto& p : params) {
        if (!seen.insert(p.name).second) throw std::invalid_argument("duplicate parameter: " + p.name);
        std::visit(overloaded{
                       [&](const Uniform& d) {
                           if (!(d.lo < d.hi)) throw std::invalid_argument(p.name + ": Uniform needs lo < hi");
                       },
                       [&](const LogUniform& d) {
                           if (!(d.lo > 0.0 && d.lo < d.hi)) {
                               throw std::invalid_argument(p.name + ": LogUniform needs 0 < lo < hi");
                           }
                       },
                       [&](const IntUniform& d) {
                           if (d.lo > d.hi) throw std::invalid_argument(p.name + ": IntUniform needs lo <= hi");
                       },
                       [&](const Choice& d) {
                           if (d.values.empty()) throw std::invalid_argument(p.name + ": empty Choice");
                       },
                   },
                   p.dist);
    }
}

bool SearchSpace::contains(const std::string& name, const ParamValue& value) const {
    for (const auto& p : params) {
        if (p.name != name) continue;
        return std::visit(overloaded{
                              [&](const Uniform& d) {
                                  const auto* v = std::get_if<double>(&value);
                                  return v && *v >= d.lo && *v < d.hi;
                              },
                              [&](const LogUniform& d) {
                                  const auto* v = std::get_if<double>(&value);
                                  return v && *v >= d.lo && *v <= d.hi;
                              },
                              [&](const IntUniform& d) {
                                  const auto* v = std::get_if<std::int64_t>(&value);
                                  return v && *v >= d.lo && *v <= d.hi;
                              },
                              [&](const Choice& d) {
                                  for (const auto& c : d.values) {
                                      if (c == value) return true;
                                  }
                                  return false;
                              },
                          },
                          p.dist);
    }
    return false;
}

Params sample_params(const SearchSpace& space, std::mt19937_64& rng) {
    Params out;
    for (const auto& p : space.params) {
        out[p.name] = std::visit(overloaded{
                                     [&](const Uniform& d) -> ParamValue {
                                         return std::uniform_real_distribution<double>(d.lo, d.hi)(rng);
                                     },
                                     [&](const LogUniform& d) -> ParamValue {
                                         const double u = std::uniform_real_distribution<double>(
                                             std::log(d.lo), std::log(d.hi))(rng);
                                         return std::clamp(std::exp(u), d.lo, d.hi);
                                     },
                                     [&](const IntUniform& d) -> ParamValue {
                                         return std::uniform_int_distribution<std::int64_t>(d.lo, d.hi)(rng);
                                     },
                                     [&](const Choice& d) -> ParamValue {
                                         return d.values[std::uniform_int_distribution<std::size_t>(
                                             0, d.values.size() - 1)(rng)];
                                     },
                                 },
                                 p.dist);
    }
    return out;
}

namespace {

const ParamValue& lookup(const Params& p, const std::string& name) {
    const auto it = p.find(name);
    if (it == p.end()) throw std::invalid_argument("missing hyperparameter: " + name);
    return it->second;
}

}  // namespace

double param_double(const Params& p, const std::string& name) {
    const auto& v = lookup(p, name);
    if (const auto* d = std::get_if<double>(&v)) return *d;
    if (const auto* i = std::get_if<std::int64_t>(&v)) return static_cast<double>(*i);
    throw std::invalid_argument("hyperparameter " + name + " is not numeric");
}

std::int64_t param_int(const Params& p, const std::string& name) {
    const auto& v = lookup(p, name);
    if (const auto* i = std::get_if<std::int64_t>(&v)) return *i;
    if (const auto* d = std::get_if<double>(&v); d && *d == std::floor(*d)) return static_cast<std::int64_t>(*d);
    throw std::invalid_argument("hyperparameter " + name + " is not an integer");
}

std::string param_string(const Params& p, const std::string& name) {
    const auto& v = lookup(p, name);
    if (const auto* s = std::get_if<std::string>(&v)) return *s;
    throw std::invalid_argument("hyperparameter " + name + " is not a string");
}

double param_double_or(const Params& p, const std::string& name, double fallback) {
    return p.count(name) ? param_double(p, name) : fallback;
}

std::int64_t param_int_or(const Params& p, const std::string& name, std::int64_t fallback) {
    return p.count(name) ? param_int(p, name) : fallback;
}

std::string param_string_or(const Params& p, const std::string& name, const std::string& fallback) {
    return p.count(name) ? param_string(p, name) : fallback;
}

std::string to_string(const ParamValue& v) {
    return std::visit(overloaded{
                          [](double d) { return nlohmann::json(d).dump(); },
                          [](std::int64_t i) { return std::to_string(i); },
                          [](const std::string& s) { return s; },
                      },
                      v);
}

nlohmann::json to_json(const Params& p) {
    nlohmann::json j = nlohmann::json::object();
    for (const auto& [k, v] : p) {
        std::visit([&](const auto& x) { j[k] = x; }, v);
    }
    return j;
}

Params params_from_json(const nlohmann::json& j) {
    Params p;
    for (const auto& [k, v] : j.items()) {
        if (v.is_number_integer()) {
            p[k] = v.get<std::int64_t>();
        } else if (v.is_number()) {
            p[k] = v.get<double>();
        } else if (v.is_string()) {
            p[k] = v.get<std::string>();
        } else if (v.is_boolean()) {
            p[k] = std::int64_t{v.get<bool>() ? 1 : 0};
        } else {
            throw std::invalid_argument("hyperparameter " + k + " must be a number or string");
        }
    }
    return p;
}

nlohmann::json TrialRecord::to_json(bool include_wall_time) const {
    nlohmann::json j = {{"index", index}, {"params", porkcast::to_json(params)}, {"status", ok ? "ok" : "failed"}};
    if (rmse) j["rmse"] = *rmse;
    if (!ok) j["reason"] = reason;
    if (include_wall_time) j["wall_seconds"] = wall_seconds;
    return j;
}

SearchResult random_search(const SearchSpace& space, int trials, const Objective& objective, std::uint64_t seed,
                           int threads) {
    if (trials < 1) throw std::invalid_argument("trials must be >= 1");
    space.validate();
    SearchResult result;
    result.trials.resize(static_cast<std::size_t>(trials));
    parallel_for(result.trials.size(), threads, [&](std::size_t i) {
        TrialRecord& rec = result.trials[i];
        rec.index = i;
        std::mt19937_64 rng(mix_seed(seed, i));
        rec.params = sample_params(space, rng);
        const auto start = std::chrono::steady_clock::now();
        try {
            const double v = objective(rec.params);
            if (std::isfinite(v)) {
                rec.rmse = v;
                rec.ok = true;
            } else {
                rec.reason = "non-finite objective";
            }
        } catch (const std::exception& e) {
            rec.reason = e.what();
        }
        rec.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    });
    bool found = false;
    for (const auto& rec : result.trials) {
        if (rec.ok && (!found || *rec.rmse < result.best_rmse)) {
            found = true;
            result.best_rmse = *rec.rmse;
            result.best_index = rec.index;
            result.best = rec.params;
        }
    }
    if (!found) {
        throw FitError("all " + std::to_string(trials) + " trials failed; first reason: " + result.trials[0].reason);
    }
    return result;
}

std::string trials_to_ndjson(const std::vector<TrialRecord>& trials, bool include_wall_time) {
    std::string out;
    for (const auto& t : trials) {
        out += t.to_json(include_wall_time).dump();
        out += '\n';
    }
    return out;
}

}  // namespace porkcast
