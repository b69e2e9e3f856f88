#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <random>
#include <string>
#include <variant>
#include <vector>

#include <nlohmann/json.hpp>

namespace porkcast {

using ParamValue = std::variant<double, std::int64_t, std::string>;
using Params = std::map<std::string, ParamValue>;

struct Uniform {
    double lo = 0.0, hi = 1.0;
};
struct LogUniform {
    double lo = 1e-3, hi = 1.0;
};
/// Inclusive on both ends.
struct IntUniform {
    std::int64_t lo = 0, hi = 1;
};
struct Choice {
    std::vector<ParamValue> values;
};
using ParamDist = std::variant<Uniform, LogUniform, IntUniform, Choice>;

struct ParamSpec {
    std::string name;
    ParamDist dist;
};

struct SearchSpace {
    std::string family;
    std::vector<ParamSpec> params;  // sampled in this order

    /// Throws std::invalid_argument: lo >= hi (lo > hi for IntUniform), LogUniform lo <= 0, empty Choice, duplicate names.
    void validate() const;
    /// True when `value` lies in the named parameter's support.
    bool contains(const std::string& name, const ParamValue& value) const;
};

/// Draws every parameter independently, in declaration order, advancing `rng`.
Params sample_params(const SearchSpace& space, std::mt19937_64& rng);

double param_double(const Params& p, const std::string& name);
std::int64_t param_int(const Params& p, const std::string& name);
std::string param_string(const Params& p, const std::string& name);
double param_double_or(const Params& p, const std::string& name, double fallback);
std::int64_t param_int_or(const Params& p, const std::string& name, std::int64_t fallback);
std::string param_string_or(const Params& p, const std::string& name, const std::string& fallback);

nlohmann::json to_json(const Params& p);
Params params_from_json(const nlohmann::json& j);
std::string to_string(const ParamValue& v);

struct TrialRecord {
    std::size_t index = 0;
    Params params;
    std::optional<double> rmse;  // set when status is ok
    double wall_seconds = 0.0;
    bool ok = false;
    std::string reason;  // failure reason

    /// `include_wall_time` false drops the only non-reproducible field.
    nlohmann::json to_json(bool include_wall_time = true) const;
};

struct SearchResult {
    Params best;
    std::size_t best_index = 0;
    double best_rmse = 0.0;
    std::vector<TrialRecord> trials;  // ordered by index
};

/// Validation RMSE for a parameter point. Exceptions and non-finite values mark the trial failed.
using Objective = std::function<double(const Params&)>;

/**
 * Evaluates `trials` points; trial i samples from its own generator seeded
 * with mix_seed(seed, i), so records do not depend on `threads`. The best
 * trial has the lowest RMSE among ok trials, ties going to the lowest index.
 * Throws std::invalid_argument for trials < 1 and FitError when every trial fails.
 */
SearchResult random_search(const SearchSpace& space, int trials, const Objective& objective, std::uint64_t seed,
                           int threads = 1);

/// One JSON object per line.
std::string trials_to_ndjson(const std::vector<TrialRecord>& trials, bool include_wall_time = true);

}  // namespace porkcast
