#include <doctest.h>

#include <cmath>
#include <set>

#include "porkcast/errors.hpp"
#include "porkcast/models.hpp"
#include "porkcast/tuning.hpp"

using namespace porkcast;

TEST_CASE("sample_params examples") {
    SearchSpace single{"t", {{"only", Choice{{std::string("a")}}}}};
    std::mt19937_64 rng(1);
    for (int i = 0; i < 100; ++i) CHECK(param_string(sample_params(single, rng), "only") == "a");

    SearchSpace ints{"t", {{"window", IntUniform{2, 12}}}};
    std::set<std::int64_t> seen;
    for (int i = 0; i < 10'000; ++i) seen.insert(param_int(sample_params(ints, rng), "window"));
    CHECK(seen.size() == 11);
    CHECK(*seen.begin() == 2);
    CHECK(*seen.rbegin() == 12);

    std::mt19937_64 a(99), b(99);
    const auto space = default_search_space(ModelFamily::LSTM);
    for (int i = 0; i < 50; ++i) CHECK(to_json(sample_params(space, a)) == to_json(sample_params(space, b)));
}

TEST_CASE("samples stay in their support") {
    std::mt19937_64 rng(2);
    for (const auto& info : model_families()) {
        const auto space = default_search_space(info.family);
        CHECK_NOTHROW(space.validate());
        bool has_window = false;
        for (const auto& p : space.params) has_window |= p.name == "window";
        CHECK(has_window);
        for (int i = 0; i < 300; ++i) {
            const auto p = sample_params(space, rng);
            CHECK(p.size() == space.params.size());
            for (const auto& [name, value] : p) CHECK(space.contains(name, value));
        }
        for (const auto& [name, value] : reference_params(info.family)) CHECK(space.contains(name, value));
    }
    SearchSpace log{"t", {{"x", LogUniform{1e-4, 10.0}}}};
    int below_1e2 = 0;
    for (int i = 0; i < 10'000; ++i) below_1e2 += param_double(sample_params(log, rng), "x") < 1e-2;
    // Log-uniform: two of five decades.
    CHECK(below_1e2 > 3700);
    CHECK(below_1e2 < 4300);
}

TEST_CASE("space validation") {
    CHECK_THROWS_AS((SearchSpace{"t", {{"x", Uniform{1.0, 1.0}}}}.validate()), std::invalid_argument);
    CHECK_THROWS_AS((SearchSpace{"t", {{"x", LogUniform{0.0, 1.0}}}}.validate()), std::invalid_argument);
    CHECK_THROWS_AS((SearchSpace{"t", {{"x", IntUniform{3, 2}}}}.validate()), std::invalid_argument);
    CHECK_NOTHROW((SearchSpace{"t", {{"x", IntUniform{2, 2}}}}.validate()));
    CHECK_THROWS_AS((SearchSpace{"t", {{"x", Choice{}}}}.validate()), std::invalid_argument);
    CHECK_THROWS_AS((SearchSpace{"t", {{"x", Uniform{}}, {"x", Uniform{}}}}.validate()), std::invalid_argument);
}

TEST_CASE("random_search examples") {
    const SearchSpace space{"t", {{"x", Uniform{0.0, 10.0}}}};
    const auto one = random_search(space, 1, [](const Params& p) { return param_double(p, "x"); }, 3);
    CHECK(one.trials.size() == 1);
    CHECK(one.best_index == 0);

    const auto flat = random_search(space, 20, [](const Params&) { return 1.0; }, 3);
    CHECK(flat.best_index == 0);

    const auto convex = random_search(
        space, 1000, [](const Params& p) { return std::pow(param_double(p, "x") - 3.0, 2); }, 4);
    CHECK(std::abs(param_double(convex.best, "x") - 3.0) < 0.05);

    CHECK_THROWS_AS(random_search(space, 0, [](const Params&) { return 1.0; }, 1), std::invalid_argument);
    CHECK_THROWS_AS(random_search(space, 5, [](const Params&) -> double { throw FitError("no"); }, 1), FitError);
}

TEST_CASE("failed trials are recorded and skipped") {
    const SearchSpace space{"t", {{"x", Uniform{0.0, 1.0}}}};
    const auto r = random_search(
        space, 50,
        [](const Params& p) {
            const double x = param_double(p, "x");
            if (x < 0.5) throw FitError("too small");
            return x > 0.9 ? std::nan("") : x;
        },
        8);
    for (const auto& t : r.trials) {
        const double x = param_double(t.params, "x");
        CHECK(t.ok == (x >= 0.5 && x <= 0.9));
        if (!t.ok) CHECK_FALSE(t.reason.empty());
        if (t.ok) CHECK(*t.rmse >= r.best_rmse);
    }
    CHECK(r.trials[r.best_index].ok);
}

TEST_CASE("search records do not depend on threads and extending the budget keeps the prefix") {
    const auto space = default_search_space(ModelFamily::RandomForest);
    auto objective = [](const Params& p) {
        return std::abs(param_double(p, "min_samples_leaf") - 0.02) + 0.001 * param_int(p, "window");
    };
    const auto a = random_search(space, 64, objective, 11, 1);
    const auto b = random_search(space, 64, objective, 11, 4);
    CHECK(trials_to_ndjson(a.trials, false) == trials_to_ndjson(b.trials, false));
    CHECK(a.best_index == b.best_index);
    const auto longer = random_search(space, 128, objective, 11, 2);
    for (std::size_t i = 0; i < 64; ++i) CHECK(to_json(longer.trials[i].params) == to_json(a.trials[i].params));
    CHECK(longer.best_rmse <= a.best_rmse);
}

TEST_CASE("params JSON round trip keeps types") {
    Params p{{"alpha", 0.5}, {"window", std::int64_t{4}}, {"layers", std::string("64,1")}};
    const auto back = params_from_json(to_json(p));
    CHECK(back == p);
    CHECK(param_int(back, "window") == 4);
    CHECK(param_int_or(back, "missing", 9) == 9);
    CHECK_THROWS(param_int(back, "alpha"));
}
