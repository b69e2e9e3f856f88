#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "porkcast/ingest.hpp"
#include "porkcast/synthetic.hpp"

// Writes a synthetic eight-market price CSV to stdout.
int main(int argc, char** argv) {
    CLI::App app{"Synthetic weekly price panel with lead-lag structure", "porkcast-synth"};
    std::uint64_t seed = 2022;
    porkcast::SyntheticOptions opt;
    std::string start = opt.start.to_string();
    app.add_option("--seed", seed, "Generator seed")->capture_default_str();
    app.add_option("--weeks", opt.weeks, "Number of weeks")->check(CLI::Range(3, 2000))->capture_default_str();
    app.add_option("--start", start, "First ISO week, YYYY-Www")->capture_default_str();
    app.add_flag("--outlier", opt.inject_outlier, "Plant one price spike to exercise the repair step");
    CLI11_PARSE(app, argc, argv);
    try {
        opt.start = porkcast::IsoWeek::parse(start);
        std::cout << porkcast::serialize_price_csv(porkcast::synthetic_series(seed, opt));
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
