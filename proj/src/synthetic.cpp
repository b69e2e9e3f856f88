#include "porkcast/synthetic.hpp"

#include <cmath>
#include <random>
#include <stdexcept>

namespace porkcast {

std::vector<MarketSeries> synthetic_series(std::uint64_t seed, const SyntheticOptions& opt,
                                           const PublicationCalendar& calendar) {
    if (opt.weeks < 3) throw std::invalid_argument("synthetic panel needs at least 3 weeks");
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> gauss(0.0, 1.0);

    std::vector<double> latent(static_cast<std::size_t>(opt.weeks) + 1);
    const double stationary_sd = opt.sigma / std::sqrt(std::max(1e-12, 1.0 - opt.phi * opt.phi));
    latent[0] = opt.level + stationary_sd * gauss(rng);
    for (std::size_t t = 1; t < latent.size(); ++t) {
        latent[t] = opt.level + opt.phi * (latent[t - 1] - opt.level) + opt.sigma * gauss(rng);
    }

    std::vector<MarketSeries> out;
    for (const auto& [id, day] : calendar.entries()) {
        MarketSeries s;
        s.market = MarketId(id);
        const double basis = 0.02 * gauss(rng);  // persistent regional premium
        for (int t = 0; t < opt.weeks; ++t) {
            const double now = latent[static_cast<std::size_t>(t) + 1];
            const double before = latent[static_cast<std::size_t>(t)];
            double v = day < Weekday::Thu ? now : opt.follow * now + (1.0 - opt.follow) * before;
            v += basis + opt.noise * gauss(rng);
            v = std::max(0.1, std::round(v * 1000.0) / 1000.0);
            const IsoWeek week = week_add(opt.start, t);
            s.observations.push_back({s.market, week, Price::from_double(v), day});
        }
        out.push_back(std::move(s));
    }
    if (opt.inject_outlier) {
        for (auto& s : out) {
            if (s.market.id != "ES-HUESCA") continue;
            auto& obs = s.observations[s.observations.size() / 3];
            obs.price = Price::from_double(std::max(0.1, obs.price.value() - 1.0));
        }
    }
    return out;
}

PricePanel synthetic_panel(std::uint64_t seed, const SyntheticOptions& options, const PublicationCalendar& calendar) {
    return align_panel(synthetic_series(seed, options, calendar)).panel;
}

}  // namespace porkcast
