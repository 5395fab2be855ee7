#pragma once

#include "fuelshock/aids.hpp"
#include "fuelshock/panel.hpp"
#include "fuelshock/types.hpp"

#include <cmath>
#include <cstdint>
#include <numbers>
#include <string>
#include <vector>

namespace fuelshock::synthetic {

/// Small self-contained generator (xoshiro256**) so that seeded draws are
/// identical across standard libraries; std::normal_distribution is not
/// portable.
class Rng {
public:
    explicit Rng(std::uint64_t seed)
    {
        // splitmix64 expansion of the seed
        std::uint64_t x = seed;
        for (auto& word : state_) {
            x += 0x9e3779b97f4a7c15ULL;
            std::uint64_t z = x;
            z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
            z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
            word = z ^ (z >> 31);
        }
    }

    std::uint64_t next_u64()
    {
        const auto rotl = [](std::uint64_t v, int k) {
            return (v << k) | (v >> (64 - k));
        };
        const std::uint64_t result = rotl(state_[1] * 5, 7) * 9;
        const std::uint64_t t = state_[1] << 17;
        state_[2] ^= state_[0];
        state_[3] ^= state_[1];
        state_[1] ^= state_[2];
        state_[0] ^= state_[3];
        state_[2] ^= t;
        state_[3] = rotl(state_[3], 45);
        return result;
    }

    /// Uniform in [0, 1).
    double uniform() { return double(next_u64() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    double normal()
    {
        if (have_spare_) {
            have_spare_ = false;
            return spare_;
        }
        double u1 = uniform();
        while (u1 <= 1e-300) u1 = uniform();
        const double u2 = uniform();
        const double r = std::sqrt(-2.0 * std::log(u1));
        const double a = 2.0 * std::numbers::pi * u2;
        spare_ = r * std::sin(a);
        have_spare_ = true;
        return r * std::cos(a);
    }

private:
    std::uint64_t state_[4] = {};
    double spare_ = 0.0;
    bool have_spare_ = false;
};

/// Draw gamma and beta satisfying symmetry, homogeneity and adding-up
/// exactly; alpha starts at the target shares and is calibrated afterwards.
inline AidsParameters random_restricted_parameters(Rng& rng, int n, double gamma_scale = 0.01,
                                                   double beta_scale = 0.05)
{
    AidsParameters p;
    p.alpha0 = 0.0;
    p.alpha.resize(n);
    for (int i = 0; i < n; ++i) p.alpha(i) = rng.uniform(1.0, 2.0);
    p.alpha /= p.alpha.sum();

    p.beta.resize(n);
    for (int i = 0; i < n; ++i) p.beta(i) = rng.uniform(-beta_scale, beta_scale);
    p.beta.array() -= p.beta.mean();

    Eigen::MatrixXd g(n, n);
    for (int i = 0; i < n; ++i)
        for (int j = i; j < n; ++j)
            g(i, j) = g(j, i) = rng.uniform(-gamma_scale, gamma_scale);
    // Double-centering keeps symmetry and zeroes every row and column sum.
    const Eigen::VectorXd row_mean = g.rowwise().mean();
    const double grand = row_mean.mean();
    p.gamma = g;
    p.gamma.colwise() -= row_mean;
    p.gamma.rowwise() -= row_mean.transpose();
    p.gamma.array() += grand;
    return p;
}

/// Shift alpha so the systematic shares equal `target_shares` at the given
/// mean point. Because ln P depends on alpha this is a (rapidly converging)
/// fixed point; adding-up is preserved exactly at every step.
inline AidsParameters calibrate_alpha(AidsParameters p, const Eigen::VectorXd& target_shares,
                                      const Eigen::VectorXd& mean_log_prices,
                                      double mean_log_expenditure)
{
    p.alpha = target_shares;
    for (int it = 0; it < 200; ++it) {
        const double ln_p = translog_price_index(mean_log_prices, p);
        Eigen::VectorXd alpha_new = target_shares - p.gamma * mean_log_prices -
                                    p.beta * (mean_log_expenditure - ln_p);
        const double change = (alpha_new - p.alpha).lpNorm<Eigen::Infinity>();
        p.alpha = alpha_new;
        if (change < 1e-15) break;
    }
    return p;
}

struct GeneratorConfig {
    int n_goods = 4;
    int n_groups = 310;
    double noise_sd = 0.005;   // share-equation disturbance scale
    double price_log_sd = 0.2; // spread of log prices around class level
    double expenditure_log_sd = 0.4;
    double gamma_scale = 0.01;
    double beta_scale = 0.05;
    double min_share = 2e-3; // resample an observation below this
};

struct SyntheticSystem {
    AidsParameters truth;
    DemandSystemData data;
};

/// Simulate a demand system from known restricted parameters: distinct
/// seeded price series per good, log-normal expenditure, translog shares
/// plus mean-centered Gaussian noise (so shares still sum to one).
inline SyntheticSystem generate_system(std::uint64_t seed, const GeneratorConfig& cfg = {})
{
    Rng rng(seed);
    SyntheticSystem out;
    const int n = cfg.n_goods;
    const int t = cfg.n_groups;
    AidsParameters truth = random_restricted_parameters(rng, n, cfg.gamma_scale, cfg.beta_scale);
    const Eigen::VectorXd target_shares = truth.alpha;

    Eigen::VectorXd price_level(n);
    for (int j = 0; j < n; ++j) price_level(j) = rng.uniform(1.0, 2.2); // log currency/L
    const double log_x_level = rng.uniform(18.0, 22.0);
    out.truth = calibrate_alpha(truth, target_shares, price_level, log_x_level);

    out.data.goods.resize(n);
    for (int j = 0; j < n; ++j) out.data.goods[j] = "good" + std::to_string(j + 1);
    out.data.shares.resize(t, n);
    out.data.log_prices.resize(t, n);
    out.data.log_expenditure.resize(t);
    out.data.group_labels.resize(t);

    for (int r = 0; r < t; ++r) {
        out.data.group_labels[r] = "g" + std::to_string(r + 1);
        for (int attempt = 0;; ++attempt) {
            if (attempt > 500)
                throw Error("synthetic generator failed to find interior shares; "
                            "parameters too aggressive");
            Eigen::VectorXd lp(n);
            for (int j = 0; j < n; ++j)
                lp(j) = price_level(j) + cfg.price_log_sd * rng.normal();
            const double lx = log_x_level + cfg.expenditure_log_sd * rng.normal();
            Eigen::VectorXd w = implied_shares(out.truth, lp, lx);
            Eigen::VectorXd noise(n);
            for (int j = 0; j < n; ++j) noise(j) = cfg.noise_sd * rng.normal();
            noise.array() -= noise.mean();
            w += noise;
            if (w.minCoeff() < cfg.min_share || w.maxCoeff() > 1.0 - cfg.min_share)
                continue;
            out.data.log_prices.row(r) = lp.transpose();
            out.data.log_expenditure(r) = lx;
            out.data.shares.row(r) = w.transpose();
            break;
        }
    }
    return out;
}

// ---------------------------------------------------------------------------
// File-backed sample panel
// ---------------------------------------------------------------------------

inline constexpr std::uint64_t kSamplePanelSeed = 1354040;

struct SamplePanel {
    FuelPanel panel;
    AidsParameters truth;
};

/// Deterministic synthetic panel shaped like the real data set: 31 provinces
/// x 10 years x the configured vehicle classes, with distinct price series
/// per class. Vehicle populations are backed out of the target budget shares
/// so that derive_activity reproduces the generating system exactly.
inline SamplePanel generate_sample_system(const FleetParams& fleet,
                                          std::uint64_t seed = kSamplePanelSeed)
{
    const int n = static_cast<int>(fleet.entries.size());
    if (n != 10)
        throw ValidationError("the sample panel generator is defined for 10 vehicle classes");

    Rng rng(seed);
    AidsParameters truth = random_restricted_parameters(rng, n, 0.008, 0.0);
    Eigen::VectorXd target_shares(n);
    target_shares << 0.07, 0.08, 0.24, 0.06, 0.16, 0.09, 0.08, 0.05, 0.07, 0.10;
    truth.beta.resize(n);
    truth.beta << -0.02, 0.01, 0.05, -0.01, -0.02, 0.00, 0.01, -0.01, -0.02, 0.01;

    Eigen::VectorXd price_level(n);
    for (int j = 0; j < n; ++j) price_level(j) = rng.uniform(1.3, 2.1);
    const double log_x_level = std::log(2.0e9);
    truth = calibrate_alpha(truth, target_shares, price_level, log_x_level);

    SamplePanel out;
    out.truth = truth;
    for (const auto& e : fleet.entries) out.panel.classes.push_back(e.vehicle.id);

    for (int prov = 1; prov <= 31; ++prov) {
        char prov_name[8];
        std::snprintf(prov_name, sizeof(prov_name), "p%02d", prov);
        for (int year = 2002; year <= 2011; ++year) {
            Eigen::VectorXd lp(n), w;
            double lx = 0.0;
            for (int attempt = 0;; ++attempt) {
                if (attempt > 500) throw Error("sample panel generation failed");
                for (int j = 0; j < n; ++j)
                    lp(j) = price_level(j) + 0.15 * rng.normal();
                lx = log_x_level + 0.3 * rng.normal();
                w = implied_shares(truth, lp, lx);
                Eigen::VectorXd noise(n);
                for (int j = 0; j < n; ++j) noise(j) = 0.005 * rng.normal();
                noise.array() -= noise.mean();
                w += noise;
                if (w.minCoeff() > 5e-3 && w.maxCoeff() < 0.995) break;
            }
            const double x = std::exp(lx);
            for (int j = 0; j < n; ++j) {
                const FleetEntry& fe = fleet.entries[j];
                PanelObservation r;
                r.province = prov_name;
                r.year = year;
                r.vehicle_class = fe.vehicle.id;
                r.price = std::exp(lp(j));
                r.vmt = fe.baseline_vmt_km * rng.uniform(0.9, 1.1);
                const double expenditure = w(j) * x;
                const double liters = expenditure / r.price;
                const double km = liters * 100.0 / fe.fuel_economy_l_per_100km;
                r.vehicle_population = km / r.vmt;
                out.panel.rows.push_back(std::move(r));
            }
        }
    }
    return out;
}

inline FuelPanel generate_sample_panel(const FleetParams& fleet,
                                       std::uint64_t seed = kSamplePanelSeed)
{
    return generate_sample_system(fleet, seed).panel;
}

} // namespace fuelshock::synthetic
