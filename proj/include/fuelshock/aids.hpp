#pragma once

#include "fuelshock/panel.hpp"
#include "fuelshock/types.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

namespace fuelshock {

// ---------------------------------------------------------------------------
// Parameters of the share system
// ---------------------------------------------------------------------------

/// Parameters of the budget-share system
///   w_i = alpha_i + sum_j gamma_ij ln p_j + beta_i ln(X/P)
/// with the translog deflator
///   ln P = alpha0 + sum_j alpha_j ln p_j + 1/2 sum_ij gamma_ij ln p_i ln p_j.
/// alpha0 is not separately identified and is fixed at 0 by convention.
struct AidsParameters {
    double alpha0 = 0.0;
    Eigen::VectorXd alpha; // N
    Eigen::VectorXd beta;  // N
    Eigen::MatrixXd gamma; // N x N

    int n() const { return static_cast<int>(alpha.size()); }

    /// Largest violation across adding-up, homogeneity and symmetry.
    double restriction_residual() const
    {
        const int N = n();
        double r = std::abs(alpha.sum() - 1.0);
        r = std::max(r, std::abs(beta.sum()));
        for (int i = 0; i < N; ++i) {
            r = std::max(r, std::abs(gamma.row(i).sum()));
            r = std::max(r, std::abs(gamma.col(i).sum()));
            for (int j = i + 1; j < N; ++j)
                r = std::max(r, std::abs(gamma(i, j) - gamma(j, i)));
        }
        return r;
    }

    void validate(double tol = 1e-8) const
    {
        const int N = n();
        if (N < 2 || beta.size() != N || gamma.rows() != N || gamma.cols() != N)
            throw ValidationError("AIDS parameters have inconsistent dimensions");
        if (restriction_residual() > tol)
            throw ValidationError("AIDS parameters violate restrictions beyond tolerance " +
                                  format_double(tol));
    }
};

/// ln P = alpha0 + sum_j alpha_j ln p_j + 1/2 sum_i sum_j gamma_ij ln p_i ln p_j
inline double translog_price_index(const Eigen::VectorXd& log_prices, const AidsParameters& p)
{
    if (log_prices.size() != p.n())
        throw ValidationError("translog_price_index: price vector length " +
                              std::to_string(log_prices.size()) + " does not match " +
                              std::to_string(p.n()) + " goods");
    return p.alpha0 + p.alpha.dot(log_prices) +
           0.5 * log_prices.dot(p.gamma * log_prices);
}

/// Share-weighted Stone index ln P* = sum_i w_i ln p_i.
inline double stone_price_index(const Eigen::VectorXd& shares, const Eigen::VectorXd& log_prices)
{
    return shares.dot(log_prices);
}

/// Shares implied by the parameters at a point (prices in logs, X in levels' log).
inline Eigen::VectorXd implied_shares(const AidsParameters& p, const Eigen::VectorXd& log_prices,
                                      double log_expenditure)
{
    const double ln_p = translog_price_index(log_prices, p);
    return p.alpha + p.gamma * log_prices +
           p.beta * (log_expenditure - ln_p);
}

// ---------------------------------------------------------------------------
// Free-parameter basis
// ---------------------------------------------------------------------------

/// Minimal coordinates of the restricted system with equation `dropped`
/// removed: theta = [ alpha_i | beta_i | gamma_ij (i <= j) ] over the kept
/// goods. Adding-up, homogeneity and symmetry recover everything else, so any
/// theta maps to an exactly-restricted parameter set.
class FreeParameterMap {
public:
    FreeParameterMap() = default;
    FreeParameterMap(int n_goods, int dropped) : n_(n_goods), dropped_(dropped)
    {
        if (n_goods < 2) throw ValidationError("need at least two goods");
        if (dropped < 0 || dropped >= n_goods)
            throw ValidationError("dropped equation index out of range");
        for (int i = 0; i < n_goods; ++i)
            if (i != dropped) kept_.push_back(i);
    }

    int n_goods() const { return n_; }
    int dropped() const { return dropped_; }
    int n_kept() const { return static_cast<int>(kept_.size()); }
    const std::vector<int>& kept() const { return kept_; }

    int size() const
    {
        const int m = n_kept();
        return 2 * m + m * (m + 1) / 2;
    }

    int alpha_index(int kept_pos) const { return kept_pos; }
    int beta_index(int kept_pos) const { return n_kept() + kept_pos; }
    int gamma_index(int kept_pos_a, int kept_pos_b) const
    {
        int a = std::min(kept_pos_a, kept_pos_b);
        int b = std::max(kept_pos_a, kept_pos_b);
        const int m = n_kept();
        // offset of row a in the packed upper triangle
        return 2 * m + a * m - a * (a - 1) / 2 + (b - a);
    }

    Eigen::VectorXd pack(const AidsParameters& p) const
    {
        Eigen::VectorXd theta(size());
        const int m = n_kept();
        for (int a = 0; a < m; ++a) {
            theta(alpha_index(a)) = p.alpha(kept_[a]);
            theta(beta_index(a)) = p.beta(kept_[a]);
            for (int b = a; b < m; ++b)
                theta(gamma_index(a, b)) = p.gamma(kept_[a], kept_[b]);
        }
        return theta;
    }

    AidsParameters unpack(const Eigen::VectorXd& theta) const
    {
        if (theta.size() != size())
            throw ValidationError("free parameter vector has wrong length");
        const int m = n_kept();
        AidsParameters p;
        p.alpha0 = 0.0;
        p.alpha = Eigen::VectorXd::Zero(n_);
        p.beta = Eigen::VectorXd::Zero(n_);
        p.gamma = Eigen::MatrixXd::Zero(n_, n_);
        for (int a = 0; a < m; ++a) {
            p.alpha(kept_[a]) = theta(alpha_index(a));
            p.beta(kept_[a]) = theta(beta_index(a));
            for (int b = a; b < m; ++b) {
                const double g = theta(gamma_index(a, b));
                p.gamma(kept_[a], kept_[b]) = g;
                p.gamma(kept_[b], kept_[a]) = g;
            }
        }
        p.alpha(dropped_) = 1.0 - p.alpha.sum();
        p.beta(dropped_) = -p.beta.sum();
        for (int a = 0; a < m; ++a) {
            const int i = kept_[a];
            const double row = p.gamma.row(i).sum();
            p.gamma(i, dropped_) = -row;
            p.gamma(dropped_, i) = -row;
        }
        p.gamma(dropped_, dropped_) = -p.gamma.col(dropped_).sum();
        return p;
    }

    std::vector<std::string> names(const std::vector<std::string>& goods) const
    {
        std::vector<std::string> out(size());
        const int m = n_kept();
        for (int a = 0; a < m; ++a) {
            out[alpha_index(a)] = "alpha[" + goods[kept_[a]] + "]";
            out[beta_index(a)] = "beta[" + goods[kept_[a]] + "]";
            for (int b = a; b < m; ++b)
                out[gamma_index(a, b)] =
                    "gamma[" + goods[kept_[a]] + "," + goods[kept_[b]] + "]";
        }
        return out;
    }

private:
    int n_ = 0;
    int dropped_ = 0;
    std::vector<int> kept_;
};

// ---------------------------------------------------------------------------
// Fitting
// ---------------------------------------------------------------------------

enum class PriceIndex { Translog, Stone };

inline const char* to_string(PriceIndex x)
{
    return x == PriceIndex::Translog ? "translog" : "stone";
}

struct AidsOptions {
    PriceIndex index = PriceIndex::Translog;
    double tol = 1e-8;
    int max_iter = 500;
    int dropped_equation = -1; // -1: last good in system order
    bool group_prices = false; // pool goods with identical price series
    // Warm start for repeated fits on resampled data (bootstrap); must match
    // the free-parameter layout implied by dropped_equation.
    std::optional<Eigen::VectorXd> initial_free_params;
};

struct AidsFit {
    AidsParameters params;
    FreeParameterMap map;
    Eigen::VectorXd free_params;      // theta at convergence
    Eigen::MatrixXd covariance;       // K x K, heteroskedasticity-robust
    Eigen::MatrixXd residual_covariance; // (N-1) x (N-1) over kept equations
    Eigen::MatrixXd residuals;        // T x N, dropped equation closed by adding-up
    int iterations = 0;
    double final_change = 0.0;
    bool converged = false;
    PriceIndex index = PriceIndex::Translog;
    std::vector<std::string> goods;
    std::string dropped_good;

    // Default evaluation point for elasticities: sample means.
    Eigen::VectorXd mean_shares;
    Eigen::VectorXd mean_log_prices;
    double mean_log_expenditure = 0.0;

    AidsParameters params_from_free(const Eigen::VectorXd& theta) const
    {
        return map.unpack(theta);
    }
};

namespace detail {

/// Pools goods whose log-price columns are identical into one pseudo-good;
/// shares add, the common price carries over.
inline DemandSystemData pool_identical_prices(const DemandSystemData& d)
{
    const int n = d.n_goods();
    const int t = d.n_groups();
    std::vector<int> rep(n, -1); // representative good per pooled group
    std::vector<std::vector<int>> members;
    for (int j = 0; j < n; ++j) {
        bool placed = false;
        for (std::size_t g = 0; g < members.size() && !placed; ++g) {
            const int r = members[g].front();
            if ((d.log_prices.col(j) - d.log_prices.col(r)).lpNorm<Eigen::Infinity>() < 1e-12) {
                members[g].push_back(j);
                placed = true;
            }
        }
        if (!placed) members.push_back({j});
    }
    const int g = static_cast<int>(members.size());
    if (g < 2)
        throw CollinearityError("all goods share a single price series; "
                                "the pooled system has fewer than two goods");
    DemandSystemData out;
    out.group_labels = d.group_labels;
    out.shares.resize(t, g);
    out.log_prices.resize(t, g);
    out.log_expenditure = d.log_expenditure;
    for (int k = 0; k < g; ++k) {
        std::string label;
        Eigen::VectorXd s = Eigen::VectorXd::Zero(t);
        for (int j : members[k]) {
            label += (label.empty() ? "" : "+") + d.goods[j];
            s += d.shares.col(j);
        }
        out.goods.push_back(label);
        out.shares.col(k) = s;
        out.log_prices.col(k) = d.log_prices.col(members[k].front());
    }
    return out;
}

inline void check_price_identification(const DemandSystemData& d)
{
    const int n = d.n_goods();
    const int t = d.n_groups();
    for (int i = 0; i < n; ++i)
        for (int j = i + 1; j < n; ++j)
            if ((d.log_prices.col(i) - d.log_prices.col(j)).lpNorm<Eigen::Infinity>() < 1e-12)
                throw CollinearityError(
                    "goods '" + d.goods[i] + "' and '" + d.goods[j] +
                    "' share an identical price series for all observations; per-good "
                    "price parameters are not identified (use price grouping to pool them)");
    bool distinct = false;
    for (int r = 1; r < t && !distinct; ++r)
        distinct = (d.log_prices.row(r) - d.log_prices.row(0)).lpNorm<Eigen::Infinity>() > 1e-14;
    if (!distinct)
        throw EstimationError("all observations share one price vector; at least two "
                              "distinct price vectors are required");
}

} // namespace detail

/// Restricted iterated-FGLS estimator of the share system. Symmetry and
/// homogeneity are exact by reparameterization; the dropped equation is
/// recovered from adding-up. With the translog index the system is re-fit
/// with ln P recomputed from the current parameters until the coefficient
/// change falls below tol; at the fixed point the estimates do not depend on
/// which equation was dropped. The residual covariance uses the maximum-
/// likelihood form (divide by T) for the same reason.
inline AidsFit fit_aids(const DemandSystemData& data_in, const AidsOptions& options = {})
{
    const DemandSystemData data =
        options.group_prices ? detail::pool_identical_prices(data_in) : data_in;
    data.validate();
    detail::check_price_identification(data);

    const int n = data.n_goods();
    const int t = data.n_groups();
    const int m = n - 1;
    const int d = options.dropped_equation < 0 ? n - 1 : options.dropped_equation;
    if (d >= n)
        throw ValidationError("dropped equation index out of range");
    const FreeParameterMap map(n, d);
    const int k = map.size();
    if (m * t <= k)
        throw EstimationError("not enough observations (" + std::to_string(t) + " groups) for " +
                              std::to_string(k) + " free parameters");

    // Every equation sees the same per-observation regressor vector
    //   u_t = [1, ln(X_t/P_t), r_1(t), ..., r_m(t)],  r_j = ln p_j - ln p_d,
    // so the weighted normal equations assemble from Omega kron (U'U) through
    // the (equation, regressor) -> free-parameter index map instead of
    // per-observation k x k products. Symmetry ties are handled by the map
    // sending tied cells to one free index.
    const int q = m + 2;
    const auto fidx = [&](int eq, int reg) {
        if (reg == 0) return map.alpha_index(eq);
        if (reg == 1) return map.beta_index(eq);
        return map.gamma_index(eq, reg - 2);
    };

    Eigen::MatrixXd u(t, q); // u.col(1) is refreshed whenever ln P changes
    u.col(0).setOnes();
    for (int a = 0; a < m; ++a)
        u.col(2 + a) = data.log_prices.col(map.kept()[a]) - data.log_prices.col(d);

    Eigen::MatrixXd kept_shares(t, m);
    for (int a = 0; a < m; ++a)
        kept_shares.col(a) = data.shares.col(map.kept()[a]);

    Eigen::VectorXd stone(t);
    for (int r = 0; r < t; ++r)
        stone(r) = stone_price_index(data.shares.row(r).transpose(),
                                     data.log_prices.row(r).transpose());
    const auto refresh_lnxp = [&](const AidsParameters* p) {
        for (int r = 0; r < t; ++r) {
            const double ln_p = p ? translog_price_index(data.log_prices.row(r).transpose(), *p)
                                  : stone(r);
            u(r, 1) = data.log_expenditure(r) - ln_p;
        }
    };

    // Coefficient matrix view of theta: row e holds equation e's coefficients
    // on u. Tied gamma cells read the same free parameter.
    const auto coef_matrix = [&](const Eigen::VectorXd& th) {
        Eigen::MatrixXd c(m, q);
        for (int e = 0; e < m; ++e)
            for (int r = 0; r < q; ++r) c(e, r) = th(fidx(e, r));
        return c;
    };

    const auto assemble = [&](const Eigen::MatrixXd& omega, Eigen::MatrixXd& a,
                              Eigen::VectorXd& rhs) {
        const Eigen::MatrixXd g = u.transpose() * u;              // q x q
        const Eigen::MatrixXd h = omega * (kept_shares.transpose() * u); // m x q
        a.setZero(k, k);
        rhs.setZero(k);
        for (int e = 0; e < m; ++e)
            for (int r1 = 0; r1 < q; ++r1) {
                const int p1 = fidx(e, r1);
                rhs(p1) += h(e, r1);
                for (int f = 0; f < m; ++f) {
                    const double oef = omega(e, f);
                    if (oef == 0.0) continue;
                    for (int r2 = 0; r2 < q; ++r2)
                        a(p1, fidx(f, r2)) += oef * g(r1, r2);
                }
            }
    };

    // Structural rank check on the unweighted design.
    {
        refresh_lnxp(nullptr);
        Eigen::MatrixXd a0(k, k);
        Eigen::VectorXd rhs0(k);
        assemble(Eigen::MatrixXd::Identity(m, m), a0, rhs0);
        Eigen::FullPivLU<Eigen::MatrixXd> lu(a0);
        lu.setThreshold(1e-10);
        if (lu.rank() < k)
            throw CollinearityError(
                "regressor matrix is rank deficient (rank " + std::to_string(lu.rank()) + " of " +
                std::to_string(k) + "); check for collinear price series or constant regressors");
    }

    Eigen::VectorXd theta;
    if (options.initial_free_params) {
        if (options.initial_free_params->size() != k)
            throw ValidationError("initial free parameter vector has wrong length");
        theta = *options.initial_free_params;
    }

    Eigen::MatrixXd omega = Eigen::MatrixXd::Identity(m, m);
    AidsParameters current;
    bool converged = false;
    int iter = 0;
    double change = std::numeric_limits<double>::infinity();
    bool have_theta = options.initial_free_params.has_value();

    Eigen::MatrixXd a(k, k);
    Eigen::VectorXd rhs(k);
    for (iter = 0; iter < options.max_iter; ++iter) {
        if (have_theta) {
            current = map.unpack(theta);
            if (options.index == PriceIndex::Translog) refresh_lnxp(&current);
            // Residual covariance (maximum-likelihood form) at the current
            // coefficients; falls back to identity weights while residuals
            // are numerically zero.
            const Eigen::MatrixXd resid = kept_shares - u * coef_matrix(theta).transpose();
            Eigen::MatrixXd sigma = resid.transpose() * resid / double(t);
            const double tr = sigma.trace();
            if (tr > 1e-28) {
                sigma.diagonal().array() += 1e-12 * tr / m;
                Eigen::LDLT<Eigen::MatrixXd> ldlt(sigma);
                if (ldlt.info() == Eigen::Success)
                    omega = ldlt.solve(Eigen::MatrixXd::Identity(m, m));
            }
        }

        assemble(omega, a, rhs);
        Eigen::LDLT<Eigen::MatrixXd> solver(a);
        if (solver.info() != Eigen::Success)
            throw CollinearityError("weighted normal equations are not positive definite");
        const Eigen::VectorXd theta_new = solver.solve(rhs);

        change = have_theta ? (theta_new - theta).lpNorm<Eigen::Infinity>()
                            : std::numeric_limits<double>::infinity();
        theta = theta_new;
        have_theta = true;
        if (change < options.tol) {
            converged = true;
            ++iter;
            break;
        }
    }
    if (!converged)
        throw ConvergenceError("estimation did not converge after " +
                               std::to_string(options.max_iter) +
                               " iterations (last coefficient change " + format_double(change) +
                               ", tol " + format_double(options.tol) + ")");

    AidsFit fit;
    fit.map = map;
    fit.free_params = theta;
    fit.params = map.unpack(theta);
    fit.iterations = iter;
    fit.final_change = change;
    fit.converged = true;
    fit.index = options.index;
    fit.goods = data.goods;
    fit.dropped_good = data.goods[d];

    // Final residuals and the cluster-robust sandwich covariance.
    if (options.index == PriceIndex::Translog) refresh_lnxp(&fit.params);
    const Eigen::MatrixXd resid = kept_shares - u * coef_matrix(theta).transpose(); // t x m
    fit.residual_covariance = resid.transpose() * resid / double(t);
    fit.residuals.resize(t, n);
    for (int aidx = 0; aidx < m; ++aidx)
        fit.residuals.col(map.kept()[aidx]) = resid.col(aidx);
    fit.residuals.col(d) = -resid.rowwise().sum();

    assemble(omega, a, rhs);
    Eigen::MatrixXd b = Eigen::MatrixXd::Zero(k, k);
    {
        const Eigen::MatrixXd oe = resid * omega; // t x m, row r = (Omega e_r)'
        Eigen::VectorXd score(k);
        for (int r = 0; r < t; ++r) {
            score.setZero();
            for (int e = 0; e < m; ++e)
                for (int r1 = 0; r1 < q; ++r1) score(fidx(e, r1)) += oe(r, e) * u(r, r1);
            b.selfadjointView<Eigen::Lower>().rankUpdate(score);
        }
        b = b.selfadjointView<Eigen::Lower>().toDenseMatrix();
    }
    Eigen::LDLT<Eigen::MatrixXd> solver(a);
    Eigen::MatrixXd ainv_b = solver.solve(b);
    fit.covariance = solver.solve(ainv_b.transpose()).transpose();
    // Symmetrize away solver round-off.
    fit.covariance = 0.5 * (fit.covariance + fit.covariance.transpose()).eval();

    fit.mean_shares = data.shares.colwise().mean().transpose();
    fit.mean_log_prices = data.log_prices.colwise().mean().transpose();
    fit.mean_log_expenditure = data.log_expenditure.mean();
    return fit;
}

inline AidsFit fit_aids(const FuelPanel& panel, const AidsOptions& options = {})
{
    return fit_aids(system_data_from_panel(panel), options);
}

// ---------------------------------------------------------------------------
// Double-log robustness model
// ---------------------------------------------------------------------------

struct DoubleLogEquation {
    std::string vehicle_class;
    double intercept = 0.0;
    double own_price = 0.0;   // coefficient on ln p, a direct price elasticity
    double expenditure = 0.0; // coefficient on ln X
    double se_intercept = 0.0;
    double se_own_price = 0.0;
    double se_expenditure = 0.0;
    int nobs = 0;
};

struct DoubleLogFit {
    std::vector<DoubleLogEquation> equations;

    const DoubleLogEquation& at(const std::string& cls) const
    {
        for (const auto& e : equations)
            if (e.vehicle_class == cls) return e;
        throw ValidationError("no double-log equation for class '" + cls + "'");
    }
};

/// Per-class OLS of ln q on (1, ln p, ln X); the slope coefficients are the
/// own-price and expenditure elasticities of that class.
inline DoubleLogFit fit_double_log(const FuelPanel& panel)
{
    if (!panel.derived)
        throw ValidationError("panel has no derived quantities; call derive_activity first");

    // Group totals X, then one regression per class.
    std::map<std::string, double> group_x;
    for (const auto& [key, idx] : panel_groups(panel)) {
        double x = 0.0;
        for (std::size_t i : idx) x += panel.rows[i].expenditure;
        group_x[key] = x;
    }

    DoubleLogFit fit;
    for (const auto& cls : panel.classes) {
        std::vector<double> lq, lp, lx;
        for (const auto& r : panel.rows) {
            if (r.vehicle_class != cls) continue;
            if (!(r.quantity > 0.0) || !(r.price > 0.0))
                throw ValidationError("class '" + cls + "': non-positive quantity or price");
            lq.push_back(std::log(r.quantity));
            lp.push_back(std::log(r.price));
            lx.push_back(std::log(group_x.at(detail::group_key(r.province, r.year))));
        }
        const int nobs = static_cast<int>(lq.size());
        if (nobs < 3)
            throw EstimationError("class '" + cls + "': " + std::to_string(nobs) +
                                  " observations; at least 3 required");
        const auto variance = [](const std::vector<double>& v) {
            double mean = 0.0;
            for (double x : v) mean += x;
            mean /= double(v.size());
            double s = 0.0;
            for (double x : v) s += (x - mean) * (x - mean);
            return s / double(v.size());
        };
        if (variance(lp) < 1e-14)
            throw EstimationError("class '" + cls + "': price has zero variance");
        if (variance(lx) < 1e-14)
            throw EstimationError("class '" + cls + "': expenditure has zero variance");

        Eigen::MatrixXd x(nobs, 3);
        Eigen::VectorXd y(nobs);
        for (int i = 0; i < nobs; ++i) {
            x(i, 0) = 1.0;
            x(i, 1) = lp[i];
            x(i, 2) = lx[i];
            y(i) = lq[i];
        }
        Eigen::MatrixXd xtx = x.transpose() * x;
        Eigen::LDLT<Eigen::MatrixXd> solver(xtx);
        Eigen::VectorXd coef = solver.solve(x.transpose() * y);
        const double rss = (y - x * coef).squaredNorm();
        const double s2 = nobs > 3 ? rss / double(nobs - 3) : 0.0;
        Eigen::MatrixXd cov = s2 * solver.solve(Eigen::MatrixXd::Identity(3, 3));

        DoubleLogEquation eq;
        eq.vehicle_class = cls;
        eq.intercept = coef(0);
        eq.own_price = coef(1);
        eq.expenditure = coef(2);
        eq.se_intercept = std::sqrt(std::max(0.0, cov(0, 0)));
        eq.se_own_price = std::sqrt(std::max(0.0, cov(1, 1)));
        eq.se_expenditure = std::sqrt(std::max(0.0, cov(2, 2)));
        eq.nobs = nobs;
        fit.equations.push_back(eq);
    }
    return fit;
}

} // namespace fuelshock
