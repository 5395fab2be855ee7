#pragma once

#include "fuelshock/csv.hpp"
#include "fuelshock/io_util.hpp"
#include "fuelshock/types.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <limits>
#include <map>
#include <set>
#include <string>
#include <vector>

namespace fuelshock {

/// One (province, year, vehicle class) record. Quantity, expenditure and
/// budget share are derived, not read from file.
struct PanelObservation {
    std::string province;
    int year = 0;
    std::string vehicle_class;
    double price = 0.0;              // currency per liter
    double vehicle_population = 0.0; // vehicles (annual average stock; may be fractional)
    double vmt = 0.0;                // km/year per vehicle

    double quantity = std::numeric_limits<double>::quiet_NaN();    // liters/year
    double expenditure = std::numeric_limits<double>::quiet_NaN(); // currency/year
    double share = std::numeric_limits<double>::quiet_NaN();       // w_i in [0,1]
};

inline const std::vector<std::string>& panel_columns()
{
    static const std::vector<std::string> cols = {"province", "year",
                                                  "class",    "price",
                                                  "vehicle_population", "vmt"};
    return cols;
}

struct FuelPanel {
    std::vector<PanelObservation> rows;
    // Vehicle classes in order of first appearance; this is the canonical
    // good order used by the estimator (the dropped equation defaults to the
    // last entry).
    std::vector<std::string> classes;
    bool derived = false;

    std::size_t size() const { return rows.size(); }

    int class_index(const std::string& id) const
    {
        for (std::size_t i = 0; i < classes.size(); ++i)
            if (classes[i] == id) return static_cast<int>(i);
        return -1;
    }
};

namespace detail {

inline std::string group_key(const std::string& province, int year)
{
    return province + "" + std::to_string(year);
}

} // namespace detail

/// Group rows by (province, year); every group must contain each vehicle
/// class exactly once so that budget shares form a complete demand system.
inline std::map<std::string, std::vector<std::size_t>> panel_groups(const FuelPanel& panel)
{
    std::map<std::string, std::vector<std::size_t>> groups;
    for (std::size_t i = 0; i < panel.rows.size(); ++i)
        groups[detail::group_key(panel.rows[i].province, panel.rows[i].year)].push_back(i);
    return groups;
}

inline void validate_panel(const FuelPanel& panel)
{
    std::set<std::string> seen;
    for (std::size_t i = 0; i < panel.rows.size(); ++i) {
        const auto& r = panel.rows[i];
        const std::string where = "row " + std::to_string(i + 1) + " (" + r.province + ", " +
                                  std::to_string(r.year) + ", " + r.vehicle_class + ")";
        if (r.province.empty()) throw ValidationError(where + ": empty province");
        if (r.vehicle_class.empty()) throw ValidationError(where + ": empty vehicle class");
        if (!(r.price > 0.0)) throw ValidationError(where + ": non-positive price");
        if (!(r.vehicle_population > 0.0)) throw ValidationError(where + ": non-positive vehicle population");
        if (!(r.vmt > 0.0)) throw ValidationError(where + ": non-positive vmt");
        std::string key = detail::group_key(r.province, r.year) + "" + r.vehicle_class;
        if (!seen.insert(key).second)
            throw ValidationError(where + ": duplicate (province, year, class) key");
    }
    for (const auto& [key, idx] : panel_groups(panel)) {
        if (idx.size() != panel.classes.size())
            throw ValidationError("group (" + panel.rows[idx.front()].province + ", " +
                                  std::to_string(panel.rows[idx.front()].year) + ") has " +
                                  std::to_string(idx.size()) + " classes, expected " +
                                  std::to_string(panel.classes.size()));
    }
}

/// Load a panel from the documented comma-delimited schema
/// (province,year,class,price,vehicle_population,vmt). The first schema or
/// invariant violation is reported with its row and column.
inline FuelPanel load_panel(const std::filesystem::path& path)
{
    const std::string ctx = "panel file " + path.string();
    if (!std::filesystem::exists(path))
        throw ValidationError(ctx + ": file does not exist");
    csv::Table t = csv::parse(read_file(path), ctx);

    const int c_prov = t.require_column("province", ctx);
    const int c_year = t.require_column("year", ctx);
    const int c_class = t.require_column("class", ctx);
    const int c_price = t.require_column("price", ctx);
    const int c_pop = t.require_column("vehicle_population", ctx);
    const int c_vmt = t.require_column("vmt", ctx);

    FuelPanel panel;
    panel.rows.reserve(t.rows.size());
    for (std::size_t i = 0; i < t.rows.size(); ++i) {
        const auto& f = t.rows[i];
        const std::string where = ctx + ", data row " + std::to_string(i + 1);
        PanelObservation r;
        r.province = f[c_prov];
        r.year = static_cast<int>(csv::to_long(f[c_year], where + ", column 'year'"));
        r.vehicle_class = f[c_class];
        r.price = csv::to_double(f[c_price], where + ", column 'price'");
        r.vehicle_population = csv::to_double(f[c_pop], where + ", column 'vehicle_population'");
        r.vmt = csv::to_double(f[c_vmt], where + ", column 'vmt'");
        if (!(r.price > 0.0))
            throw ValidationError(where + ": non-positive price " + format_double(r.price));
        if (panel.class_index(r.vehicle_class) < 0)
            panel.classes.push_back(r.vehicle_class);
        panel.rows.push_back(std::move(r));
    }
    validate_panel(panel);
    return panel;
}

inline std::string panel_to_csv(const FuelPanel& panel)
{
    std::string out = "province,year,class,price,vehicle_population,vmt\n";
    for (const auto& r : panel.rows) {
        out += r.province;
        out += ',' + std::to_string(r.year);
        out += ',' + r.vehicle_class;
        out += ',' + format_double(r.price);
        out += ',' + format_double(r.vehicle_population);
        out += ',' + format_double(r.vmt);
        out += '\n';
    }
    return out;
}

inline void write_panel(const FuelPanel& panel, const std::filesystem::path& path)
{
    atomic_write_file(path, panel_to_csv(panel));
}

/// Fill in fuel quantities, expenditures and budget shares:
///   quantity_i = population_i * vmt_i * fuel_economy_i / 100   (liters/year)
///   expenditure_i = price_i * quantity_i,   X = sum_i expenditure_i
///   w_i = expenditure_i / X
/// Shares sum to one within each (province, year) group by construction.
inline FuelPanel derive_activity(FuelPanel panel, const FleetParams& fleet)
{
    for (const auto& cls : panel.classes)
        fleet.at(cls); // throws if any class lacks fleet parameters

    for (auto& r : panel.rows) {
        const FleetEntry& e = fleet.at(r.vehicle_class);
        r.quantity = r.vehicle_population * r.vmt * e.fuel_economy_l_per_100km / 100.0;
        r.expenditure = r.price * r.quantity;
    }
    for (const auto& [key, idx] : panel_groups(panel)) {
        double total = 0.0;
        for (std::size_t i : idx) total += panel.rows[i].expenditure;
        if (!(total > 0.0))
            throw ValidationError("group with non-positive total expenditure: " +
                                  panel.rows[idx.front()].province + ", " +
                                  std::to_string(panel.rows[idx.front()].year));
        for (std::size_t i : idx) panel.rows[i].share = panel.rows[i].expenditure / total;
    }
    panel.derived = true;
    return panel;
}

// ---------------------------------------------------------------------------
// Matrix view consumed by the estimators
// ---------------------------------------------------------------------------

/// Shares, log prices and log group expenditure arranged as T x N matrices,
/// one row per (province, year) group in deterministic (sorted-key) order.
struct DemandSystemData {
    std::vector<std::string> goods;        // N class ids, panel order
    std::vector<std::string> group_labels; // "province:year"
    Eigen::MatrixXd shares;                // T x N
    Eigen::MatrixXd log_prices;            // T x N
    Eigen::VectorXd log_expenditure;       // T

    int n_goods() const { return static_cast<int>(goods.size()); }
    int n_groups() const { return static_cast<int>(shares.rows()); }

    void validate() const
    {
        const int n = n_goods();
        const int t = n_groups();
        if (n < 2) throw ValidationError("demand system needs at least two goods");
        if (t < 2) throw ValidationError("demand system needs at least two observations");
        if (log_prices.rows() != t || log_prices.cols() != n || log_expenditure.size() != t)
            throw ValidationError("demand system matrices have inconsistent shapes");
        for (int r = 0; r < t; ++r) {
            if (std::abs(shares.row(r).sum() - 1.0) > 1e-8)
                throw ValidationError("shares of group '" + group_labels[r] + "' do not sum to 1");
            for (int c = 0; c < n; ++c)
                if (!std::isfinite(shares(r, c)) || !std::isfinite(log_prices(r, c)))
                    throw ValidationError("non-finite value in group '" + group_labels[r] + "'");
        }
    }
};

inline DemandSystemData system_data_from_panel(const FuelPanel& panel)
{
    if (!panel.derived)
        throw ValidationError("panel has no derived shares; call derive_activity first");
    const int n = static_cast<int>(panel.classes.size());
    auto groups = panel_groups(panel);
    const int t = static_cast<int>(groups.size());

    DemandSystemData d;
    d.goods = panel.classes;
    d.shares.resize(t, n);
    d.log_prices.resize(t, n);
    d.log_expenditure.resize(t);

    int row = 0;
    for (const auto& [key, idx] : groups) {
        double total = 0.0;
        d.group_labels.push_back(panel.rows[idx.front()].province + ":" +
                                 std::to_string(panel.rows[idx.front()].year));
        for (std::size_t i : idx) {
            const auto& r = panel.rows[i];
            const int c = panel.class_index(r.vehicle_class);
            d.shares(row, c) = r.share;
            d.log_prices(row, c) = std::log(r.price);
            total += r.expenditure;
        }
        d.log_expenditure(row) = std::log(total);
        ++row;
    }
    d.validate();
    return d;
}

} // namespace fuelshock
