#pragma once

#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "hyperaod/array.hpp"
#include "hyperaod/types.hpp"

namespace hyperaod {

// Pools valid (prediction, observation) pairs across fields; metrics are
// computed over the pooled pixel set, not averaged per patch.
class MetricsAccumulator {
public:
    void add(const AODField& pred, const AODField& obs);
    void add(std::span<const float> pred, std::span<const float> obs,
             std::span<const std::uint8_t> mask);
    void add_pair(double pred, double obs);

    std::size_t count() const { return pred_.size(); }
    const std::vector<double>& predictions() const { return pred_; }
    const std::vector<double>& observations() const { return obs_; }

    MetricsReport compute(const std::string& model_name) const;  // DataError if empty

private:
    std::vector<double> pred_, obs_;
};

MetricsReport compute_metrics(const AODField& pred, const AODField& obs,
                              const std::string& model_name);

// Table 1 style export: one row per model, best value per column flagged
// (minimum for MSE/RMSE, minimum |MBE|, maximum IOA).
struct TableExport {
    std::string markdown;
    nlohmann::json json;
};
TableExport export_table(const std::vector<MetricsReport>& reports);
std::vector<MetricsReport> reports_from_json(const nlohmann::json& j);

// Density-binned scatter of prediction vs observation.
struct ScatterData {
    std::size_t bins = 100;
    double lo = 0.0, hi = 1.5;
    Array<std::uint32_t> counts;  // bins x bins, row = obs bin, col = pred bin
    std::size_t n_in_range = 0;
};
ScatterData scatter_bin(const std::vector<double>& pred, const std::vector<double>& obs,
                        std::size_t bins = 100, double lo = 0.0, double hi = 1.5);
std::string scatter_csv(const ScatterData& s);

}  // namespace hyperaod
