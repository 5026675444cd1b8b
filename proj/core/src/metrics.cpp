#include "hyperaod/metrics.hpp"

#include <cmath>
#include <limits>
#include <sstream>

#include "hyperaod/common.hpp"

namespace hyperaod {

void MetricsAccumulator::add(const AODField& pred, const AODField& obs) {
    if (!pred.values.same_shape(obs.values))
        throw DataError("metrics: prediction/observation shape mismatch");
    for (std::size_t i = 0; i < pred.values.size(); ++i)
        if (pred.valid[i] && obs.valid[i])
            add_pair(pred.values[i], obs.values[i]);
}

void MetricsAccumulator::add(std::span<const float> pred, std::span<const float> obs,
                             std::span<const std::uint8_t> mask) {
    if (pred.size() != obs.size() || pred.size() != mask.size())
        throw DataError("metrics: span length mismatch");
    for (std::size_t i = 0; i < pred.size(); ++i)
        if (mask[i]) add_pair(pred[i], obs[i]);
}

void MetricsAccumulator::add_pair(double pred, double obs) {
    pred_.push_back(pred);
    obs_.push_back(obs);
}

MetricsReport MetricsAccumulator::compute(const std::string& model_name) const {
    const std::size_t n = pred_.size();
    if (n == 0) throw DataError("metrics: no valid pixels to compare");

    double sum_sq = 0.0, sum_diff = 0.0, sum_obs = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double d = pred_[i] - obs_[i];
        sum_sq += d * d;
        sum_diff += d;
        sum_obs += obs_[i];
    }
    const double obs_mean = sum_obs / static_cast<double>(n);

    double denom = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double a = std::abs(pred_[i] - obs_mean) + std::abs(obs_[i] - obs_mean);
        denom += a * a;
    }

    MetricsReport r;
    r.model_name = model_name;
    r.n_valid = n;
    r.mse = sum_sq / static_cast<double>(n);
    r.rmse = std::sqrt(r.mse);
    r.mbe = sum_diff / static_cast<double>(n);
    if (denom == 0.0) {
        // both fields constant and equal to their mean
        r.ioa = (sum_sq == 0.0) ? 1.0 : 0.0;
    } else {
        r.ioa = 1.0 - sum_sq / denom;
    }
    return r;
}

MetricsReport compute_metrics(const AODField& pred, const AODField& obs,
                              const std::string& model_name) {
    MetricsAccumulator acc;
    acc.add(pred, obs);
    return acc.compute(model_name);
}

namespace {

nlohmann::json report_to_json(const MetricsReport& r) {
    return {{"model", r.model_name}, {"mse", r.mse},   {"rmse", r.rmse},
            {"mbe", r.mbe},          {"ioa", r.ioa},   {"n_valid", r.n_valid}};
}

std::string fmt(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.6g", v);
    return buf;
}

}  // namespace

TableExport export_table(const std::vector<MetricsReport>& reports) {
    if (reports.empty()) throw DataError("export_table: no reports");

    std::size_t best_mse = 0, best_rmse = 0, best_mbe = 0, best_ioa = 0;
    for (std::size_t i = 1; i < reports.size(); ++i) {
        if (reports[i].mse < reports[best_mse].mse) best_mse = i;
        if (reports[i].rmse < reports[best_rmse].rmse) best_rmse = i;
        if (std::abs(reports[i].mbe) < std::abs(reports[best_mbe].mbe)) best_mbe = i;
        if (reports[i].ioa > reports[best_ioa].ioa) best_ioa = i;
    }

    std::ostringstream md;
    md << "| Model | MSE (↓) | RMSE (↓) | MBE (↓) | IOA (↑) | N |\n";
    md << "|---|---|---|---|---|---|\n";
    auto cell = [&](double v, bool best) {
        return best ? "**" + fmt(v) + "**" : fmt(v);
    };
    for (std::size_t i = 0; i < reports.size(); ++i) {
        const auto& r = reports[i];
        md << "| " << r.model_name << " | " << cell(r.mse, i == best_mse) << " | "
           << cell(r.rmse, i == best_rmse) << " | " << cell(r.mbe, i == best_mbe) << " | "
           << cell(r.ioa, i == best_ioa) << " | " << r.n_valid << " |\n";
    }

    nlohmann::json j;
    j["rows"] = nlohmann::json::array();
    for (const auto& r : reports) j["rows"].push_back(report_to_json(r));
    j["best"] = {{"mse", reports[best_mse].model_name},
                 {"rmse", reports[best_rmse].model_name},
                 {"mbe", reports[best_mbe].model_name},
                 {"ioa", reports[best_ioa].model_name}};

    return TableExport{md.str(), std::move(j)};
}

std::vector<MetricsReport> reports_from_json(const nlohmann::json& j) {
    std::vector<MetricsReport> out;
    for (const auto& row : j.at("rows")) {
        MetricsReport r;
        r.model_name = row.at("model").get<std::string>();
        r.mse = row.at("mse").get<double>();
        r.rmse = row.at("rmse").get<double>();
        r.mbe = row.at("mbe").get<double>();
        r.ioa = row.at("ioa").get<double>();
        r.n_valid = row.at("n_valid").get<std::size_t>();
        out.push_back(std::move(r));
    }
    return out;
}

ScatterData scatter_bin(const std::vector<double>& pred, const std::vector<double>& obs,
                        std::size_t bins, double lo, double hi) {
    if (pred.size() != obs.size()) throw DataError("scatter_bin: length mismatch");
    if (pred.empty()) throw DataError("scatter_bin: no valid pixels after masking");
    if (bins == 0 || !(hi > lo)) throw ConfigError("scatter_bin: bad bin range");

    ScatterData s;
    s.bins = bins;
    s.lo = lo;
    s.hi = hi;
    s.counts = Array<std::uint32_t>({bins, bins});
    const double scale = static_cast<double>(bins) / (hi - lo);
    auto bin_of = [&](double v) -> long {
        if (v < lo || v > hi) return -1;
        long b = static_cast<long>((v - lo) * scale);
        if (b == static_cast<long>(bins)) b = static_cast<long>(bins) - 1;  // v == hi
        return b;
    };
    for (std::size_t i = 0; i < pred.size(); ++i) {
        const long bp = bin_of(pred[i]);
        const long bo = bin_of(obs[i]);
        if (bp < 0 || bo < 0) continue;
        ++s.counts.at(static_cast<std::size_t>(bo), static_cast<std::size_t>(bp));
        ++s.n_in_range;
    }
    return s;
}

std::string scatter_csv(const ScatterData& s) {
    std::ostringstream os;
    os << "obs_bin_center,pred_bin_center,count\n";
    const double w = (s.hi - s.lo) / static_cast<double>(s.bins);
    for (std::size_t i = 0; i < s.bins; ++i)
        for (std::size_t j = 0; j < s.bins; ++j) {
            const std::uint32_t c = s.counts.at(i, j);
            if (c == 0) continue;
            os << fmt(s.lo + (static_cast<double>(i) + 0.5) * w) << ","
               << fmt(s.lo + (static_cast<double>(j) + 0.5) * w) << "," << c << "\n";
        }
    return os.str();
}

}  // namespace hyperaod
