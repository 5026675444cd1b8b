#include "hyperaod/aeronet.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>

#include "hyperaod/common.hpp"

namespace hyperaod {

double angstrom_adjust(double tau0, double alpha, double lambda0_nm, double lambda1_nm) {
    if (!(lambda0_nm > 0.0) || !(lambda1_nm > 0.0))
        throw DataError("angstrom_adjust: wavelengths must be positive");
    return tau0 * std::pow(lambda1_nm / lambda0_nm, -alpha);
}

std::vector<SiteRecord> temporal_match(std::int64_t overpass_time,
                                       const std::vector<SiteRecord>& records,
                                       int window_minutes) {
    const std::int64_t window = static_cast<std::int64_t>(window_minutes) * 60;
    std::map<std::string, SiteRecord> best;
    for (const auto& r : records) {
        const std::int64_t dt = std::llabs(r.time - overpass_time);
        if (dt > window) continue;
        auto it = best.find(r.site);
        if (it == best.end()) {
            best.emplace(r.site, r);
            continue;
        }
        const std::int64_t cur = std::llabs(it->second.time - overpass_time);
        if (dt < cur || (dt == cur && r.time < it->second.time)) it->second = r;
    }
    std::vector<SiteRecord> out;
    out.reserve(best.size());
    for (auto& [_, r] : best) out.push_back(std::move(r));
    return out;
}

namespace {

double haversine_km(double lat1, double lon1, double lat2, double lon2) {
    constexpr double kDegToRad = M_PI / 180.0;
    constexpr double kEarthRadiusKm = 6371.0;
    const double dlat = (lat2 - lat1) * kDegToRad;
    const double dlon = (lon2 - lon1) * kDegToRad;
    const double a = std::sin(dlat / 2) * std::sin(dlat / 2) +
                     std::cos(lat1 * kDegToRad) * std::cos(lat2 * kDegToRad) *
                         std::sin(dlon / 2) * std::sin(dlon / 2);
    return 2.0 * kEarthRadiusKm * std::asin(std::min(1.0, std::sqrt(a)));
}

}  // namespace

double collocate_site(const ArrayD& prediction, const MaskGrid& valid, const ArrayF& lat,
                      const ArrayF& lon, double site_lat, double site_lon, std::size_t block) {
    const std::size_t h = prediction.dim(0), w = prediction.dim(1);
    if (valid.dim(0) != h || valid.dim(1) != w || lat.dim(0) != h || lon.dim(0) != h)
        throw DataError("collocate_site: grid shape mismatch");

    float lat_min = lat[0], lat_max = lat[0], lon_min = lon[0], lon_max = lon[0];
    for (std::size_t p = 0; p < lat.size(); ++p) {
        lat_min = std::min(lat_min, lat[p]);
        lat_max = std::max(lat_max, lat[p]);
        lon_min = std::min(lon_min, lon[p]);
        lon_max = std::max(lon_max, lon[p]);
    }
    if (site_lat < lat_min || site_lat > lat_max || site_lon < lon_min || site_lon > lon_max)
        throw DataError("collocate_site: site outside scene bounding box");

    std::size_t br = 0, bc = 0;
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < h; ++i)
        for (std::size_t j = 0; j < w; ++j) {
            const double d = haversine_km(site_lat, site_lon, lat.at(i, j), lon.at(i, j));
            if (d < best) {
                best = d;
                br = i;
                bc = j;
            }
        }

    // even-sized block anchored as [r-4, r+4), clipped at the borders
    const long half = static_cast<long>(block) / 2;
    const long r0 = std::max(0L, static_cast<long>(br) - half);
    const long r1 = std::min(static_cast<long>(h), static_cast<long>(br) + half);
    const long c0 = std::max(0L, static_cast<long>(bc) - half);
    const long c1 = std::min(static_cast<long>(w), static_cast<long>(bc) + half);

    double sum = 0.0;
    std::size_t n = 0;
    for (long i = r0; i < r1; ++i)
        for (long j = c0; j < c1; ++j) {
            const auto ii = static_cast<std::size_t>(i), jj = static_cast<std::size_t>(j);
            if (!valid.at(ii, jj)) continue;
            sum += prediction.at(ii, jj);
            ++n;
        }
    if (n == 0) throw DataError("collocate_site: no valid pixels in the collocation block");
    return sum / static_cast<double>(n);
}

ValidationResult validate_against_sites(
    const std::vector<std::pair<const GranuleScene*, const SceneRetrieval*>>& predictions,
    const std::vector<SiteRecord>& records, int window_minutes) {
    if (predictions.empty()) throw DataError("validate_against_sites: no scenes");

    ValidationResult result;
    MetricsAccumulator acc;
    for (const auto& [scene, retrieval] : predictions) {
        const auto matched = temporal_match(scene->acquisition_time, records, window_minutes);
        for (const auto& rec : matched) {
            double pred;
            try {
                pred = collocate_site(retrieval->aod, retrieval->valid, scene->lat, scene->lon,
                                      rec.lat, rec.lon);
            } catch (const DataError&) {
                ++result.skipped;
                continue;
            }
            ValidationRow row;
            row.site = rec.site;
            row.time = rec.time;
            row.lat = rec.lat;
            row.lon = rec.lon;
            row.tau_ground_550 = angstrom_adjust(rec.aod_500, rec.angstrom, 500.0, 550.0);
            row.tau_pred = pred;
            row.diff = pred - row.tau_ground_550;
            row.granule_id = scene->granule_id;
            acc.add_pair(row.tau_pred, row.tau_ground_550);
            result.rows.push_back(std::move(row));
        }
    }
    if (acc.count() > 0) result.report = acc.compute("aeronet");
    return result;
}

std::vector<SiteRecord> read_site_records(const std::string& csv_path) {
    std::ifstream is(csv_path);
    if (!is) throw DataError("read_site_records: cannot open '" + csv_path + "'");
    std::string line;
    if (!std::getline(is, line)) throw DataError("read_site_records: empty file");

    // header must name the SiteRecord columns, any order
    std::vector<std::string> cols;
    {
        std::stringstream ss(line);
        std::string cell;
        while (std::getline(ss, cell, ',')) cols.push_back(cell);
    }
    auto col_of = [&](const std::string& name) {
        for (std::size_t i = 0; i < cols.size(); ++i)
            if (cols[i] == name) return i;
        throw DataError("read_site_records: missing column '" + name + "'");
    };
    const std::size_t c_site = col_of("site"), c_lat = col_of("lat"), c_lon = col_of("lon");
    const std::size_t c_time = col_of("time"), c_aod = col_of("aod_500"),
                      c_ang = col_of("angstrom");

    std::vector<SiteRecord> out;
    std::size_t lineno = 1;
    while (std::getline(is, line)) {
        ++lineno;
        if (line.empty()) continue;
        std::vector<std::string> cells;
        std::stringstream ss(line);
        std::string cell;
        while (std::getline(ss, cell, ',')) cells.push_back(cell);
        if (cells.size() < cols.size())
            throw DataError("read_site_records: line " + std::to_string(lineno) +
                            " has too few columns");
        SiteRecord r;
        try {
            r.site = cells[c_site];
            r.lat = std::stod(cells[c_lat]);
            r.lon = std::stod(cells[c_lon]);
            r.time = parse_utc(cells[c_time]);
            r.aod_500 = std::stod(cells[c_aod]);
            r.angstrom = std::stod(cells[c_ang]);
        } catch (const std::exception& e) {
            throw DataError("read_site_records: line " + std::to_string(lineno) + ": " +
                            e.what());
        }
        if (r.aod_500 < 0.0)
            throw DataError("read_site_records: negative AOD at line " + std::to_string(lineno));
        if (r.lat < -90.0 || r.lat > 90.0 || r.lon < -180.0 || r.lon > 180.0)
            throw DataError("read_site_records: lat/lon out of range at line " +
                            std::to_string(lineno));
        if (r.angstrom < -1.0 || r.angstrom > 4.0)
            std::cerr << "warning: site '" << r.site << "' has unusual Angstrom exponent "
                      << r.angstrom << "\n";
        out.push_back(std::move(r));
    }
    return out;
}

std::string validation_csv(const std::vector<ValidationRow>& rows) {
    std::ostringstream os;
    os << "site,time,lat,lon,tau_ground_550,tau_pred,diff,granule_id\n";
    os.precision(10);
    for (const auto& r : rows)
        os << r.site << "," << format_utc(r.time) << "," << r.lat << "," << r.lon << ","
           << r.tau_ground_550 << "," << r.tau_pred << "," << r.diff << "," << r.granule_id
           << "\n";
    return os.str();
}

}  // namespace hyperaod
