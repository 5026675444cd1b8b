#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "hyperaod/array.hpp"
#include "hyperaod/inference.hpp"
#include "hyperaod/metrics.hpp"
#include "hyperaod/types.hpp"

namespace hyperaod {

// tau(lambda1) = tau(lambda0) * (lambda1/lambda0)^(-alpha)
double angstrom_adjust(double tau0, double alpha, double lambda0_nm, double lambda1_nm);

// All records within +/- window minutes of the overpass (bound inclusive);
// when several match one site, the temporally closest wins (ties go to the
// earlier record).
std::vector<SiteRecord> temporal_match(std::int64_t overpass_time,
                                       const std::vector<SiteRecord>& records,
                                       int window_minutes = 30);

// Mean prediction over the 8x8 pixel block [r-4, r+4) x [c-4, c+4) anchored
// at the scene pixel nearest the site (great-circle), valid pixels only,
// clipped at scene borders.
double collocate_site(const ArrayD& prediction, const MaskGrid& valid, const ArrayF& lat,
                      const ArrayF& lon, double site_lat, double site_lon,
                      std::size_t block = 8);

struct ValidationRow {
    std::string site;
    std::int64_t time = 0;  // ground record time
    double lat = 0.0, lon = 0.0;
    double tau_ground_550 = 0.0;
    double tau_pred = 0.0;
    double diff = 0.0;  // pred - ground
    std::string granule_id;
};

struct ValidationResult {
    std::vector<ValidationRow> rows;
    std::optional<MetricsReport> report;  // absent when no collocations survive
    std::size_t skipped = 0;              // matches dropped (outside scene / no valid block)
};

ValidationResult validate_against_sites(
    const std::vector<std::pair<const GranuleScene*, const SceneRetrieval*>>& predictions,
    const std::vector<SiteRecord>& records, int window_minutes = 30);

std::vector<SiteRecord> read_site_records(const std::string& csv_path);
std::string validation_csv(const std::vector<ValidationRow>& rows);

}  // namespace hyperaod
