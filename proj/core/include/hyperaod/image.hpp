#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "hyperaod/array.hpp"
#include "hyperaod/metrics.hpp"

namespace hyperaod {

void write_png_rgb(const std::string& path, std::size_t width, std::size_t height,
                   const std::vector<std::uint8_t>& rgb);

// Fixed color ramp for AOD quick-looks, t in [0, 1].
std::array<std::uint8_t, 3> aod_color(double t);

// Renders an AOD map over [lo, hi]; invalid pixels dark gray.
void write_aod_quicklook(const std::string& path, const ArrayD& values, const MaskGrid& valid,
                         double lo = 0.0, double hi = 1.5);

// Density scatter heat map with the identity line overlaid.
void write_scatter_png(const std::string& path, const ScatterData& scatter);

// Equirectangular world scatter of point values colored over [lo, hi].
void write_points_map_png(const std::string& path, const std::vector<double>& lats,
                          const std::vector<double>& lons, const std::vector<double>& values,
                          double lo = 0.0, double hi = 1.5);

}  // namespace hyperaod
