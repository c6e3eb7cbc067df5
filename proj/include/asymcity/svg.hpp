#pragma once

#include <string>
#include <vector>

#include "asymcity/asymmetry.hpp"
#include "asymcity/perception.hpp"

namespace asymcity::svg {

/// K x K heatmap, one <rect class="cell"> per entry.
std::string distance_heatmap(const SquareMatrix& matrix);

/// One <rect class="cell"> per exposure-map cell; cells inside buildings
/// are drawn grey.
std::string exposure_heatmap(const ExposureMap& map);

/// One <circle> per projected embedding, colored by origin.
std::string embedding_scatter(const std::vector<Point2>& points, const std::vector<int>& origins);

}  // namespace asymcity::svg
