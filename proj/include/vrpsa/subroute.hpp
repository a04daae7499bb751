#pragma once

#include "vrpsa/roadnet.hpp"

#include <vector>

namespace vrpsa {

struct TimeInterval {
    double lo = 0.0;
    double hi = 0.0;
};

/// Maximal run of same-type road segments between two transition
/// timestamps of one vehicle's schedule.
struct SubRoute {
    int vehicle = 0;
    RoadType kind = RoadType::Ordinary;
    double t_enter = 0.0;
    double t_exit = 0.0;
    double duration = 0.0;
    std::vector<int> edges; // network edge indices, in travel order
    // Aggregated travel-time adjustment bounds of the merged segments.
    double gamma_lo = 1.0;
    double gamma_hi = 1.0;
};

} // namespace vrpsa
