#pragma once

// Marching squares on a grid that is periodic in its second index.

#include "nnmstab/types.hpp"

#include <vector>

namespace nnmstab {

struct GridPoint {
    double x = 0.0;  ///< fractional row index
    double y = 0.0;  ///< fractional column index, in [0, cols)
};

struct Polyline {
    std::vector<GridPoint> points;
    bool closed = false;
};

/// Zero level set of F (rows x cols, periodic in columns) as polylines.
/// Saddle cells are resolved with the cell-centre average.
std::vector<Polyline> zero_contours(const Mat& F);

}  // namespace nnmstab
