#pragma once

#include "ivae/matrix.hpp"

namespace ivae {

// Batch of d-dimensional images, one per row. Clean data lives in [0,1];
// corrupted batches are unconstrained reals (additive noise is never clamped).
struct ImageBatch {
    Matrix<float> data;  // n × d
    int side = 0;        // d == side * side

    int count() const { return data.rows; }
    int dim() const { return data.cols; }
};

// Labels paired with an ImageBatch; used only to pick digits for grids.
struct LabelBatch {
    std::vector<int> labels;
};

}  // namespace ivae
