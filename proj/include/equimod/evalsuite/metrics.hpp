#pragma once

#include <cstdint>

namespace equimod::evalsuite {

// How much the predictor displaced the original's embedding toward the view:
// sim(z'_i, zhat'_i) - sim(z'_i, z'_o). Zero means the predictor acted as the
// identity; negative means it did worse than the identity.
double absolute_equivariance(const double* z_view, const double* z_pred, const double* z_orig,
                             int64_t dim);

// Dissimilarity reduction factor: (1 - sim(z'_i, z'_o)) / (1 - sim(z'_i,
// zhat'_i)), denominator clamped below at 1e-6. One means no reduction.
double relative_equivariance(const double* z_view, const double* z_pred, const double* z_orig,
                             int64_t dim);

inline constexpr double kRelativeEquivarianceEps = 1e-6;

}  // namespace equimod::evalsuite
