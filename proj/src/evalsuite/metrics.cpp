#include "equimod/evalsuite/metrics.hpp"

#include <algorithm>

#include "equimod/objectives/losses.hpp"

namespace equimod::evalsuite {

double absolute_equivariance(const double* z_view, const double* z_pred, const double* z_orig,
                             int64_t dim) {
  return objectives::cosine_similarity(z_view, z_pred, dim) -
         objectives::cosine_similarity(z_view, z_orig, dim);
}

double relative_equivariance(const double* z_view, const double* z_pred, const double* z_orig,
                             int64_t dim) {
  const double num = 1.0 - objectives::cosine_similarity(z_view, z_orig, dim);
  const double den =
      std::max(1.0 - objectives::cosine_similarity(z_view, z_pred, dim), kRelativeEquivarianceEps);
  return num / den;
}

}  // namespace equimod::evalsuite
