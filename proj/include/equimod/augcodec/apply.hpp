#pragma once

#include "equimod/augcodec/policy.hpp"
#include "equimod/augcodec/trace.hpp"
#include "equimod/core/image.hpp"
#include "equimod/core/rng.hpp"

namespace equimod::augcodec {

// Draws one transformation from the policy's distribution. The variant
// without explicit dimensions samples the crop on the policy's nominal
// source size. Pure in the rng: equal seeds give equal traces.
AugmentationTrace sample_trace(const AugmentationPolicy& policy, core::Rng& rng);
AugmentationTrace sample_trace(const AugmentationPolicy& policy, core::Rng& rng, int src_h,
                               int src_w);

// Applies crop -> resize -> flip -> jitter (in recorded order) -> grayscale
// -> blur -> solarize per the trace flags. Output is policy.resolution
// square. Deterministic: same (image, trace) gives bit-identical pixels.
core::Image apply_trace(const core::Image& image, const AugmentationTrace& trace,
                        const AugmentationPolicy& policy);

// Per-augmentation probes for the equivariance report: everything off except
// the named augmentation, which is forced on with sampled parameters. `crop`
// probes sample the crop; all other probes keep the full-frame crop.
AugmentationTrace sample_single_augmentation_trace(const std::string& augmentation,
                                                   const AugmentationPolicy& policy,
                                                   core::Rng& rng, int src_h, int src_w);

// Trace that reproduces the original image up to the resize: full-frame crop,
// every flag off.
AugmentationTrace identity_trace(int src_h, int src_w);

}  // namespace equimod::augcodec
