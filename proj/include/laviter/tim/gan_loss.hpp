#pragma once

#include <vector>

#include "laviter/tim/discriminator.hpp"

namespace laviter {

inline constexpr double kProbEps = 1e-7;

// log of a probability clamped away from 0 and 1.
Tensor safe_log(const Tensor& p);
Tensor safe_log_one_minus(const Tensor& p);

// -1/2 log d_u - 1/2 log d_c for one stage's fake scores.
Tensor generator_stage_loss(const DiscriminatorOutput& fake);

// The four half-terms for one stage: real scores toward 1, fake toward 0.
Tensor discriminator_stage_loss(const DiscriminatorOutput& real,
                                const DiscriminatorOutput& fake);

// Sum over stages, mean over the batch; `per_sample_stages[b][k]` holds
// sample b's stage-k scores.
Tensor generator_loss(const std::vector<std::vector<DiscriminatorOutput>>& fake_stages);
Tensor discriminator_loss(const std::vector<std::vector<DiscriminatorOutput>>& real_stages,
                          const std::vector<std::vector<DiscriminatorOutput>>& fake_stages);

// L_G plus the weighted fake-image matching loss.
Tensor tim_total_loss(const Tensor& gen_loss, const Tensor& fake_image_matching_loss,
                      double lambda_fake_image);

}  // namespace laviter
