#include "laviter/tim/gan_loss.hpp"

namespace laviter {

Tensor safe_log(const Tensor& p) { return log(clamp(p, kProbEps, 1.0 - kProbEps)); }

Tensor safe_log_one_minus(const Tensor& p) {
  return log(clamp(add_scalar(neg(p), 1.0), kProbEps, 1.0 - kProbEps));
}

Tensor generator_stage_loss(const DiscriminatorOutput& fake) {
  return mul_scalar(add(safe_log(fake.uncond), safe_log(fake.cond)), -0.5);
}

Tensor discriminator_stage_loss(const DiscriminatorOutput& real,
                                const DiscriminatorOutput& fake) {
  Tensor toward_one = add(safe_log(real.uncond), safe_log(real.cond));
  Tensor toward_zero = add(safe_log_one_minus(fake.uncond), safe_log_one_minus(fake.cond));
  return mul_scalar(add(toward_one, toward_zero), -0.5);
}

namespace {

Tensor batch_mean(std::vector<Tensor> per_sample) {
  Tensor packed = pack_scalars({static_cast<int>(per_sample.size())}, per_sample);
  return mean(packed);
}

}  // namespace

Tensor generator_loss(const std::vector<std::vector<DiscriminatorOutput>>& fake_stages) {
  if (fake_stages.empty()) throw ContractError("generator_loss: empty batch");
  std::vector<Tensor> per_sample;
  for (const auto& stages : fake_stages) {
    if (stages.empty()) throw ContractError("generator_loss: sample with no stages");
    Tensor acc = generator_stage_loss(stages[0]);
    for (size_t k = 1; k < stages.size(); ++k) acc = add(acc, generator_stage_loss(stages[k]));
    per_sample.push_back(acc);
  }
  return batch_mean(std::move(per_sample));
}

Tensor discriminator_loss(const std::vector<std::vector<DiscriminatorOutput>>& real_stages,
                          const std::vector<std::vector<DiscriminatorOutput>>& fake_stages) {
  if (real_stages.size() != fake_stages.size() || real_stages.empty())
    throw ContractError("discriminator_loss: real/fake batch sizes differ");
  std::vector<Tensor> per_sample;
  for (size_t b = 0; b < real_stages.size(); ++b) {
    if (real_stages[b].size() != fake_stages[b].size() || real_stages[b].empty())
      throw ContractError("discriminator_loss: stage counts differ");
    Tensor acc = discriminator_stage_loss(real_stages[b][0], fake_stages[b][0]);
    for (size_t k = 1; k < real_stages[b].size(); ++k)
      acc = add(acc, discriminator_stage_loss(real_stages[b][k], fake_stages[b][k]));
    per_sample.push_back(acc);
  }
  return batch_mean(std::move(per_sample));
}

Tensor tim_total_loss(const Tensor& gen_loss, const Tensor& fake_image_matching_loss,
                      double lambda_fake_image) {
  return add(gen_loss, mul_scalar(fake_image_matching_loss, lambda_fake_image));
}

}  // namespace laviter
