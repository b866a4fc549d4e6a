#pragma once

// Finite-difference checks of the four training losses on small random
// instances with frozen sampling noise.

#include "iris/grad_check.hpp"

#include <string>

namespace iris {

enum class TrainingLoss { kPolicy, kGoalCvae, kActionCvae, kQ };

inline constexpr TrainingLoss kAllTrainingLosses[] = {TrainingLoss::kPolicy, TrainingLoss::kGoalCvae,
                                                      TrainingLoss::kActionCvae, TrainingLoss::kQ};

std::string to_string(TrainingLoss loss);

/// Builds instance `instance_seed` of the loss (random weights, inputs,
/// targets and noise) and checks every parameter coordinate.
nn::GradCheckReport check_training_loss(TrainingLoss loss, std::uint64_t instance_seed,
                                        const nn::GradCheckOptions& options = {});

}  // namespace iris
