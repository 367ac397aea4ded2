#pragma once

#include "ana/mlp.hpp"
#include "ana/tape.hpp"

namespace ana {

enum class LossKind { Vanilla, Wasserstein, Kl };

const char* loss_name(LossKind kind);
LossKind loss_from_name(const std::string& name);

// Static facts about an adversarial loss pair: the loss values at the
// indifferent (constant 1/2) discriminator, whether the critic needs weight
// clipping, and which output activation the discriminator should use.
struct LossPair {
    LossKind kind;
    double equilibrium_model_loss;
    double equilibrium_disc_loss;
    bool requires_clipping;
    Activation output_activation;
};

LossPair loss_pair(LossKind kind);

// Discriminator outputs for the probabilistic losses are clamped into
// [kDiscEps, 1 - kDiscEps] before any log; clamped entries are counted as
// saturation events.  Inputs outside [0, 1] are rejected.
inline constexpr double kDiscEps = 1e-12;

// Loss reported for the forward-model/generator side, as a function of the
// discriminator scores on simulated samples:
//   vanilla      -mean log D(y~)
//   wasserstein   mean D(y~)
//   kl            mean log((1 - D(y~)) / D(y~))
Var model_loss(LossKind kind, Var d_fake, long* saturation_count = nullptr);

// Loss minimized by the discriminator update:
//   vanilla      -mean[log D(y) + log(1 - D(y~))]
//   wasserstein  -mean D(y) + mean D(y~)   (standard critic objective)
//   kl           same critic as vanilla; see note below
// Setting literal_wasserstein drops the critic's fake-sample term, i.e. the
// bare -mean D(y) form.
Var discriminator_loss(LossKind kind, Var d_real, Var d_fake,
                       long* saturation_count = nullptr,
                       bool literal_wasserstein = false);

// Objective minimized when updating the estimated parameters or generator.
// For vanilla and kl this is model_loss(d_fake).  For wasserstein it is the
// normalized form  mean D(y) - mean D(y~),  whose gradient in the fake
// samples is the standard critic-guided direction and whose value sits at 0
// for an indifferent discriminator.
Var training_model_loss(LossKind kind, Var d_real, Var d_fake,
                        long* saturation_count = nullptr);

}  // namespace ana
