#include "ana/losses.hpp"

#include <cmath>

#include "ana/errors.hpp"

namespace ana {

namespace {

// Reject scores a sigmoid could never have produced, then clamp away the
// exact-0/1 underflow cases so the logs stay finite.
Var checked_prob(Var d, long* saturation_count) {
    auto vals = d.tape->value(d);
    for (double v : vals)
        if (v < 0.0 || v > 1.0 || !std::isfinite(v))
            throw DomainError("discriminator output outside [0, 1]", v);
    return d.tape->clamp(d, kDiscEps, 1.0 - kDiscEps, saturation_count);
}

}  // namespace

const char* loss_name(LossKind kind) {
    switch (kind) {
        case LossKind::Vanilla: return "vanilla";
        case LossKind::Wasserstein: return "wasserstein";
        case LossKind::Kl: return "kl";
    }
    return "?";
}

LossKind loss_from_name(const std::string& name) {
    if (name == "vanilla") return LossKind::Vanilla;
    if (name == "wasserstein") return LossKind::Wasserstein;
    if (name == "kl") return LossKind::Kl;
    throw IoError("unknown loss '" + name + "'");
}

LossPair loss_pair(LossKind kind) {
    switch (kind) {
        case LossKind::Vanilla:
            return {kind, std::log(2.0), std::log(4.0), false, Activation::Sigmoid};
        case LossKind::Wasserstein:
            return {kind, 0.0, 0.0, true, Activation::Linear};
        case LossKind::Kl:
            return {kind, 0.0, std::log(4.0), false, Activation::Sigmoid};
    }
    throw ContractError("bad loss kind");
}

Var model_loss(LossKind kind, Var d_fake, long* saturation_count) {
    Tape& t = *d_fake.tape;
    switch (kind) {
        case LossKind::Vanilla: {
            Var d = checked_prob(d_fake, saturation_count);
            return -mean(log(d));
        }
        case LossKind::Wasserstein:
            return mean(d_fake);
        case LossKind::Kl: {
            Var d = checked_prob(d_fake, saturation_count);
            return mean(log((1.0 - d) / d));
        }
    }
    (void)t;
    throw ContractError("bad loss kind");
}

Var discriminator_loss(LossKind kind, Var d_real, Var d_fake, long* saturation_count,
                       bool literal_wasserstein) {
    switch (kind) {
        case LossKind::Vanilla:
        case LossKind::Kl: {
            // The kl pair keeps the vanilla critic: D is pushed toward 1 on
            // data and 0 on simulations, which is the orientation that makes
            // the generator's log((1-D)/D) objective pull simulations toward
            // the data.
            Var dr = checked_prob(d_real, saturation_count);
            Var df = checked_prob(d_fake, saturation_count);
            return -(mean(log(dr)) + mean(log(1.0 - df)));
        }
        case LossKind::Wasserstein: {
            if (literal_wasserstein) return -mean(d_real);
            return mean(d_fake) - mean(d_real);
        }
    }
    throw ContractError("bad loss kind");
}

Var training_model_loss(LossKind kind, Var d_real, Var d_fake, long* saturation_count) {
    if (kind == LossKind::Wasserstein) return mean(d_real) - mean(d_fake);
    return model_loss(kind, d_fake, saturation_count);
}

}  // namespace ana
