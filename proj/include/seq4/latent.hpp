#pragma once

// Logistic-normal latent token layer: per-timestep reparametrised draw of
// a distribution over the latent vocabulary, and the closed-form KL
// against the N(0, I) prior.

#include <optional>
#include <span>

#include "seq4/autodiff.hpp"
#include "seq4/nn.hpp"
#include "seq4/rng.hpp"

namespace seq4::latent {

using ad::Graph;
using ad::Tensor;
using ad::Value;

inline constexpr double kLogvarClamp = 30.0;

struct LatentStepSample {
    Value mu;       // [V_x]
    Value logvar;   // [V_x], clamped to [-30, 30]
    Value epsilon;  // [V_x] constant standard-normal draw
    Value gamma;    // mu + exp(logvar/2) * epsilon
    Value xtilde;   // softmax(gamma), on the simplex
};

// Splits the 2*V_x projection of h into (mu, logvar) and draws gamma with
// the reparametrisation trick. rng == nullptr means epsilon = 0 (the
// deterministic diagnostic mode).
inline LatentStepSample draw_latent_step(Graph& g, nn::Projection& proj, Value h, Rng* rng) {
    Value out = nn::project_logits(g, proj, h);
    std::size_t n = out->val.numel();
    if (n % 2 != 0)
        throw ad::ContractError("latent projection dimension " + std::to_string(n) +
                                " is odd; expected 2*V_x");
    std::size_t vx = n / 2;
    LatentStepSample s;
    s.mu = g.slice(out, 0, vx);
    s.logvar = g.clamp(g.slice(out, vx, vx), -kLogvarClamp, kLogvarClamp);
    Tensor eps = Tensor::zeros({vx});
    if (rng)
        for (double& e : eps.v) e = rng->normal();
    s.epsilon = g.constant(std::move(eps));
    Value sigma = g.exp(g.scale(s.logvar, 0.5));
    s.gamma = g.add(s.mu, g.mul(sigma, s.epsilon));
    s.xtilde = g.softmax(s.gamma);
    return s;
}

// KL(N(mu, diag(sigma^2)) || N(0, I)) = 1/2 sum(mu^2 + sigma^2 - logvar - 1)
inline Value kl_step(Graph& g, Value mu, Value logvar) {
    Value lv = g.clamp(logvar, -kLogvarClamp, kLogvarClamp);
    Value term = g.add(g.add(g.mul(mu, mu), g.exp(lv)), g.scale(lv, -1.0));
    Value s = g.sum(term);
    Value n = g.constant(Tensor::scalar(static_cast<double>(mu->val.numel())));
    return g.scale(g.add(s, g.scale(n, -1.0)), 0.5);
}

// Sum over timesteps; empty sequence contributes zero.
inline Value kl_sequence(Graph& g, std::span<const LatentStepSample> samples) {
    Value total = g.constant(Tensor::scalar(0.0));
    for (const LatentStepSample& s : samples)
        total = g.add(total, kl_step(g, s.mu, s.logvar));
    return total;
}

}  // namespace seq4::latent
