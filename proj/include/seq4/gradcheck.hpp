#pragma once

// Central finite-difference gradient oracle. Independent of the backward
// pass: it only re-evaluates the forward value under point perturbations.

#include <cmath>
#include <span>
#include <string>

#include "seq4/autodiff.hpp"

namespace seq4::ad {

struct OracleInvalid : std::runtime_error {
    explicit OracleInvalid(const std::string& what) : std::runtime_error(what) {}
};

struct GradCheckReport {
    double max_rel_err = 0.0;
    std::string worst_param;
    std::size_t worst_index = 0;
};

// build_loss: (Graph&) -> scalar Value over the current parameter values.
// Must be deterministic (fix any noise before calling); checked by a
// double evaluation.
template <class BuildLoss>
GradCheckReport finite_difference_check(BuildLoss&& build_loss, std::span<Param*> params,
                                        double eps = 1e-5) {
    auto eval = [&]() -> double {
        Graph g;
        Value root = build_loss(g);
        if (root->val.numel() != 1)
            throw ContractError("finite_difference_check: loss must be scalar");
        return root->val.v[0];
    };

    double base = eval();
    if (eval() != base)
        throw OracleInvalid("loss is not deterministic under repeated evaluation");

    for (Param* p : params) p->zero_grad();
    {
        Graph g;
        Value root = build_loss(g);
        g.backward(root);
    }

    GradCheckReport rep;
    for (Param* p : params) {
        for (std::size_t i = 0; i < p->value.v.size(); ++i) {
            double saved = p->value.v[i];
            p->value.v[i] = saved + eps;
            double fp = eval();
            p->value.v[i] = saved - eps;
            double fm = eval();
            p->value.v[i] = saved;
            double numeric = (fp - fm) / (2.0 * eps);
            double analytic = p->grad.v[i];
            double denom = std::max({std::fabs(analytic), std::fabs(numeric), 1e-8});
            double rel = std::fabs(analytic - numeric) / denom;
            if (rel > rep.max_rel_err) {
                rep.max_rel_err = rel;
                rep.worst_param = p->name;
                rep.worst_index = i;
            }
        }
    }
    return rep;
}

}  // namespace seq4::ad
