#pragma once

// Optimisation loop: SGD with global-norm clipping, semi-supervised batch
// scheduling, ablation splits, cross-validation folds and exact-match
// evaluation.

#include <cmath>
#include <numeric>
#include <optional>
#include <span>
#include <stdexcept>

#include "seq4/corpus.hpp"
#include "seq4/model.hpp"

namespace seq4::train {

using ad::Param;

struct NumericalAbort : std::runtime_error {
    explicit NumericalAbort(const std::string& what) : std::runtime_error(what) {}
};

enum class ModelMode { s2s, seq4 };

struct TrainConfig {
    double learning_rate = 0.1;
    double grad_clip_norm = 5.0;
    int epochs = 30;
    double alpha = 0.1;             // KL weight
    double unsup_batch_prob = 0.3;  // lambda
    std::uint64_t seed = 1;
    double latent_ratio = 1.0;
    std::size_t latent_max = 64;
    std::size_t hidden = 64;
    std::size_t embed = 32;
    std::size_t attn = 32;
    ModelMode mode = ModelMode::seq4;
    int patience = 5;        // early stopping on validation exact match; <= 0 disables
    std::size_t max_len = 64;  // prediction length cap for evaluation

    void validate() const {
        if (learning_rate <= 0 || grad_clip_norm <= 0 || epochs <= 0 || alpha < 0 ||
            unsup_batch_prob < 0 || unsup_batch_prob > 1 || latent_ratio <= 0 || hidden == 0 ||
            embed == 0 || attn == 0)
            throw ad::ContractError("invalid training configuration value");
    }
};

// Global-norm clipping, then params <- params - lr * grads. Gradients are
// consumed (zeroed).
inline void sgd_step(std::span<Param* const> params, const TrainConfig& cfg) {
    double sq = 0;
    for (const Param* p : params)
        for (double g : p->grad.v) {
            if (std::isnan(g))
                throw NumericalAbort("NaN gradient in parameter " + p->name);
            sq += g * g;
        }
    double norm = std::sqrt(sq);
    double factor = norm > cfg.grad_clip_norm ? cfg.grad_clip_norm / norm : 1.0;
    double step = cfg.learning_rate * factor;
    for (Param* p : params) {
        for (std::size_t i = 0; i < p->value.v.size(); ++i) p->value.v[i] -= step * p->grad.v[i];
        p->zero_grad();
    }
}

struct LossRecord {
    int step = 0;
    char kind = 's';  // 's' supervised, 'u' unsupervised
    double value = 0;
};

struct TrainResult {
    std::vector<LossRecord> history;
    int epochs_run = 0;
    double best_validation = -1.0;
};

using TrackerFactory = std::function<std::unique_ptr<model::StateTracker>(
    const corpus::ParallelExample&)>;

struct Dataset {
    const corpus::Vocab* vocab_x = nullptr;
    const corpus::Vocab* vocab_y = nullptr;
    std::vector<corpus::ParallelExample> paired;
    std::vector<corpus::ParallelExample> unpaired;  // y side only
    TrackerFactory tracker;  // null unless the task feeds maze-state features
};

using PredictFn = std::function<std::vector<std::string>(const corpus::ParallelExample&)>;

// Fraction of pairs whose predicted sequence matches gold exactly,
// compared as detokenized strings.
inline double eval_exact_match(const PredictFn& predict,
                               std::span<const corpus::ParallelExample> pairs) {
    if (pairs.empty()) throw ad::ContractError("eval_exact_match: no pairs");
    std::size_t correct = 0;
    for (const auto& ex : pairs)
        if (corpus::detokenize_nlmaps(predict(ex)) == corpus::detokenize_nlmaps(ex.y_tokens))
            ++correct;
    return static_cast<double>(correct) / static_cast<double>(pairs.size());
}

inline PredictFn model_predictor(model::Seq4Params& params, const Dataset& data,
                                 std::size_t max_len) {
    return [&params, &data, max_len](const corpus::ParallelExample& ex) {
        std::vector<int> x = corpus::encode_with_eos(*data.vocab_x, ex.x_tokens);
        std::unique_ptr<model::StateTracker> st;
        if (data.tracker) st = data.tracker(ex);
        auto pred = model::predict(params, x, max_len, st.get());
        return data.vocab_y->decode(pred.tokens);
    };
}

inline double eval_exact_match(model::Seq4Params& params, const Dataset& data,
                               std::span<const corpus::ParallelExample> pairs,
                               std::size_t max_len) {
    return eval_exact_match(model_predictor(params, data, max_len), pairs);
}

// Per step, an unsupervised example is drawn with probability lambda when
// unpaired data exists; otherwise supervised. Epoch size is the paired
// count. Fixed seed gives a bit-identical trajectory.
inline TrainResult train(model::Seq4Params& params, const Dataset& data, const TrainConfig& cfg,
                         std::span<const corpus::ParallelExample> validation = {}) {
    cfg.validate();
    if (data.paired.empty()) throw ad::ContractError("train: no paired data");
    auto plist = params.all();
    auto dec_list = params.decoder_segment();
    std::span<Param* const> updated =
        cfg.mode == ModelMode::s2s ? std::span<Param* const>(dec_list)
                                   : std::span<Param* const>(plist);

    Rng shuffle_rng(Rng::substream(cfg.seed, "data-shuffle"));
    Rng noise_rng(Rng::substream(cfg.seed, "latent-noise"));
    Rng mix_rng(Rng::substream(cfg.seed, "batch-mix"));

    TrainResult result;
    int step = 0;
    double best = -1.0;
    int since_best = 0;
    bool use_unpaired = cfg.mode == ModelMode::seq4 && !data.unpaired.empty();

    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        std::vector<std::size_t> order(data.paired.size());
        std::iota(order.begin(), order.end(), 0);
        for (std::size_t i = order.size(); i > 1; --i)
            std::swap(order[i - 1], order[shuffle_rng.uniform_int(i)]);

        for (std::size_t idx : order) {
            bool unsup = use_unpaired && mix_rng.uniform() < cfg.unsup_batch_prob;
            ad::Graph g;
            model::LossResult lr;
            const corpus::ParallelExample* ex;
            if (unsup) {
                ex = &data.unpaired[mix_rng.uniform_int(data.unpaired.size())];
            } else {
                ex = &data.paired[idx];
            }
            std::unique_ptr<model::StateTracker> st;
            if (data.tracker) st = data.tracker(*ex);
            std::vector<int> y = corpus::encode_with_eos(*data.vocab_y, ex->y_tokens);
            if (unsup) {
                lr = model::loss_unsup(g, params, y, cfg.alpha, noise_rng, st.get());
            } else {
                std::vector<int> x = corpus::encode_with_eos(*data.vocab_x, ex->x_tokens);
                if (cfg.mode == ModelMode::s2s)
                    lr = model::loss_s2s(g, params, x, y, st.get());
                else
                    lr = model::loss_sup(g, params, x, y, noise_rng, st.get());
            }
            if (!std::isfinite(lr.loss->val.v[0]))
                throw NumericalAbort("non-finite loss at step " + std::to_string(step));
            g.backward(lr.loss);
            sgd_step(updated, cfg);
            result.history.push_back({step, unsup ? 'u' : 's', lr.loss->val.v[0]});
            ++step;
        }
        result.epochs_run = epoch + 1;

        if (!validation.empty() && cfg.patience > 0) {
            double acc = eval_exact_match(params, data, validation, cfg.max_len);
            if (acc > best) {
                best = acc;
                since_best = 0;
            } else if (++since_best >= cfg.patience) {
                break;
            }
        }
    }
    result.best_validation = best;
    return result;
}

// ---------------------------------------------------------------------
// Ablation protocol

inline constexpr double kFractionMenu[] = {0.05, 0.10, 0.25, 0.50, 0.75, 1.00};

enum class SplitMode { supervised_only, minus, plus };

struct SplitSpec {
    double fraction = 1.0;
    SplitMode mode = SplitMode::supervised_only;
};

struct Split {
    std::vector<corpus::ParallelExample> paired;
    std::vector<corpus::ParallelExample> unpaired;
};

// Deterministic shuffled split. minus: unpaired pool is the y side of the
// discarded pairs; plus: pool supplied externally by the caller.
inline Split ablation_split(std::span<const corpus::ParallelExample> dataset,
                            const SplitSpec& spec, std::uint64_t seed,
                            std::span<const corpus::ParallelExample> generated = {}) {
    bool in_menu = false;
    for (double f : kFractionMenu) in_menu |= std::fabs(spec.fraction - f) < 1e-9;
    if (!in_menu)
        throw ad::ContractError("ablation fraction " + std::to_string(spec.fraction) +
                                " not in the fixed menu");
    if (dataset.size() < 20) throw ad::ContractError("ablation_split: need at least 20 examples");

    std::vector<std::size_t> order(dataset.size());
    std::iota(order.begin(), order.end(), 0);
    Rng rng(Rng::substream(seed, "ablation-split"));
    for (std::size_t i = order.size(); i > 1; --i)
        std::swap(order[i - 1], order[rng.uniform_int(i)]);

    std::size_t keep = static_cast<std::size_t>(
        std::llround(spec.fraction * static_cast<double>(dataset.size())));
    Split split;
    for (std::size_t i = 0; i < order.size(); ++i) {
        if (i < keep) {
            split.paired.push_back(dataset[order[i]]);
        } else if (spec.mode == SplitMode::minus) {
            corpus::ParallelExample y_only = dataset[order[i]];
            y_only.x_tokens.clear();
            y_only.has_x = false;
            split.unpaired.push_back(std::move(y_only));
        }
    }
    if (spec.mode == SplitMode::plus)
        split.unpaired.assign(generated.begin(), generated.end());
    return split;
}

struct Fold {
    std::size_t test_group = 0;  // index of the held-out group
    std::vector<std::size_t> train_groups;
};

inline std::vector<Fold> crossval_folds(std::size_t group_count = 3) {
    if (group_count != 3) throw ad::ContractError("crossval_folds expects exactly 3 groups");
    std::vector<Fold> folds;
    for (std::size_t t = 0; t < 3; ++t) {
        Fold f;
        f.test_group = t;
        for (std::size_t g = 0; g < 3; ++g)
            if (g != t) f.train_groups.push_back(g);
        folds.push_back(std::move(f));
    }
    return folds;
}

// Overall metric weighted by test-set size.
inline double weighted_accuracy(std::span<const double> accuracies,
                                std::span<const std::size_t> sizes) {
    if (accuracies.size() != sizes.size() || accuracies.empty())
        throw ad::ContractError("weighted_accuracy: mismatched inputs");
    double num = 0, den = 0;
    for (std::size_t i = 0; i < accuracies.size(); ++i) {
        num += accuracies[i] * static_cast<double>(sizes[i]);
        den += static_cast<double>(sizes[i]);
    }
    return num / den;
}

}  // namespace seq4::train
