#pragma once

// Loss, optimizer, schedule, clipping, cross-validation, and the training
// loop. Gradients are taped per sequence and summed across the mini-batch
// before clipping and the Adam step.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>
#include <ostream>
#include <random>
#include <string>
#include <vector>

#include "skvmn/data.hpp"
#include "skvmn/errors.hpp"
#include "skvmn/metrics.hpp"
#include "skvmn/model.hpp"
#include "skvmn/tensor.hpp"

namespace skvmn {

struct TrainConfig {
    int batch_size = 32;
    int epochs = 120;
    double lr = 0.01;
    double lr_floor = 0.001;
    int anneal_period = 15;
    int anneal_epochs = 120;  // schedule is periodic up to here, flat after
    double adam_beta1 = 0.9;
    double adam_beta2 = 0.999;
    double adam_eps = 1e-8;
    double clip_norm = 5.0;
    int folds = 5;
    std::uint64_t seed = 0;
    bool cosine_schedule = true;

    void validate() const {
        if (batch_size <= 0 || epochs <= 0 || lr <= 0 || lr_floor <= 0 || anneal_period <= 0 ||
            clip_norm <= 0 || folds < 2)
            throw ConfigError("TrainConfig: all settings must be positive (folds >= 2)");
        if (lr_floor > lr) throw ConfigError("TrainConfig: lr_floor must not exceed lr");
    }
};

// L = -sum_t (y_t log p_t + (1-y_t) log(1-p_t)); positions with mask 0 are
// excluded (padding).
inline Tensor loss(const std::vector<Tensor>& probs, const std::vector<int>& answers,
                   const std::vector<int>* mask = nullptr) {
    if (probs.size() != answers.size() || (mask && mask->size() != probs.size()))
        throw ContractError("loss: " + std::to_string(probs.size()) + " probs vs " +
                            std::to_string(answers.size()) + " answers");
    Tensor total = Tensor::scalar(0.0);
    const Tensor one = Tensor::scalar(1.0);
    for (std::size_t t = 0; t < probs.size(); ++t) {
        if (mask && (*mask)[t] == 0) continue;
        const Tensor& p = probs[t];
        Tensor term = answers[t] == 1 ? log(p) : log(sub(one, p));
        total = sub(total, term);
    }
    return total;
}

// Cosine-annealed restarts: within each period of the first anneal_epochs,
// gamma(e) = floor + (lr - floor) * (1 + cos(pi * (e mod P) / P)) / 2;
// constant at the floor afterwards.
inline double lr_schedule(int epoch, const TrainConfig& cfg) {
    if (!cfg.cosine_schedule) return cfg.lr;
    if (epoch >= cfg.anneal_epochs) return cfg.lr_floor;
    const int phase = epoch % cfg.anneal_period;
    if (phase == 0) return cfg.lr;  // exact at restarts, free of rounding in the cosine form
    const double pi = std::acos(-1.0);
    return cfg.lr_floor + (cfg.lr - cfg.lr_floor) *
                              (1.0 + std::cos(pi * phase / cfg.anneal_period)) / 2.0;
}

// Global-norm clipping over all parameters.
inline void clip_gradients(ParameterStore& params, double clip_norm) {
    double sq = 0.0;
    for (auto& [name, t] : params.all()) {
        if (!t.has_grad()) continue;
        for (double g : t.grad()) sq += g * g;
    }
    const double norm = std::sqrt(sq);
    if (norm <= clip_norm) return;
    const double scale = clip_norm / norm;
    for (auto& [name, t] : params.all()) {
        if (!t.has_grad()) continue;
        for (double& g : t.grad_buffer()) g *= scale;
    }
}

struct AdamState {
    struct Slot {
        std::vector<double> m, v;
    };
    std::vector<Slot> slots;
    long long step = 0;

    explicit AdamState(const ParameterStore& params) {
        for (auto& [name, t] : params.all())
            slots.push_back({std::vector<double>(t.size(), 0.0),
                             std::vector<double>(t.size(), 0.0)});
    }
};

inline void adam_step(ParameterStore& params, AdamState& state, double lr,
                      const TrainConfig& cfg) {
    ++state.step;
    const double b1 = cfg.adam_beta1, b2 = cfg.adam_beta2;
    const double bc1 = 1.0 - std::pow(b1, static_cast<double>(state.step));
    const double bc2 = 1.0 - std::pow(b2, static_cast<double>(state.step));
    std::size_t idx = 0;
    for (auto& [name, t] : params.all()) {
        auto& slot = state.slots[idx++];
        if (!t.has_grad()) continue;
        const auto& g = t.grad();
        auto& val = t.data();
        for (int i = 0; i < t.size(); ++i) {
            slot.m[i] = b1 * slot.m[i] + (1.0 - b1) * g[i];
            slot.v[i] = b2 * slot.v[i] + (1.0 - b2) * g[i] * g[i];
            const double mhat = slot.m[i] / bc1;
            const double vhat = slot.v[i] / bc2;
            val[i] -= lr * mhat / (std::sqrt(vhat) + cfg.adam_eps);
        }
    }
}

// Disjoint, covering, by-student folds; deterministic under seed.
inline std::vector<std::pair<std::vector<std::size_t>, std::vector<std::size_t>>> kfold_split(
    std::size_t num_students, int folds, std::uint64_t seed) {
    if (folds < 2) throw InputError("kfold_split: folds must be >= 2");
    if (num_students < static_cast<std::size_t>(folds))
        throw InputError("kfold_split: fewer students (" + std::to_string(num_students) +
                         ") than folds (" + std::to_string(folds) + ")");
    std::vector<std::size_t> idx(num_students);
    std::iota(idx.begin(), idx.end(), 0);
    std::mt19937_64 rng(seed);
    std::shuffle(idx.begin(), idx.end(), rng);
    std::vector<std::pair<std::vector<std::size_t>, std::vector<std::size_t>>> out(folds);
    for (std::size_t i = 0; i < idx.size(); ++i)
        out[i % folds].second.push_back(idx[i]);
    for (int f = 0; f < folds; ++f) {
        for (int g = 0; g < folds; ++g)
            if (g != f)
                out[f].first.insert(out[f].first.end(), out[g].second.begin(),
                                    out[g].second.end());
        std::sort(out[f].first.begin(), out[f].first.end());
        std::sort(out[f].second.begin(), out[f].second.end());
    }
    return out;
}

struct EpochRecord {
    int epoch = 0;
    double lr = 0.0;
    double train_loss = 0.0;  // mean cross-entropy per predicted step
    double val_auc = 0.0;
    long long wall_ms = 0;
};

struct TrainResult {
    ParameterStore best_params;
    std::vector<EpochRecord> log;
    double best_val_auc = 0.0;
    int best_epoch = -1;
};

inline void append_log_line(std::ostream& os, const EpochRecord& r) {
    os << "epoch=" << r.epoch << " lr=" << detail::fmt6(r.lr)
       << " train_loss=" << detail::fmt6(r.train_loss) << " val_auc=" << detail::fmt6(r.val_auc)
       << " wall_ms=" << r.wall_ms << "\n";
    os.flush();
}

inline double evaluate_auc(const std::vector<ExerciseList>& sequences, ParameterStore& params,
                           const ModelConfig& config) {
    std::vector<double> scores;
    std::vector<int> labels;
    for (const auto& seq : sequences) {
        std::vector<Tensor> probs = forward_sequence(seq, params, config);
        for (std::size_t t = 0; t < seq.size(); ++t) {
            scores.push_back(probs[t].item());
            labels.push_back(seq[t].answer);
        }
    }
    return auc(scores, labels);
}

// Shuffled mini-batch epochs: forward -> loss -> backward -> clip -> adam.
// Gradients are averaged over the number of predicted steps in the batch.
// Returns the checkpoint with the best validation AUC.
inline TrainResult train_model(const std::vector<ExerciseList>& train_seqs,
                               const std::vector<ExerciseList>& val_seqs,
                               const ModelConfig& model_cfg, const TrainConfig& train_cfg,
                               std::ostream* log_stream = nullptr) {
    model_cfg.validate();
    train_cfg.validate();
    if (train_seqs.empty()) throw InputError("train_model: empty training split");

    ParameterStore params = init_params(model_cfg, train_cfg.seed, 0.1);
    AdamState adam(params);
    TrainResult result;
    result.best_params = params.clone();

    std::vector<std::size_t> order(train_seqs.size());
    std::iota(order.begin(), order.end(), 0);

    for (int epoch = 0; epoch < train_cfg.epochs; ++epoch) {
        const auto t0 = std::chrono::steady_clock::now();
        const double lr = lr_schedule(epoch, train_cfg);
        std::mt19937_64 rng(train_cfg.seed ^ (0x9E3779B97F4A7C15ull * (epoch + 1)));
        std::shuffle(order.begin(), order.end(), rng);

        double epoch_loss = 0.0;
        long long epoch_preds = 0;
        for (std::size_t b = 0; b < order.size(); b += train_cfg.batch_size) {
            const std::size_t end = std::min(order.size(), b + train_cfg.batch_size);
            params.zero_grad();
            double batch_loss = 0.0;
            long long batch_preds = 0;
            for (std::size_t s = b; s < end; ++s) {
                const ExerciseList& seq = train_seqs[order[s]];
                Tape tape;
                std::vector<Tensor> probs = forward_sequence(seq, params, model_cfg);
                std::vector<int> answers;
                answers.reserve(seq.size());
                for (const auto& ex : seq) answers.push_back(ex.answer);
                Tensor l = loss(probs, answers);
                tape.backward(l);
                batch_loss += l.item();
                batch_preds += static_cast<long long>(seq.size());
            }
            if (!std::isfinite(batch_loss))
                throw TrainError("non-finite loss in epoch " + std::to_string(epoch) +
                                 ", batch starting at sequence " + std::to_string(b));
            // sum -> mean over predicted steps
            const double inv = 1.0 / static_cast<double>(batch_preds);
            for (auto& [name, t] : params.all())
                if (t.has_grad())
                    for (double& g : t.grad_buffer()) g *= inv;
            clip_gradients(params, train_cfg.clip_norm);
            adam_step(params, adam, lr, train_cfg);
            epoch_loss += batch_loss;
            epoch_preds += batch_preds;
        }

        EpochRecord rec;
        rec.epoch = epoch;
        rec.lr = lr;
        rec.train_loss = epoch_loss / static_cast<double>(epoch_preds);
        rec.val_auc = val_seqs.empty() ? 0.5 : evaluate_auc(val_seqs, params, model_cfg);
        rec.wall_ms = std::chrono::duration_cast<std::chrono::milliseconds>(
                          std::chrono::steady_clock::now() - t0)
                          .count();
        result.log.push_back(rec);
        if (log_stream) append_log_line(*log_stream, rec);

        if (rec.val_auc > result.best_val_auc || result.best_epoch < 0) {
            result.best_val_auc = rec.val_auc;
            result.best_epoch = epoch;
            result.best_params = params.clone();
        }
    }
    return result;
}

}  // namespace skvmn
