#pragma once

// Sequence layer: an LSTM cell whose predecessor state comes from the hop
// lookup rather than step t-1, the sigmoid output layer, and the full
// per-sequence forward pass.

#include <optional>
#include <utility>
#include <vector>

#include "skvmn/errors.hpp"
#include "skvmn/kvmem.hpp"
#include "skvmn/seqdep.hpp"
#include "skvmn/tensor.hpp"

namespace skvmn {

struct LstmParams {
    // Each weight is (d_h + d_f) x d_h, applied to [h_prev, f_t]; biases 1 x d_h.
    Tensor w_forget, w_input, w_output, w_cand;
    Tensor b_forget, b_input, b_output, b_cand;
};

struct OutputParams {
    Tensor w2;  // d_h x 1
    Tensor b2;  // 1 x 1
};

// One LSTM cell step from an arbitrary predecessor state.
inline std::pair<Tensor, Tensor> cell_step(const Tensor& f_t, const Tensor& h_prev,
                                           const Tensor& c_prev, const LstmParams& p) {
    Tensor x = concat(h_prev, f_t);
    Tensor g = sigmoid(add(matmul(x, p.w_forget), p.b_forget));
    Tensor i = sigmoid(add(matmul(x, p.w_input), p.b_input));
    Tensor o = sigmoid(add(matmul(x, p.w_output), p.b_output));
    Tensor cand = tanh(add(matmul(x, p.w_cand), p.b_cand));
    Tensor c = add(mul(g, c_prev), mul(i, cand));
    Tensor h = mul(o, tanh(c));
    return {h, c};
}

inline Tensor predict(const Tensor& h_t, const OutputParams& out) {
    return sigmoid(add(matmul(h_t, out.w2), out.b2));
}

struct Exercise {
    int question = 0;  // 1-based id
    int answer = 0;    // 0 or 1
};

using ExerciseList = std::vector<Exercise>;

// Everything the forward pass needs, as live tensors (views into the store).
struct NetworkParams {
    Tensor question_embedding;  // A, |Q| x d_k
    Tensor write_embedding;     // B, (d_k+1) x d_v (skvmn) or 2|Q| x d_v (dkvmn)
    Tensor key_matrix;          // M^k, N x d_k
    Tensor initial_value;       // M^v_0, N x d_v
    Tensor w1, b1;              // summary layer
    WriteGateParams gates;
    LstmParams lstm;
    OutputParams output;
};

// Per-step structural trace for tests and analysis exports.
struct StepTrace {
    IdentityVector identity;
    int predecessor_step = -1;  // -1 when the subsequence starts here
    std::vector<double> attention;
};

struct SequenceResult {
    std::vector<Tensor> probabilities;  // 1x1 tensors, one per step
    Tensor final_value_matrix;
    // hop_state argument holds the final hop entries
};

// Full SKVMN step ordering per exercise: embed -> attend -> read -> summary
// -> identity -> hop lookup -> LSTM cell -> predict, then write with
// (f_t, y_t). The answer y_t is consumed only by the write, after the
// prediction, so p_t never depends on y_t.
inline SequenceResult run_sequence(const ExerciseList& exercises, const NetworkParams& params,
                                   const RangeSet& ranges, Tensor value_matrix,
                                   HopState& hop_state, int step_offset = 0,
                                   std::vector<StepTrace>* trace = nullptr) {
    if (exercises.empty()) throw InputError("run_sequence: empty exercise list");
    const int d_h = params.output.w2.rows();
    SequenceResult result;
    result.probabilities.reserve(exercises.size());
    for (std::size_t t = 0; t < exercises.size(); ++t) {
        const Exercise& ex = exercises[t];
        Tensor k_t = embed_question(params.question_embedding, ex.question);
        Tensor w_t = attention(k_t, params.key_matrix);
        Tensor r_t = read(w_t, value_matrix);
        Tensor f_t = summary(r_t, k_t, params.w1, params.b1);
        IdentityVector d_t = identity_vector(w_t, ranges);

        Tensor h_prev, c_prev;
        int pred_step = -1;
        if (auto hit = hop_state.lookup(d_t)) {
            h_prev = hit->hidden;
            c_prev = hit->cell;
            pred_step = hit->step;
        } else {
            h_prev = Tensor::zeros(1, d_h);
            c_prev = Tensor::zeros(1, d_h);
        }
        auto [h_t, c_t] = cell_step(f_t, h_prev, c_prev, params.lstm);
        Tensor p_t = predict(h_t, params.output);
        result.probabilities.push_back(p_t);
        if (trace) trace->push_back({d_t, pred_step, w_t.data()});

        const int step = step_offset + static_cast<int>(t);
        hop_state.store(d_t, h_t, c_t, step);
        Tensor v_t = write_vector(f_t, ex.answer, params.write_embedding);
        value_matrix = write(value_matrix, w_t, v_t, params.gates);
    }
    result.final_value_matrix = value_matrix;
    return result;
}

// DKVMN-compatible forward: no identity/hop machinery, feed-forward readout
// p_t = sigmoid(W2^T f_t + b2), and the one-hot (q, y) write input.
inline SequenceResult run_sequence_dkvmn(const ExerciseList& exercises,
                                         const NetworkParams& params, int num_questions,
                                         Tensor value_matrix) {
    if (exercises.empty()) throw InputError("run_sequence: empty exercise list");
    SequenceResult result;
    result.probabilities.reserve(exercises.size());
    for (const Exercise& ex : exercises) {
        Tensor k_t = embed_question(params.question_embedding, ex.question);
        Tensor w_t = attention(k_t, params.key_matrix);
        Tensor r_t = read(w_t, value_matrix);
        Tensor f_t = summary(r_t, k_t, params.w1, params.b1);
        Tensor p_t = sigmoid(add(matmul(f_t, params.output.w2), params.output.b2));
        result.probabilities.push_back(p_t);
        Tensor v_t = write_vector_onehot(ex.question, ex.answer, num_questions,
                                         params.write_embedding);
        value_matrix = write(value_matrix, w_t, v_t, params.gates);
    }
    result.final_value_matrix = value_matrix;
    return result;
}

}  // namespace skvmn
