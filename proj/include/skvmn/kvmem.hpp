#pragma once

// Key-value memory layer: question embedding, attention over the key matrix,
// read/summary, and the erase/add write transition of the value matrix.

#include <string>

#include "skvmn/errors.hpp"
#include "skvmn/tensor.hpp"

namespace skvmn {

struct MemoryConfig {
    int num_questions = 0;  // |Q|
    int num_slots = 0;      // N
    int key_dim = 0;        // d_k
    int value_dim = 0;      // d_v

    void validate() const {
        if (num_questions <= 0 || num_slots <= 0 || key_dim <= 0 || value_dim <= 0)
            throw ConfigError("MemoryConfig: all dimensions must be strictly positive");
    }
};

// Returns row q of the embedding table A (|Q| x d_k); ids are 1-based.
inline Tensor embed_question(const Tensor& embedding, int q) {
    if (q < 1 || q > embedding.rows())
        throw InputError("question id " + std::to_string(q) + " outside [1," +
                         std::to_string(embedding.rows()) + "]");
    return slice_rows(embedding, q - 1, q);
}

// Softmax-normalised correlation between the question embedding and each key
// slot; key_matrix is N x d_k, k_t is 1 x d_k, result 1 x N.
inline Tensor attention(const Tensor& k_t, const Tensor& key_matrix) {
    return softmax_rows(matmul(k_t, transpose(key_matrix)));
}

// Attention-weighted sum of value slots: (1 x N) * (N x d_v) -> 1 x d_v.
inline Tensor read(const Tensor& w_t, const Tensor& value_matrix) {
    if (w_t.rows() != 1 || w_t.cols() != value_matrix.rows())
        throw DimensionError("read: weights " + w_t.shape_str() + " vs memory " +
                             value_matrix.shape_str());
    return matmul(w_t, value_matrix);
}

// f_t = tanh(W1^T [r_t, k_t] + b1); W1 is (d_v+d_k) x d_f, b1 is 1 x d_f.
inline Tensor summary(const Tensor& r_t, const Tensor& k_t, const Tensor& w1, const Tensor& b1) {
    return tanh(add(matmul(concat(r_t, k_t), w1), b1));
}

// Knowledge-growth vector from the summary and the observed answer:
// v_t = B^T [f_t ; y_t], with B of shape (d_f+1) x d_v.
inline Tensor write_vector(const Tensor& f_t, int y_t, const Tensor& write_embedding) {
    if (y_t != 0 && y_t != 1)
        throw InputError("answer must be 0 or 1, got " + std::to_string(y_t));
    return matmul(concat(f_t, Tensor::scalar(static_cast<double>(y_t))), write_embedding);
}

// DKVMN-compatible growth vector: row (q + y*|Q|) of a 2|Q| x d_v table.
inline Tensor write_vector_onehot(int q, int y_t, int num_questions,
                                  const Tensor& write_embedding) {
    if (y_t != 0 && y_t != 1)
        throw InputError("answer must be 0 or 1, got " + std::to_string(y_t));
    if (q < 1 || q > num_questions)
        throw InputError("question id " + std::to_string(q) + " outside [1," +
                         std::to_string(num_questions) + "]");
    const int row = (q - 1) + y_t * num_questions;
    return slice_rows(write_embedding, row, row + 1);
}

struct WriteGateParams {
    Tensor w_erase;  // d_v x d_v
    Tensor b_erase;  // 1 x d_v
    Tensor w_add;    // d_v x d_v
    Tensor b_add;    // 1 x d_v
};

// Erase/add transition of the value matrix. Returns a fresh matrix; the
// input is never mutated, so the tape can differentiate through the whole
// trajectory of memory states.
inline Tensor write(const Tensor& value_matrix, const Tensor& w_t, const Tensor& v_t,
                    const WriteGateParams& gates) {
    Tensor erase_vec = sigmoid(add(matmul(v_t, gates.w_erase), gates.b_erase));  // 1 x d_v
    Tensor add_vec = tanh(add(matmul(v_t, gates.w_add), gates.b_add));           // 1 x d_v
    Tensor w_col = transpose(w_t);                                               // N x 1
    Tensor erase_outer = matmul(w_col, erase_vec);                               // N x d_v
    Tensor add_outer = matmul(w_col, add_vec);
    Tensor kept = mul(value_matrix, sub(Tensor::scalar(1.0), erase_outer));
    return add(kept, add_outer);
}

}  // namespace skvmn
