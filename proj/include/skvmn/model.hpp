#pragma once

// Full network assembly: configuration, parameter initialisation, and the
// batch forward pass used for evaluation.

#include <cmath>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "skvmn/errors.hpp"
#include "skvmn/hoplstm.hpp"
#include "skvmn/kvmem.hpp"
#include "skvmn/seqdep.hpp"
#include "skvmn/tensor.hpp"

namespace skvmn {

enum class ModelMode { skvmn, dkvmn_compat };

inline std::string to_string(ModelMode m) {
    return m == ModelMode::skvmn ? "skvmn" : "dkvmn";
}

inline ModelMode mode_from_string(const std::string& s) {
    if (s == "skvmn") return ModelMode::skvmn;
    if (s == "dkvmn") return ModelMode::dkvmn_compat;
    throw ConfigError("unknown mode '" + s + "' (expected skvmn or dkvmn)");
}

struct ModelConfig {
    MemoryConfig memory;
    int hidden_dim = 0;  // d_h; 0 means "same as key_dim"
    RangeSet ranges;
    ModelMode mode = ModelMode::skvmn;
    int max_seq_len = 200;

    int resolved_hidden_dim() const { return hidden_dim > 0 ? hidden_dim : memory.key_dim; }
    // d_f = d_k: the summary dimension equals the key dimension.
    int summary_dim() const { return memory.key_dim; }

    void validate() const {
        memory.validate();
        ranges.validate();
        if (max_seq_len < 1) throw ConfigError("max_seq_len must be >= 1");
        if (mode == ModelMode::dkvmn_compat && resolved_hidden_dim() != summary_dim())
            throw ConfigError("dkvmn mode requires hidden_dim == key_dim");
    }

    nlohmann::json to_json() const {
        return {{"num_questions", memory.num_questions},
                {"num_slots", memory.num_slots},
                {"key_dim", memory.key_dim},
                {"value_dim", memory.value_dim},
                {"hidden_dim", hidden_dim},
                {"mode", to_string(mode)},
                {"max_seq_len", max_seq_len},
                {"ranges",
                 {{"low", {ranges.low.a, ranges.low.b, ranges.low.c}},
                  {"medium", {ranges.medium.a, ranges.medium.b, ranges.medium.c}},
                  {"high", {ranges.high.a, ranges.high.b, ranges.high.c}}}}};
    }

    static ModelConfig from_json(const nlohmann::json& j) {
        ModelConfig c;
        c.memory.num_questions = j.at("num_questions").get<int>();
        c.memory.num_slots = j.at("num_slots").get<int>();
        c.memory.key_dim = j.at("key_dim").get<int>();
        c.memory.value_dim = j.at("value_dim").get<int>();
        c.hidden_dim = j.at("hidden_dim").get<int>();
        c.mode = mode_from_string(j.at("mode").get<std::string>());
        c.max_seq_len = j.at("max_seq_len").get<int>();
        auto rd = [&](const char* k, TriangularRange& r) {
            auto arr = j.at("ranges").at(k);
            r = TriangularRange{arr.at(0).get<double>(), arr.at(1).get<double>(),
                                arr.at(2).get<double>()};
        };
        rd("low", c.ranges.low);
        rd("medium", c.ranges.medium);
        rd("high", c.ranges.high);
        c.validate();
        return c;
    }
};

// Ordered named map of all trainable tensors with gradient slots.
class ParameterStore {
public:
    Tensor& add(const std::string& name, Tensor t) {
        for (auto& [n, _] : params_)
            if (n == name) throw ContractError("duplicate parameter name '" + name + "'");
        t.set_requires_grad();
        params_.emplace_back(name, std::move(t));
        return params_.back().second;
    }

    Tensor& get(const std::string& name) {
        for (auto& [n, t] : params_)
            if (n == name) return t;
        throw ContractError("unknown parameter '" + name + "'");
    }
    const Tensor& get(const std::string& name) const {
        return const_cast<ParameterStore*>(this)->get(name);
    }

    bool has(const std::string& name) const {
        for (auto& [n, _] : params_)
            if (n == name) return true;
        return false;
    }

    std::vector<std::pair<std::string, Tensor>>& all() { return params_; }
    const std::vector<std::pair<std::string, Tensor>>& all() const { return params_; }
    std::size_t size() const { return params_.size(); }

    std::size_t scalar_count() const {
        std::size_t n = 0;
        for (auto& [name, t] : params_) n += static_cast<std::size_t>(t.size());
        return n;
    }

    void zero_grad() {
        for (auto& [name, t] : params_) t.zero_grad();
    }

    // Deep value copy (grads not copied).
    ParameterStore clone() const {
        ParameterStore out;
        for (auto& [name, t] : params_) out.add(name, t.detached());
        return out;
    }

    void copy_values_from(const ParameterStore& other) {
        for (auto& [name, t] : params_) t.data() = other.get(name).data();
    }

private:
    std::vector<std::pair<std::string, Tensor>> params_;
};

namespace detail {

inline Tensor gaussian_tensor(int rows, int cols, double sigma, std::mt19937_64& rng) {
    Tensor t = Tensor::zeros(rows, cols);
    std::normal_distribution<double> dist(0.0, sigma);
    for (auto& v : t.data()) v = dist(rng);
    return t;
}

inline Tensor glorot_tensor(int rows, int cols, std::mt19937_64& rng) {
    const double bound = std::sqrt(6.0 / (rows + cols));
    Tensor t = Tensor::zeros(rows, cols);
    std::uniform_real_distribution<double> dist(-bound, bound);
    for (auto& v : t.data()) v = dist(rng);
    return t;
}

}  // namespace detail

// Memory and embedding matrices ~ N(0, sigma); neural-layer weights Glorot
// uniform; biases zero. Fully determined by the seed.
inline ParameterStore init_params(const ModelConfig& config, std::uint64_t seed, double sigma) {
    config.validate();
    if (sigma <= 0.0) throw ConfigError("sigma must be positive");
    const int nq = config.memory.num_questions;
    const int n = config.memory.num_slots;
    const int dk = config.memory.key_dim;
    const int dv = config.memory.value_dim;
    const int df = config.summary_dim();
    const int dh = config.resolved_hidden_dim();
    const int write_rows = config.mode == ModelMode::skvmn ? df + 1 : 2 * nq;

    std::mt19937_64 rng(seed);
    ParameterStore p;
    p.add("A", detail::gaussian_tensor(nq, dk, sigma, rng));
    p.add("B", detail::gaussian_tensor(write_rows, dv, sigma, rng));
    p.add("Mk", detail::gaussian_tensor(n, dk, sigma, rng));
    p.add("Mv0", detail::gaussian_tensor(n, dv, sigma, rng));
    p.add("W1", detail::glorot_tensor(dv + dk, df, rng));
    p.add("b1", Tensor::zeros(1, df));
    p.add("We", detail::glorot_tensor(dv, dv, rng));
    p.add("be", Tensor::zeros(1, dv));
    p.add("Wa", detail::glorot_tensor(dv, dv, rng));
    p.add("ba", Tensor::zeros(1, dv));
    p.add("Wg", detail::glorot_tensor(dh + df, dh, rng));
    p.add("bg", Tensor::zeros(1, dh));
    p.add("Wi", detail::glorot_tensor(dh + df, dh, rng));
    p.add("bi", Tensor::zeros(1, dh));
    p.add("Wo", detail::glorot_tensor(dh + df, dh, rng));
    p.add("bo", Tensor::zeros(1, dh));
    p.add("Wc", detail::glorot_tensor(dh + df, dh, rng));
    p.add("bc", Tensor::zeros(1, dh));
    p.add("W2", detail::glorot_tensor(dh, 1, rng));
    p.add("b2", Tensor::zeros(1, 1));
    return p;
}

inline NetworkParams network_view(ParameterStore& p) {
    NetworkParams net;
    net.question_embedding = p.get("A");
    net.write_embedding = p.get("B");
    net.key_matrix = p.get("Mk");
    net.initial_value = p.get("Mv0");
    net.w1 = p.get("W1");
    net.b1 = p.get("b1");
    net.gates = {p.get("We"), p.get("be"), p.get("Wa"), p.get("ba")};
    net.lstm = {p.get("Wg"), p.get("Wi"), p.get("Wo"), p.get("Wc"),
                p.get("bg"), p.get("bi"), p.get("bo"), p.get("bc")};
    net.output = {p.get("W2"), p.get("b2")};
    return net;
}

// Runs one sequence end to end, segmenting at max_seq_len with the value
// matrix and hop state carried (detached) across chunks. Returns live
// probability tensors; call under a Tape to train, without one to evaluate.
inline std::vector<Tensor> forward_sequence(const ExerciseList& exercises, ParameterStore& params,
                                            const ModelConfig& config,
                                            std::vector<StepTrace>* trace = nullptr) {
    NetworkParams net = network_view(params);
    std::vector<Tensor> probs;
    probs.reserve(exercises.size());
    Tensor value_matrix = net.initial_value;
    HopState hop;
    int offset = 0;
    while (offset < static_cast<int>(exercises.size())) {
        const int end =
            std::min<int>(offset + config.max_seq_len, static_cast<int>(exercises.size()));
        ExerciseList chunk(exercises.begin() + offset, exercises.begin() + end);
        SequenceResult res;
        if (config.mode == ModelMode::skvmn) {
            res = run_sequence(chunk, net, config.ranges, value_matrix, hop, offset, trace);
        } else {
            res = run_sequence_dkvmn(chunk, net, config.memory.num_questions, value_matrix);
        }
        for (auto& p : res.probabilities) probs.push_back(p);
        value_matrix = res.final_value_matrix;
        offset = end;
        if (offset < static_cast<int>(exercises.size())) {
            // truncate gradients at the chunk boundary
            value_matrix = value_matrix.detached();
            hop.detach_all();
        }
    }
    return probs;
}

// Per-sequence probability values for a batch (evaluation path, no tape).
inline std::vector<std::vector<double>> forward(const std::vector<ExerciseList>& batch,
                                                ParameterStore& params,
                                                const ModelConfig& config) {
    std::vector<std::vector<double>> out;
    out.reserve(batch.size());
    for (const auto& seq : batch) {
        std::vector<Tensor> probs = forward_sequence(seq, params, config);
        std::vector<double> vals;
        vals.reserve(probs.size());
        for (auto& p : probs) vals.push_back(p.item());
        out.push_back(std::move(vals));
    }
    return out;
}

}  // namespace skvmn
