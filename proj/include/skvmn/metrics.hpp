#pragma once

// AUC/ROC computation and analysis exports (knowledge-state probe matrices,
// question clusters). Exports are tab-separated text with a header row and
// 6-decimal fixed formatting, for external plotting.

#include <algorithm>
#include <fstream>
#include <iomanip>
#include <map>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include "skvmn/errors.hpp"
#include "skvmn/model.hpp"

namespace skvmn {

struct RocCurve {
    std::vector<std::pair<double, double>> points;  // (fpr, tpr), (0,0) .. (1,1)
    double auc = 0.0;
};

// Rank-based (Mann-Whitney) AUC with half credit for ties; equals the
// trapezoidal area under the ROC curve.
inline double auc(const std::vector<double>& scores, const std::vector<int>& labels) {
    if (scores.size() != labels.size())
        throw ContractError("auc: " + std::to_string(scores.size()) + " scores vs " +
                            std::to_string(labels.size()) + " labels");
    long long pos = 0, neg = 0;
    for (int y : labels) (y == 1 ? pos : neg)++;
    if (pos == 0 || neg == 0) throw MetricError("auc undefined: only one class present");

    std::vector<std::size_t> order(scores.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });
    // midrank sum over positives
    double rank_sum = 0.0;
    std::size_t i = 0;
    while (i < order.size()) {
        std::size_t j = i;
        while (j < order.size() && scores[order[j]] == scores[order[i]]) ++j;
        const double midrank = 0.5 * (static_cast<double>(i + 1) + static_cast<double>(j));
        for (std::size_t k = i; k < j; ++k)
            if (labels[order[k]] == 1) rank_sum += midrank;
        i = j;
    }
    return (rank_sum - 0.5 * static_cast<double>(pos) * (pos + 1)) /
           (static_cast<double>(pos) * static_cast<double>(neg));
}

inline RocCurve roc_curve(const std::vector<double>& scores, const std::vector<int>& labels) {
    RocCurve curve;
    curve.auc = auc(scores, labels);
    long long pos = 0, neg = 0;
    for (int y : labels) (y == 1 ? pos : neg)++;

    std::vector<std::size_t> order(scores.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
    curve.points.emplace_back(0.0, 0.0);
    long long tp = 0, fp = 0;
    std::size_t i = 0;
    while (i < order.size()) {
        std::size_t j = i;
        while (j < order.size() && scores[order[j]] == scores[order[i]]) ++j;
        for (std::size_t k = i; k < j; ++k) (labels[order[k]] == 1 ? tp : fp)++;
        curve.points.emplace_back(static_cast<double>(fp) / neg, static_cast<double>(tp) / pos);
        i = j;
    }
    return curve;
}

namespace detail {

inline std::string fmt6(double v) {
    std::ostringstream ss;
    ss << std::fixed << std::setprecision(6) << v;
    return ss.str();
}

}  // namespace detail

// Writes a T x N matrix of per-step concept-state scalars: at each step, the
// probability obtained by substituting a one-hot attention at slot i into the
// read/summary/output stack, probing how mastered each concept looks before
// the step's write is applied. Columns follow the exercise order.
inline void export_knowledge_states(ParameterStore& params, const ModelConfig& config,
                                    const ExerciseList& exercises, const std::string& path) {
    config.validate();
    if (config.resolved_hidden_dim() != config.summary_dim())
        throw ConfigError("knowledge-state export requires hidden_dim == key_dim");
    NetworkParams net = network_view(params);
    const int n = config.memory.num_slots;

    std::ofstream out(path, std::ios::trunc);
    if (!out) throw Error("cannot open '" + path + "' for writing");
    out << "step\tquestion\tanswer";
    for (int i = 0; i < n; ++i) out << "\tconcept_" << (i + 1);
    out << "\n";

    Tensor value_matrix = net.initial_value;
    HopState hop;
    for (std::size_t t = 0; t < exercises.size(); ++t) {
        const Exercise& ex = exercises[t];
        Tensor k_t = embed_question(net.question_embedding, ex.question);
        Tensor w_t = attention(k_t, net.key_matrix);
        out << (t + 1) << "\t" << ex.question << "\t" << ex.answer;
        for (int i = 0; i < n; ++i) {
            Tensor probe = Tensor::zeros(1, n);
            probe.at(0, i) = 1.0;
            Tensor r = read(probe, value_matrix);
            Tensor f = summary(r, k_t, net.w1, net.b1);
            Tensor p = sigmoid(add(matmul(f, net.output.w2), net.output.b2));
            out << "\t" << detail::fmt6(p.item());
        }
        out << "\n";
        Tensor r_t = read(w_t, value_matrix);
        Tensor f_t = summary(r_t, k_t, net.w1, net.b1);
        Tensor v_t = write_vector(f_t, ex.answer, net.write_embedding);
        value_matrix = write(value_matrix, w_t, v_t, net.gates);
    }
}

// One row per question: attention vector over concepts, identity codes, and
// a dense cluster id shared by questions with equal identity vectors.
inline void export_question_clusters(ParameterStore& params, const ModelConfig& config,
                                     const std::string& path) {
    config.validate();
    NetworkParams net = network_view(params);
    const int n = config.memory.num_slots;
    const int nq = config.memory.num_questions;

    std::vector<std::vector<double>> atts(nq);
    std::vector<IdentityVector> ids(nq);
    std::map<IdentityVector, int> cluster_of;
    for (int q = 1; q <= nq; ++q) {
        Tensor w = attention(embed_question(net.question_embedding, q), net.key_matrix);
        atts[q - 1] = w.data();
        ids[q - 1] = identity_vector(w, config.ranges);
        cluster_of.try_emplace(ids[q - 1], static_cast<int>(cluster_of.size()) + 1);
    }

    std::ofstream out(path, std::ios::trunc);
    if (!out) throw Error("cannot open '" + path + "' for writing");
    out << "question\tcluster\tidentity";
    for (int i = 0; i < n; ++i) out << "\tattention_" << (i + 1);
    out << "\n";
    for (int q = 1; q <= nq; ++q) {
        out << q << "\t" << cluster_of[ids[q - 1]] << "\t";
        for (auto code : ids[q - 1]) out << static_cast<int>(code);
        for (double a : atts[q - 1]) out << "\t" << detail::fmt6(a);
        out << "\n";
    }
}

}  // namespace skvmn
