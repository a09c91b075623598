#pragma once

// End-to-end finite-difference validation of the analytic gradients on a
// seeded toy network, driven by the gradcheck CLI subcommand and the tests.

#include <cmath>
#include <ostream>
#include <string>
#include <vector>

#include "skvmn/model.hpp"
#include "skvmn/train.hpp"

namespace skvmn {

struct GradCheckReport {
    struct Entry {
        std::string name;
        double max_rel_error = 0.0;
    };
    std::vector<Entry> entries;
    double max_rel_error = 0.0;
    std::string worst_param;
    bool passed(double tol) const { return max_rel_error < tol; }
};

inline double gradcheck_loss_value(const ExerciseList& seq, ParameterStore& params,
                                   const ModelConfig& cfg) {
    std::vector<Tensor> probs = forward_sequence(seq, params, cfg);
    std::vector<int> answers;
    for (const auto& ex : seq) answers.push_back(ex.answer);
    return loss(probs, answers).item();
}

// Central finite differences over every parameter component, compared to the
// taped gradient of the same loss. Relative error uses max(|a|,|fd|,1e-8)
// as denominator.
inline GradCheckReport gradcheck(const ExerciseList& seq, ParameterStore& params,
                                 const ModelConfig& cfg, double step = 1e-5) {
    params.zero_grad();
    {
        Tape tape;
        std::vector<Tensor> probs = forward_sequence(seq, params, cfg);
        std::vector<int> answers;
        for (const auto& ex : seq) answers.push_back(ex.answer);
        tape.backward(loss(probs, answers));
    }

    GradCheckReport report;
    for (auto& [name, t] : params.all()) {
        GradCheckReport::Entry entry;
        entry.name = name;
        for (int i = 0; i < t.size(); ++i) {
            const double saved = t.data()[i];
            t.data()[i] = saved + step;
            const double up = gradcheck_loss_value(seq, params, cfg);
            t.data()[i] = saved - step;
            const double down = gradcheck_loss_value(seq, params, cfg);
            t.data()[i] = saved;
            const double fd = (up - down) / (2.0 * step);
            const double analytic = t.grad()[i];
            const double denom = std::max({std::fabs(analytic), std::fabs(fd), 1e-8});
            entry.max_rel_error = std::max(entry.max_rel_error, std::fabs(analytic - fd) / denom);
        }
        if (entry.max_rel_error > report.max_rel_error) {
            report.max_rel_error = entry.max_rel_error;
            report.worst_param = name;
        }
        report.entries.push_back(entry);
    }
    return report;
}

// The toy instance named by the acceptance suite: |Q|=6, N=4, d=5, a length-8
// sequence spanning at least two identity subsequences.
inline ExerciseList gradcheck_toy_sequence() {
    return {{1, 1}, {2, 0}, {1, 1}, {3, 1}, {4, 0}, {2, 1}, {5, 1}, {6, 0}};
}

inline ModelConfig gradcheck_toy_config(ModelMode mode = ModelMode::skvmn) {
    ModelConfig cfg;
    cfg.memory = {6, 4, 5, 5};
    cfg.hidden_dim = 5;
    cfg.mode = mode;
    return cfg;
}

inline GradCheckReport run_gradcheck(std::uint64_t seed, std::ostream* os = nullptr,
                                     double tol = 1e-4) {
    ModelConfig cfg = gradcheck_toy_config();
    // sigma 1.0 keeps every gradient component well above the finite-difference
    // noise floor (~5e-11 absolute for this loss)
    ParameterStore params = init_params(cfg, seed, 1.0);
    ExerciseList seq = gradcheck_toy_sequence();
    GradCheckReport report = gradcheck(seq, params, cfg);
    if (os) {
        for (const auto& e : report.entries)
            *os << e.name << " max_rel_error=" << e.max_rel_error << "\n";
        *os << (report.passed(tol) ? "PASS" : "FAIL") << " worst=" << report.worst_param
            << " max_rel_error=" << report.max_rel_error << " tol=" << tol << "\n";
    }
    return report;
}

}  // namespace skvmn
