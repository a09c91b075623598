#pragma once

// Dataset ingestion and generation. The triplet text format is the de-facto
// knowledge-tracing interchange: per student, line 1 = exercise count,
// line 2 = comma-separated question ids, line 3 = comma-separated 0/1 answers.

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <numeric>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "skvmn/errors.hpp"
#include "skvmn/hoplstm.hpp"

namespace skvmn {

struct ExerciseSequence {
    int student = 0;
    ExerciseList exercises;
};

struct Dataset {
    int num_questions = 0;
    std::vector<ExerciseSequence> sequences;
    // provenance
    std::string source;
    int dropped_sequences = 0;  // sequences shorter than 2 after filtering
    int dropped_exercises = 0;  // exercises with non-binary answers
    // dense id -> original id (1-based dense ids index position+1)
    std::vector<long long> original_ids;
};

namespace detail {

inline std::vector<std::string> split_csv(const std::string& line) {
    std::vector<std::string> out;
    std::string cur;
    std::stringstream ss(line);
    while (std::getline(ss, cur, ',')) out.push_back(cur);
    if (!line.empty() && line.back() == ',') out.push_back("");
    return out;
}

inline long long parse_int(const std::string& tok, int line_no) {
    try {
        std::size_t used = 0;
        const long long v = std::stoll(tok, &used);
        if (used != tok.size()) throw std::invalid_argument(tok);
        return v;
    } catch (const std::exception&) {
        throw ParseError("line " + std::to_string(line_no) + ": non-integer token '" + tok + "'");
    }
}

inline std::string trim_cr(std::string s) {
    while (!s.empty() && (s.back() == '\r' || s.back() == ' ' || s.back() == '\t')) s.pop_back();
    return s;
}

}  // namespace detail

// Parses the triplet format. Question ids are remapped to a dense 1..|Q|
// space (mapping kept in Dataset::original_ids). Sequences shorter than 2
// after filtering are dropped; exercises with answers outside {0,1} are
// dropped. Both are counted in the provenance fields.
inline Dataset load_triplet_format(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ParseError("cannot open '" + path + "'");
    Dataset ds;
    ds.source = path;

    std::vector<std::string> lines;
    std::string line;
    while (std::getline(in, line)) lines.push_back(detail::trim_cr(line));
    while (!lines.empty() && lines.back().empty()) lines.pop_back();

    std::map<long long, int> remap;
    int student = 0;
    for (std::size_t i = 0; i < lines.size(); i += 3) {
        const int line_no = static_cast<int>(i) + 1;
        if (i + 2 >= lines.size())
            throw ParseError("line " + std::to_string(line_no) +
                             ": incomplete student record (need 3 lines)");
        const long long count = detail::parse_int(lines[i], line_no);
        auto qtoks = detail::split_csv(lines[i + 1]);
        auto atoks = detail::split_csv(lines[i + 2]);
        if (static_cast<long long>(qtoks.size()) != count ||
            static_cast<long long>(atoks.size()) != count)
            throw ParseError("line " + std::to_string(line_no) + ": declared count " +
                             std::to_string(count) + " but found " +
                             std::to_string(qtoks.size()) + " questions / " +
                             std::to_string(atoks.size()) + " answers");
        ExerciseSequence seq;
        seq.student = ++student;
        for (long long k = 0; k < count; ++k) {
            const long long q = detail::parse_int(qtoks[k], line_no + 1);
            const long long a = detail::parse_int(atoks[k], line_no + 2);
            if (a != 0 && a != 1) {
                ++ds.dropped_exercises;
                continue;
            }
            auto [it, inserted] = remap.try_emplace(q, static_cast<int>(remap.size()) + 1);
            if (inserted) ds.original_ids.push_back(q);
            seq.exercises.push_back({it->second, static_cast<int>(a)});
        }
        if (seq.exercises.size() < 2) {
            ++ds.dropped_sequences;
            continue;
        }
        ds.sequences.push_back(std::move(seq));
    }
    ds.num_questions = static_cast<int>(remap.size());
    return ds;
}

inline void save_triplet_format(const Dataset& ds, const std::string& path) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw ParseError("cannot open '" + path + "' for writing");
    for (const auto& seq : ds.sequences) {
        out << seq.exercises.size() << "\n";
        for (std::size_t i = 0; i < seq.exercises.size(); ++i)
            out << seq.exercises[i].question << (i + 1 < seq.exercises.size() ? "," : "\n");
        for (std::size_t i = 0; i < seq.exercises.size(); ++i)
            out << seq.exercises[i].answer << (i + 1 < seq.exercises.size() ? "," : "\n");
    }
}

// Deterministic by-student split; ratio honored within one student.
inline std::pair<Dataset, Dataset> split_train_test(const Dataset& ds, double ratio,
                                                    std::uint64_t seed) {
    if (ds.sequences.size() < 2) throw InputError("split requires at least 2 students");
    std::vector<std::size_t> idx(ds.sequences.size());
    std::iota(idx.begin(), idx.end(), 0);
    std::mt19937_64 rng(seed);
    std::shuffle(idx.begin(), idx.end(), rng);
    const std::size_t n_train =
        static_cast<std::size_t>(std::llround(ratio * static_cast<double>(idx.size())));
    Dataset train = ds, test = ds;
    train.sequences.clear();
    test.sequences.clear();
    for (std::size_t i = 0; i < idx.size(); ++i)
        (i < n_train ? train : test).sequences.push_back(ds.sequences[idx[i]]);
    return {std::move(train), std::move(test)};
}

// Seeded synthetic generator (test plumbing). Each question belongs to one
// latent concept; a student's per-concept mastery is a logistic function of
// their practice count on that concept, and answers are Bernoulli(mastery).
inline Dataset generate_synthetic(int num_students, int num_questions, int num_concepts,
                                  std::uint64_t seed, int seq_len = 50) {
    if (num_students <= 0 || num_questions <= 0 || num_concepts <= 0 || seq_len <= 0)
        throw InputError("generate_synthetic: all counts must be positive");
    std::mt19937_64 rng(seed);
    std::vector<int> concept_of(num_questions);
    for (int q = 0; q < num_questions; ++q) concept_of[q] = q % num_concepts;

    std::uniform_int_distribution<int> qdist(1, num_questions);
    std::normal_distribution<double> ability_dist(-0.5, 1.0);
    std::uniform_real_distribution<double> unit(0.0, 1.0);

    Dataset ds;
    ds.num_questions = num_questions;
    ds.source = "synthetic(seed=" + std::to_string(seed) + ")";
    for (int q = 1; q <= num_questions; ++q) ds.original_ids.push_back(q);
    for (int s = 0; s < num_students; ++s) {
        std::vector<double> ability(num_concepts);
        for (auto& a : ability) a = ability_dist(rng);
        std::vector<int> practice(num_concepts, 0);
        ExerciseSequence seq;
        seq.student = s + 1;
        for (int t = 0; t < seq_len; ++t) {
            const int q = qdist(rng);
            const int c = concept_of[q - 1];
            const double mastery = 1.0 / (1.0 + std::exp(-(ability[c] + 0.35 * practice[c])));
            const int y = unit(rng) < mastery ? 1 : 0;
            ++practice[c];
            seq.exercises.push_back({q, y});
        }
        ds.sequences.push_back(std::move(seq));
    }
    return ds;
}

struct DatasetStats {
    int num_questions = 0;
    int num_students = 0;
    long long num_exercises = 0;
    double exercises_per_student = 0.0;

    nlohmann::json to_json() const {
        return {{"questions", num_questions},
                {"students", num_students},
                {"exercises", num_exercises},
                {"exercises_per_student", exercises_per_student}};
    }
};

inline DatasetStats dataset_stats(const Dataset& ds) {
    DatasetStats st;
    st.num_questions = ds.num_questions;
    st.num_students = static_cast<int>(ds.sequences.size());
    for (const auto& seq : ds.sequences)
        st.num_exercises += static_cast<long long>(seq.exercises.size());
    st.exercises_per_student =
        st.num_students == 0 ? 0.0
                             : static_cast<double>(st.num_exercises) / st.num_students;
    return st;
}

}  // namespace skvmn
