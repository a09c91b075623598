// Command-line entry point: train / evaluate / predict / gradcheck.

#include <chrono>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "skvmn/checkpoint.hpp"
#include "skvmn/data.hpp"
#include "skvmn/gradcheck.hpp"
#include "skvmn/metrics.hpp"
#include "skvmn/model.hpp"
#include "skvmn/train.hpp"

namespace {

constexpr const char* kVersion = "1.0.0";

std::string timestamp_now() {
    const auto now = std::chrono::system_clock::now();
    const std::time_t tt = std::chrono::system_clock::to_time_t(now);
    std::tm tm{};
    gmtime_r(&tt, &tm);
    std::ostringstream ss;
    ss << std::put_time(&tm, "%Y%m%dT%H%M%SZ");
    return ss.str();
}

struct CommonModelFlags {
    int num_slots = 10;
    int dim = 10;
    int hidden_dim = 0;
    int max_seq_len = 200;
    std::string mode = "skvmn";
    std::vector<double> tri_low{-0.5, 0.0, 0.5};
    std::vector<double> tri_mid{0.0, 0.5, 1.0};
    std::vector<double> tri_high{0.5, 1.0, 1.5};

    void attach(CLI::App* cmd) {
        cmd->add_option("--n", num_slots, "Number of memory slots N")->envname("SKVMN_N");
        cmd->add_option("--dim", dim, "State dimension d (= d_k = d_v)")->envname("SKVMN_DIM");
        cmd->add_option("--hidden-dim", hidden_dim, "LSTM hidden size (default: --dim)");
        cmd->add_option("--max-seq-len", max_seq_len, "Segment sequences longer than this");
        cmd->add_option("--mode", mode, "Model mode: skvmn or dkvmn")->envname("SKVMN_MODE");
        cmd->add_option("--tri-low", tri_low, "Low range triple a b c")->expected(3);
        cmd->add_option("--tri-mid", tri_mid, "Medium range triple a b c")->expected(3);
        cmd->add_option("--tri-high", tri_high, "High range triple a b c")->expected(3);
    }

    skvmn::ModelConfig resolve(int num_questions) const {
        skvmn::ModelConfig cfg;
        cfg.memory = {num_questions, num_slots, dim, dim};
        cfg.hidden_dim = hidden_dim;
        cfg.mode = skvmn::mode_from_string(mode);
        cfg.max_seq_len = max_seq_len;
        cfg.ranges.low = {tri_low[0], tri_low[1], tri_low[2]};
        cfg.ranges.medium = {tri_mid[0], tri_mid[1], tri_mid[2]};
        cfg.ranges.high = {tri_high[0], tri_high[1], tri_high[2]};
        cfg.validate();
        return cfg;
    }
};

// Lenient triplet fragment for `predict`: ids used as-is, no remapping;
// an empty file (or count 0) means an empty history.
skvmn::ExerciseList load_history_fragment(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw skvmn::ParseError("cannot open '" + path + "'");
    std::vector<std::string> lines;
    std::string line;
    while (std::getline(in, line)) lines.push_back(skvmn::detail::trim_cr(line));
    while (!lines.empty() && lines.back().empty()) lines.pop_back();
    if (lines.empty()) return {};
    const long long count = skvmn::detail::parse_int(lines[0], 1);
    if (count == 0) return {};
    if (lines.size() < 3) throw skvmn::ParseError("history fragment needs 3 lines");
    auto qtoks = skvmn::detail::split_csv(lines[1]);
    auto atoks = skvmn::detail::split_csv(lines[2]);
    if (static_cast<long long>(qtoks.size()) != count ||
        static_cast<long long>(atoks.size()) != count)
        throw skvmn::ParseError("history fragment count mismatch");
    skvmn::ExerciseList out;
    for (long long i = 0; i < count; ++i) {
        const int q = static_cast<int>(skvmn::detail::parse_int(qtoks[i], 2));
        const int a = static_cast<int>(skvmn::detail::parse_int(atoks[i], 3));
        if (a != 0 && a != 1) throw skvmn::InputError("history answers must be 0/1");
        out.push_back({q, a});
    }
    return out;
}

nlohmann::json train_config_json(const skvmn::TrainConfig& t) {
    return {{"batch_size", t.batch_size}, {"epochs", t.epochs},
            {"lr", t.lr},                 {"lr_floor", t.lr_floor},
            {"anneal_period", t.anneal_period}, {"clip_norm", t.clip_norm},
            {"folds", t.folds},           {"seed", t.seed}};
}

int cmd_train(const CommonModelFlags& mf, const skvmn::TrainConfig& tcfg_in,
              const std::string& data_path, const std::string& out_dir_in, double val_ratio,
              bool use_kfold, double sigma) {
    skvmn::TrainConfig tcfg = tcfg_in;
    tcfg.validate();
    const std::string start_ts = timestamp_now();
    std::string out_dir = out_dir_in;
    if (out_dir.empty()) out_dir = "runs/" + start_ts + "-seed" + std::to_string(tcfg.seed);
    std::filesystem::create_directories(out_dir);

    skvmn::Dataset ds = skvmn::load_triplet_format(data_path);
    if (ds.sequences.empty()) throw skvmn::InputError("dataset is empty after filtering");
    skvmn::ModelConfig cfg = mf.resolve(ds.num_questions);
    std::cerr << "loaded " << ds.sequences.size() << " students, |Q|=" << ds.num_questions
              << " (dropped " << ds.dropped_sequences << " short sequences, "
              << ds.dropped_exercises << " bad exercises)\n";

    // persist the dense-id mapping next to the checkpoint
    {
        std::ofstream qmap(out_dir + "/qmap.tsv", std::ios::trunc);
        qmap << "dense_id\toriginal_id\n";
        for (std::size_t i = 0; i < ds.original_ids.size(); ++i)
            qmap << (i + 1) << "\t" << ds.original_ids[i] << "\n";
    }

    std::vector<skvmn::ExerciseList> all;
    for (auto& s : ds.sequences) all.push_back(s.exercises);

    std::ofstream log(out_dir + "/train.log", std::ios::trunc);
    skvmn::TrainResult best;
    double mean_val_auc = 0.0;
    if (use_kfold) {
        auto folds = skvmn::kfold_split(all.size(), tcfg.folds, tcfg.seed);
        int fold_no = 0;
        for (auto& [train_idx, val_idx] : folds) {
            std::vector<skvmn::ExerciseList> tr, va;
            for (auto i : train_idx) tr.push_back(all[i]);
            for (auto i : val_idx) va.push_back(all[i]);
            skvmn::TrainResult r = skvmn::train_model(tr, va, cfg, tcfg, &log);
            std::cerr << "fold " << fold_no << ": best val AUC " << r.best_val_auc << " at epoch "
                      << r.best_epoch << "\n";
            mean_val_auc += r.best_val_auc / folds.size();
            if (fold_no == 0 || r.best_val_auc > best.best_val_auc) best = std::move(r);
            ++fold_no;
        }
    } else {
        const std::size_t n_val =
            std::max<std::size_t>(1, static_cast<std::size_t>(val_ratio * all.size()));
        std::vector<std::size_t> idx(all.size());
        std::iota(idx.begin(), idx.end(), 0);
        std::mt19937_64 rng(tcfg.seed);
        std::shuffle(idx.begin(), idx.end(), rng);
        std::vector<skvmn::ExerciseList> tr, va;
        for (std::size_t i = 0; i < idx.size(); ++i)
            (i < n_val ? va : tr).push_back(all[idx[i]]);
        best = skvmn::train_model(tr, va, cfg, tcfg, &log);
        mean_val_auc = best.best_val_auc;
    }

    const std::string ckpt_path = out_dir + "/checkpoint.skvmn";
    skvmn::save_checkpoint(ckpt_path, best.best_params, cfg);

    nlohmann::json manifest = {{"command", "train"},
                               {"version", kVersion},
                               {"data", data_path},
                               {"model", cfg.to_json()},
                               {"train", train_config_json(tcfg)},
                               {"sigma", sigma},
                               {"kfold", use_kfold},
                               {"val_ratio", val_ratio},
                               {"start", start_ts},
                               {"end", timestamp_now()},
                               {"best_val_auc", best.best_val_auc},
                               {"best_epoch", best.best_epoch},
                               {"mean_val_auc", mean_val_auc},
                               {"outputs",
                                {{"checkpoint", ckpt_path},
                                 {"log", out_dir + "/train.log"},
                                 {"qmap", out_dir + "/qmap.tsv"}}}};
    std::ofstream(out_dir + "/manifest.json") << manifest.dump(2) << "\n";
    std::cout << "best_val_auc=" << skvmn::detail::fmt6(best.best_val_auc)
              << " checkpoint=" << ckpt_path << "\n";
    return 0;
}

int cmd_evaluate(const std::string& ckpt_path, const std::string& data_path,
                 const std::string& roc_path, const std::string& states_path,
                 const std::string& clusters_path, int states_student) {
    auto [params, cfg] = skvmn::load_checkpoint(ckpt_path);
    skvmn::Dataset ds = skvmn::load_triplet_format(data_path);
    if (ds.num_questions > cfg.memory.num_questions)
        throw skvmn::InputError("dataset has " + std::to_string(ds.num_questions) +
                                " questions but checkpoint was trained with |Q|=" +
                                std::to_string(cfg.memory.num_questions));

    std::vector<double> scores;
    std::vector<int> labels;
    double total_loss = 0.0;
    long long total = 0;
    for (auto& seq : ds.sequences) {
        std::vector<skvmn::Tensor> probs = skvmn::forward_sequence(seq.exercises, params, cfg);
        for (std::size_t t = 0; t < seq.exercises.size(); ++t) {
            const double p = probs[t].item();
            const int y = seq.exercises[t].answer;
            scores.push_back(p);
            labels.push_back(y);
            total_loss += -(y * std::log(p) + (1 - y) * std::log(1.0 - p));
            ++total;
        }
    }
    const double test_auc = skvmn::auc(scores, labels);
    std::cout << "auc=" << skvmn::detail::fmt6(test_auc)
              << " loss=" << skvmn::detail::fmt6(total_loss / total) << " n=" << total << "\n";

    if (!roc_path.empty()) {
        skvmn::RocCurve curve = skvmn::roc_curve(scores, labels);
        std::ofstream out(roc_path, std::ios::trunc);
        out << "fpr\ttpr\n";
        for (auto& [fpr, tpr] : curve.points)
            out << skvmn::detail::fmt6(fpr) << "\t" << skvmn::detail::fmt6(tpr) << "\n";
    }
    if (!states_path.empty()) {
        if (states_student < 1 || states_student > static_cast<int>(ds.sequences.size()))
            throw skvmn::InputError("--states-student out of range");
        skvmn::export_knowledge_states(params, cfg, ds.sequences[states_student - 1].exercises,
                                       states_path);
    }
    if (!clusters_path.empty()) skvmn::export_question_clusters(params, cfg, clusters_path);
    return 0;
}

int cmd_predict(const std::string& ckpt_path, const std::string& history_path, int question) {
    auto [params, cfg] = skvmn::load_checkpoint(ckpt_path);
    skvmn::ExerciseList history;
    if (!history_path.empty()) history = load_history_fragment(history_path);
    if (question < 1 || question > cfg.memory.num_questions)
        throw skvmn::InputError("question id " + std::to_string(question) + " outside [1," +
                                std::to_string(cfg.memory.num_questions) + "]");
    for (auto& ex : history)
        if (ex.question < 1 || ex.question > cfg.memory.num_questions)
            throw skvmn::InputError("history question id " + std::to_string(ex.question) +
                                    " outside [1," + std::to_string(cfg.memory.num_questions) +
                                    "]");
    // the probe answer is never read: p_t precedes the write
    history.push_back({question, 0});
    std::vector<skvmn::Tensor> probs = skvmn::forward_sequence(history, params, cfg);
    std::cout << skvmn::detail::fmt6(probs.back().item()) << "\n";
    return 0;
}

int cmd_gradcheck(std::uint64_t seed, double tol) {
    skvmn::GradCheckReport report = skvmn::run_gradcheck(seed, &std::cout, tol);
    return report.passed(tol) ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Sequential key-value memory network for knowledge tracing"};
    app.require_subcommand(1);

    // train
    auto* train = app.add_subcommand("train", "Train a model on a triplet-format dataset");
    CommonModelFlags train_mf;
    train_mf.attach(train);
    skvmn::TrainConfig tcfg;
    std::string train_data, train_out;
    double val_ratio = 0.2, sigma = 0.1;
    bool use_kfold = false;
    train->add_option("--data", train_data, "Dataset path (triplet format)")
        ->required()
        ->envname("SKVMN_DATA");
    train->add_option("--out", train_out, "Output directory (default runs/<ts>-seed<seed>)");
    train->add_option("--batch", tcfg.batch_size, "Mini-batch size");
    train->add_option("--epochs", tcfg.epochs, "Training epochs");
    train->add_option("--lr", tcfg.lr, "Initial learning rate");
    train->add_option("--lr-floor", tcfg.lr_floor, "Annealing floor");
    train->add_option("--clip", tcfg.clip_norm, "Global gradient-norm clip");
    train->add_option("--seed", tcfg.seed, "RNG seed")->envname("SKVMN_SEED");
    train->add_option("--sigma", sigma, "Gaussian init std for memory/embeddings");
    train->add_option("--val-ratio", val_ratio, "Validation share of the training data");
    train->add_option("--folds", tcfg.folds, "Folds for --kfold");
    train->add_flag("--kfold", use_kfold, "Run k-fold cross validation");

    // evaluate
    auto* evaluate = app.add_subcommand("evaluate", "Evaluate a checkpoint on a dataset");
    std::string eval_ckpt, eval_data, roc_path, states_path, clusters_path;
    int states_student = 1;
    evaluate->add_option("--checkpoint", eval_ckpt, "Checkpoint path")->required();
    evaluate->add_option("--data", eval_data, "Dataset path")->required();
    evaluate->add_option("--roc", roc_path, "Write ROC points (TSV)");
    evaluate->add_option("--export-states", states_path, "Write knowledge-state matrix (TSV)");
    evaluate->add_option("--states-student", states_student,
                         "1-based student index for --export-states");
    evaluate->add_option("--export-clusters", clusters_path, "Write question clusters (TSV)");

    // predict
    auto* predict = app.add_subcommand("predict", "Predict one question after a history");
    std::string pred_ckpt, pred_history;
    int pred_question = 0;
    predict->add_option("--checkpoint", pred_ckpt, "Checkpoint path")->required();
    predict->add_option("--history", pred_history, "Triplet-format history fragment");
    predict->add_option("--question", pred_question, "Target question id")->required();

    // gradcheck
    auto* gradcheck = app.add_subcommand("gradcheck", "Finite-difference gradient validation");
    std::uint64_t gc_seed = 7;
    double gc_tol = 1e-4;
    gradcheck->add_option("--seed", gc_seed, "RNG seed");
    gradcheck->add_option("--tol", gc_tol, "Max relative error tolerance");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        std::cerr << e.what() << "\n";
        std::cerr << app.help() << "\n";
        return 2;
    }

    try {
        if (train->parsed())
            return cmd_train(train_mf, tcfg, train_data, train_out, val_ratio, use_kfold, sigma);
        if (evaluate->parsed())
            return cmd_evaluate(eval_ckpt, eval_data, roc_path, states_path, clusters_path,
                                states_student);
        if (predict->parsed()) return cmd_predict(pred_ckpt, pred_history, pred_question);
        if (gradcheck->parsed()) return cmd_gradcheck(gc_seed, gc_tol);
    } catch (const skvmn::Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 2;
}
