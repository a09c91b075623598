#include <catch2/catch_amalgamated.hpp>

#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

#include "oracles.hpp"
#include "skvmn/metrics.hpp"

using namespace skvmn;

TEST_CASE("auc on perfectly separated and reversed scores") {
    CHECK(auc({0.1, 0.2, 0.8, 0.9}, {0, 0, 1, 1}) == 1.0);
    CHECK(auc({0.9, 0.8, 0.2, 0.1}, {0, 0, 1, 1}) == 0.0);
    CHECK(auc({0.5, 0.5}, {0, 1}) == 0.5);  // all tied
}

TEST_CASE("auc hand example") {
    CHECK_THAT(auc({0.1, 0.4, 0.35, 0.8}, {0, 0, 1, 1}),
               Catch::Matchers::WithinAbs(0.75, 1e-12));
}

TEST_CASE("auc input validation") {
    CHECK_THROWS_AS(auc({0.1, 0.2}, {1}), ContractError);
    CHECK_THROWS_AS(auc({0.1, 0.2}, {1, 1}), MetricError);
    CHECK_THROWS_AS(auc({0.1, 0.2}, {0, 0}), MetricError);
}

TEST_CASE("auc matches the exhaustive pairwise oracle") {
    std::mt19937_64 rng(31);
    std::uniform_real_distribution<double> sdist(0.0, 1.0);
    std::uniform_int_distribution<int> ydist(0, 1);
    std::uniform_int_distribution<int> ndist(4, 40);
    std::uniform_int_distribution<int> grid(0, 9);
    for (int rep = 0; rep < 300; ++rep) {
        const int n = ndist(rng);
        std::vector<double> s(n);
        std::vector<int> y(n);
        bool both = false;
        for (int i = 0; i < n; ++i) {
            // coarse grid on odd reps to force score ties
            s[i] = rep % 2 ? grid(rng) / 10.0 : sdist(rng);
            y[i] = ydist(rng);
        }
        y[0] = 0;
        y[1] = 1;
        CHECK_THAT(auc(s, y), Catch::Matchers::WithinAbs(oracle::pairwise_auc(s, y), 1e-12));
        (void)both;
    }
}

TEST_CASE("auc is invariant under strictly increasing transforms") {
    std::vector<double> s = {0.05, 0.3, 0.31, 0.5, 0.77, 0.9};
    std::vector<int> y = {0, 1, 0, 1, 0, 1};
    std::vector<double> t;
    for (double v : s) t.push_back(std::exp(3.0 * v) - 1.0);
    CHECK(auc(s, y) == auc(t, y));
}

TEST_CASE("complementing the labels reflects the auc") {
    std::mt19937_64 rng(17);
    std::uniform_real_distribution<double> sdist(0.0, 1.0);
    std::vector<double> s(30);
    std::vector<int> y(30), yc(30);
    for (int i = 0; i < 30; ++i) {
        s[i] = sdist(rng);
        y[i] = i % 3 == 0 ? 1 : 0;
        yc[i] = 1 - y[i];
    }
    CHECK_THAT(auc(s, y) + auc(s, yc), Catch::Matchers::WithinAbs(1.0, 1e-12));
}

TEST_CASE("roc curve endpoints, monotonicity, and area agreement") {
    std::mt19937_64 rng(23);
    std::uniform_real_distribution<double> sdist(0.0, 1.0);
    std::vector<double> s(50);
    std::vector<int> y(50);
    for (int i = 0; i < 50; ++i) {
        s[i] = std::round(sdist(rng) * 20.0) / 20.0;  // induce ties
        y[i] = sdist(rng) < 0.4 ? 1 : 0;
    }
    y[0] = 0;
    y[1] = 1;
    RocCurve curve = roc_curve(s, y);
    CHECK(curve.points.front() == std::make_pair(0.0, 0.0));
    CHECK(curve.points.back() == std::make_pair(1.0, 1.0));
    double area = 0.0;
    for (std::size_t i = 1; i < curve.points.size(); ++i) {
        CHECK(curve.points[i].first >= curve.points[i - 1].first);
        CHECK(curve.points[i].second >= curve.points[i - 1].second);
        area += (curve.points[i].first - curve.points[i - 1].first) *
                (curve.points[i].second + curve.points[i - 1].second) / 2.0;
    }
    CHECK_THAT(area, Catch::Matchers::WithinAbs(curve.auc, 1e-12));
    CHECK_THAT(curve.auc, Catch::Matchers::WithinAbs(auc(s, y), 1e-15));
}

namespace {

ModelConfig probe_config() {
    ModelConfig cfg;
    cfg.memory = {6, 4, 5, 5};
    return cfg;
}

std::vector<std::vector<std::string>> read_tsv(const std::string& path) {
    std::ifstream in(path);
    REQUIRE(in.good());
    std::vector<std::vector<std::string>> rows;
    std::string line;
    while (std::getline(in, line)) {
        std::vector<std::string> cells;
        std::stringstream ss(line);
        std::string cell;
        while (std::getline(ss, cell, '\t')) cells.push_back(cell);
        rows.push_back(cells);
    }
    return rows;
}

}  // namespace

TEST_CASE("knowledge-state export shape and header") {
    ModelConfig cfg = probe_config();
    ParameterStore p = init_params(cfg, 4, 0.1);
    const auto path = (std::filesystem::temp_directory_path() / "skvmn_states.tsv").string();
    ExerciseList seq = {{1, 1}, {2, 0}, {3, 1}};
    export_knowledge_states(p, cfg, seq, path);
    auto rows = read_tsv(path);
    REQUIRE(rows.size() == 4);  // header + 3 steps
    REQUIRE(rows[0].size() == 3 + 4);
    CHECK(rows[0][0] == "step");
    CHECK(rows[0][3] == "concept_1");
    for (int t = 1; t <= 3; ++t) {
        CHECK(rows[t][0] == std::to_string(t));
        CHECK(rows[t][1] == std::to_string(seq[t - 1].question));
        for (int i = 3; i < 7; ++i) {
            const double v = std::stod(rows[t][i]);
            CHECK(v > 0.0);
            CHECK(v < 1.0);
        }
    }
    std::filesystem::remove(path);
}

TEST_CASE("zeroed parameters probe to a constant half matrix") {
    ModelConfig cfg = probe_config();
    ParameterStore p = init_params(cfg, 4, 0.1);
    for (auto& [name, t] : p.all())
        for (int i = 0; i < t.size(); ++i) t.data()[i] = 0.0;
    const auto path = (std::filesystem::temp_directory_path() / "skvmn_states0.tsv").string();
    export_knowledge_states(p, cfg, {{1, 1}, {2, 0}}, path);
    auto rows = read_tsv(path);
    for (std::size_t t = 1; t < rows.size(); ++t)
        for (std::size_t i = 3; i < rows[t].size(); ++i) CHECK(rows[t][i] == "0.500000");
    std::filesystem::remove(path);
}

TEST_CASE("knowledge-state export requires matching dims") {
    ModelConfig cfg = probe_config();
    cfg.hidden_dim = 7;
    ParameterStore p = init_params(cfg, 4, 0.1);
    CHECK_THROWS_AS(export_knowledge_states(p, cfg, {{1, 1}}, "/tmp/skvmn_states_bad.tsv"),
                    ConfigError);
}

TEST_CASE("question clusters group equal identity vectors") {
    ModelConfig cfg = probe_config();
    ParameterStore p = init_params(cfg, 8, 0.1);
    const auto path = (std::filesystem::temp_directory_path() / "skvmn_clusters.tsv").string();
    export_question_clusters(p, cfg, path);
    auto rows = read_tsv(path);
    REQUIRE(rows.size() == 1 + 6);
    CHECK(rows[0][0] == "question");

    NetworkParams net = network_view(p);
    std::map<std::string, int> first_cluster;
    int max_cluster = 0;
    for (int q = 1; q <= 6; ++q) {
        const auto& row = rows[q];
        CHECK(row[0] == std::to_string(q));
        const int cluster = std::stoi(row[1]);
        max_cluster = std::max(max_cluster, cluster);
        // identity column matches a recomputation from the parameters
        Tensor w = attention(embed_question(net.question_embedding, q), net.key_matrix);
        IdentityVector id = identity_vector(w, cfg.ranges);
        std::string codes;
        for (auto c : id) codes += static_cast<char>('0' + c);
        CHECK(row[2] == codes);
        auto [it, inserted] = first_cluster.try_emplace(codes, cluster);
        CHECK(it->second == cluster);  // same identity -> same cluster id
        // attention columns match to the printed precision
        for (int i = 0; i < 4; ++i)
            CHECK_THAT(std::stod(row[3 + i]),
                       Catch::Matchers::WithinAbs(w.data()[i], 5e-7));
    }
    CHECK(max_cluster == static_cast<int>(first_cluster.size()));  // ids are dense
    std::filesystem::remove(path);
}
