#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "tb/classifiers.hpp"
#include "tb/features.hpp"

namespace tb {

struct Dataset;

struct IntRange {
    int lo = 0;
    int hi = 0;

    bool operator==(const IntRange&) const = default;
};

// How a named feature set is built from the data sources.
struct FeatureSetSpec {
    enum class Kind { attributes, external, combined, tfidf };
    std::string name;
    Kind kind = Kind::attributes;
    std::filesystem::path path;       // external feature CSV for external/combined
    std::filesystem::path stopwords;  // optional stop-word file for tfidf
};

struct ExperimentConfig {
    int repetitions = 5000;
    double train_fraction = 0.9;
    IntRange k_range{2, 30};  // TAC cluster counts
    IntRange K_range{1, 5};   // K-NN neighbor counts
    // Any of TAC, KNN, MVC, ERG, EWG.
    std::vector<std::string> classifiers = {"TAC", "KNN", "MVC", "ERG", "EWG"};
    std::vector<std::string> feature_sets = {"ours24"};
    std::vector<std::string> games = {"chicken", "box", "door"};
    std::uint64_t master_seed = 0;
    std::string selection_metric = "MAV-F1";
    MvcScope mvc_scope = MvcScope::whole_data;
    TacOptions tac;

    // Data sources (used by the CLI; run_experiment takes prepared inputs).
    std::filesystem::path participants;
    std::filesystem::path attributes;
    bool raw_scale = false;
    std::filesystem::path games_file;
    std::vector<FeatureSetSpec> feature_set_specs;

    // Throws ConfigError.
    void validate() const;
};

// Relative paths are resolved against base_dir. Missing keys keep defaults.
ExperimentConfig parse_config(std::string_view json_text, const std::filesystem::path& base_dir = {});
ExperimentConfig load_config(const std::filesystem::path& path);
std::string config_to_json(const ExperimentConfig& config);

// Builds every FeatureSetSpec of the config.
std::map<std::string, FeatureMatrix> build_feature_sets(const ExperimentConfig& config, const Dataset& dataset);

// Round half up of (1 - train_fraction) * n.
std::size_t test_size_for(std::size_t n, double train_fraction);

// The test indices repetition r uses; shared by every classifier, game and
// feature set of the run.
std::vector<std::size_t> repetition_test_indices(std::uint64_t master_seed, std::size_t r, std::size_t n, std::size_t test_size);

struct ResultRow {
    std::string classifier;
    std::string feature_set;  // "-" for label-only classifiers
    std::string game;
    int hyperparam = 0;       // k for TAC, K for KNN, 0 otherwise
    std::size_t repetitions = 0;  // 0 for expected-score baselines
    std::vector<std::pair<std::string, double>> metrics;  // mean value per metric

    std::optional<double> metric(std::string_view name) const;
};

struct ResultTable {
    std::vector<ResultRow> rows;

    const ResultRow* find(std::string_view classifier, std::string_view feature_set, std::string_view game, int hyperparam) const;
    bool operator==(const ResultTable& o) const;
};

struct RunStats {
    std::size_t linkage_calls = 0;
    std::map<std::string, std::uint64_t> dendrogram_digests;
    std::size_t test_size = 0;
};

struct ExecutionOptions {
    int threads = 0;  // 0: OpenMP default, 1: serial reference path
};

// Monte Carlo protocol: every repetition samples one split and evaluates every
// configured (classifier, feature set, hyper-parameter, game). Each feature set
// is clustered once. Results do not depend on the thread count.
ResultTable run_experiment(const ExperimentConfig& config,
                           const Dataset& dataset,
                           const std::map<std::string, FeatureMatrix>& features,
                           const ExecutionOptions& execution = {},
                           RunStats* stats = nullptr);

// Plain loop over repetitions; the reference for the parallel path.
ResultTable run_experiment_serial(const ExperimentConfig& config,
                                  const Dataset& dataset,
                                  const std::map<std::string, FeatureMatrix>& features,
                                  RunStats* stats = nullptr);

struct Selection {
    int best_hyperparam = 0;
    const ResultRow* best = nullptr;
    int median_hyperparam = 0;
    const ResultRow* median = nullptr;
};

// Best: highest selection metric, ties to the smaller hyper-parameter.
// Median: lower median of the sorted selection-metric values.
Selection select_best_median(const ResultTable& table,
                             std::string_view classifier,
                             std::string_view feature_set,
                             std::string_view game,
                             std::string_view selection_metric = "MAV-F1");

// results.csv, table2.csv, table3_best.csv, table3_median.csv, curves_<game>.csv.
// Returns the written paths.
std::vector<std::filesystem::path> emit_reports(const ResultTable& table,
                                                const std::filesystem::path& out_dir,
                                                const std::vector<std::string>& games,
                                                std::string_view selection_metric = "MAV-F1");

ResultTable read_results_csv(const std::filesystem::path& path);

// manifest.json: config, seed, build description, SHA-256 of each file.
void write_manifest(const std::filesystem::path& out_dir,
                    const ExperimentConfig& config,
                    const std::vector<std::filesystem::path>& files);

std::string sha256_file(const std::filesystem::path& path);

}  // namespace tb
