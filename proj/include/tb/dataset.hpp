#pragma once

#include <cstddef>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "tb/games.hpp"
#include "tb/matrix.hpp"

namespace tb {

enum class Gender { male, female, unspecified };

std::string_view to_string(Gender g) noexcept;
// "male"/"female" (case-insensitive, also "m"/"f"); anything else is unspecified.
Gender parse_gender(std::string_view s) noexcept;

struct Participant {
    std::string id;
    Gender gender = Gender::unspecified;
    int age = 0;
    std::string text_ref;
    std::vector<ActionIndex> choices;  // aligned with Dataset::games
};

struct Dataset {
    std::vector<Participant> participants;
    std::vector<GameSpec> games;
    std::vector<std::string> attribute_names;
    std::optional<Matrix> attributes;  // participants.size() x attribute_names.size(), values in [0, 1]
    std::filesystem::path text_root;   // text_ref values are relative to this directory

    std::size_t size() const noexcept { return participants.size(); }
    // Throws ArgumentError for unknown game names.
    std::size_t game_index(std::string_view name) const;
    // Choice of every participant in game g, in participant order.
    std::vector<ActionIndex> labels(std::size_t g) const;

    // Checks every invariant; throws ValidationError.
    void validate() const;
};

struct LoadOptions {
    bool raw_scale = false;  // attribute file holds 0-5 scores rather than [0, 1]
    std::vector<GameSpec> games = default_games();
};

// participants.csv: id,gender,age,text_file,<game>... ; attributes.csv: id,<attr>...
// Attribute rows are reordered to participant order.
Dataset load_dataset(const std::filesystem::path& participants_path,
                     const std::optional<std::filesystem::path>& attributes_path = std::nullopt,
                     const LoadOptions& options = {});

Dataset parse_dataset(std::string_view participants_csv,
                      std::optional<std::string_view> attributes_csv = std::nullopt,
                      const LoadOptions& options = {});

void write_participants_csv(const Dataset& dataset, const std::filesystem::path& path);
void write_attributes_csv(const std::vector<std::string>& row_ids,
                          const std::vector<std::string>& names,
                          const Matrix& values,
                          const std::filesystem::path& path);

// ---- crowd judgments -------------------------------------------------------

struct ScoreInterval {
    int lo = 0;
    int hi = 5;
};

struct WorkerJudgment {
    std::string worker_id;
    std::string text_id;
    std::string attribute;
    int score = 0;
    bool is_test_question = false;
    std::optional<ScoreInterval> expected_interval;  // present iff is_test_question

    void validate() const;
};

std::vector<WorkerJudgment> load_judgments(const std::filesystem::path& path);
std::vector<WorkerJudgment> parse_judgments(std::string_view csv_text, std::string_view source = "judgments.csv");

struct WorkerStatus {
    std::string worker_id;
    int test_questions = 0;
    int test_passed = 0;
    double success_rate = 0.0;
    bool passed = false;
};

struct WorkerReport {
    std::vector<WorkerStatus> workers;  // sorted by worker id
    std::size_t excluded = 0;
    // Cells whose surviving estimate count is below AggregateOptions::required_estimates.
    std::size_t cells_below_required = 0;

    double excluded_fraction() const noexcept
    {
        return workers.empty() ? 0.0 : static_cast<double>(excluded) / static_cast<double>(workers.size());
    }
};

struct AggregateOptions {
    double pass_threshold = 0.70;
    int required_estimates = 8;
    // Column order of the output; when empty, attributes are sorted.
    std::vector<std::string> attribute_order;
};

struct Aggregation {
    std::vector<std::string> text_ids;  // sorted
    std::vector<std::string> attribute_names;
    Matrix values;  // text x attribute, in [0, 1]
    WorkerReport report;
};

// Quality gate on test questions (inclusive intervals; workers without test
// questions fail), then per-cell mean of surviving non-test scores / 5.
Aggregation aggregate_judgments(const std::vector<WorkerJudgment>& judgments, const AggregateOptions& options = {});

void write_worker_report_csv(const WorkerReport& report, const std::filesystem::path& path);

// ---- summary statistics ----------------------------------------------------

struct AgeStats {
    std::size_t count = 0;
    double mean = 0.0;
    double median = 0.0;
    double stddev = 0.0;  // sample standard deviation
    int min = 0;
    int max = 0;
};

struct GameSummary {
    std::string game;
    std::vector<std::string> actions;
    std::vector<std::size_t> counts;
    std::vector<std::size_t> male_counts;
    std::vector<std::size_t> female_counts;
    std::vector<std::size_t> unspecified_counts;
    std::vector<double> proportions;
};

struct SummaryReport {
    std::size_t participants = 0;
    std::size_t male = 0;
    std::size_t female = 0;
    std::size_t unspecified = 0;
    AgeStats age;
    AgeStats age_male;
    AgeStats age_female;
    std::vector<GameSummary> games;

    // Keys are emitted in sorted order.
    std::string to_json() const;
};

SummaryReport summarize(const Dataset& dataset);

}  // namespace tb
