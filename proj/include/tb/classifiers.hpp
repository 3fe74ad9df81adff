#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "tb/games.hpp"
#include "tb/matrix.hpp"
#include "tb/metrics.hpp"
#include "tb/rng.hpp"

namespace tb {

struct ClusterAssignment;
struct Dataset;

// Participants are referred to by their index in the dataset.
class LabeledSplit {
public:
    // test must be a nonempty proper subset of 0..labels.size()-1 without
    // duplicates; throws ArgumentError otherwise.
    LabeledSplit(std::vector<ActionIndex> labels, std::vector<std::size_t> test);

    std::size_t size() const noexcept { return labels_.size(); }
    const std::vector<std::size_t>& train() const noexcept { return train_; }
    const std::vector<std::size_t>& test() const noexcept { return test_; }
    bool is_train(std::size_t i) const noexcept { return is_train_[i]; }

    // Only train labels are readable through the classifier-facing accessor.
    ActionIndex train_label(std::size_t i) const;
    // Ground truth for scoring.
    ActionIndex actual(std::size_t i) const noexcept { return labels_[i]; }

    // Same partition, labels of another game.
    LabeledSplit relabeled(std::vector<ActionIndex> labels) const;

private:
    std::vector<ActionIndex> labels_;
    std::vector<std::size_t> train_;
    std::vector<std::size_t> test_;  // ascending
    std::vector<bool> is_train_;
};

// Uniformly random test subset of the given size, returned ascending.
std::vector<std::size_t> sample_test_indices(std::size_t n, std::size_t test_size, Rng& rng);

struct Prediction {
    std::string classifier;
    int hyperparam = 0;
    std::uint64_t seed = 0;
    std::vector<std::size_t> participants;  // the split's test indices
    std::vector<ActionIndex> predicted;
};

// Confusion matrix of a prediction against the split's ground truth.
ConfusionMatrix score(const Prediction& prediction, const LabeledSplit& split, std::size_t action_count);

// ---- TAC -------------------------------------------------------------------

struct TacOptions {
    // Random fallback draws among the tied labels instead of the full action set.
    bool tie_over_tied_labels = false;
    // One random draw shared by every test member of a cluster instead of one per member.
    bool draw_per_cluster = false;
};

// Majority vote over the train members of each test participant's cluster;
// ties and clusters without train members fall back to a random action.
Prediction tac_predict(const ClusterAssignment& assignment,
                       const LabeledSplit& split,
                       std::size_t action_count,
                       Rng& rng,
                       const TacOptions& options = {});

// ---- K-NN ------------------------------------------------------------------

// For each test participant (split order), the k_max nearest train
// participants ordered by distance, ties by participant index.
std::vector<std::vector<std::size_t>> nearest_train_neighbors(const Matrix& sq_dist,
                                                              const LabeledSplit& split,
                                                              std::size_t k_max);

// Vote over the first K entries of precomputed neighbor lists; label ties are
// broken uniformly among the tied labels.
Prediction knn_vote(const std::vector<std::vector<std::size_t>>& neighbors,
                    const LabeledSplit& split,
                    std::size_t action_count,
                    std::size_t K,
                    Rng& rng);

// sq_dist is the pairwise squared Euclidean distance matrix. Requires 1 <= K <= |train|.
Prediction knn_predict(const Matrix& sq_dist, const LabeledSplit& split, std::size_t action_count, std::size_t K, Rng& rng);

// ---- majority --------------------------------------------------------------

enum class MvcScope { whole_data, train_only };

// Most frequent label over the scope, ties to the earlier action.
ActionIndex majority_label(std::span<const ActionIndex> labels, std::size_t action_count);

Prediction mvc_predict(const LabeledSplit& split, std::size_t action_count, MvcScope scope = MvcScope::whole_data);

// ---- expected scores of random guessers ------------------------------------

enum class RandomGuess {
    uniform,   // ERG: every action with probability 1/|Y|
    weighted,  // EWG: every action with its data-set frequency
};

struct MetricId {
    enum class Kind { accuracy, mav_f1, mwav_f1, precision, recall, f1 };
    Kind kind = Kind::mav_f1;
    std::size_t action = 0;  // for per-class kinds

    bool operator==(const MetricId&) const = default;
};

// "Accuracy", "MAV-F1", "MWAV-F1", "F1-<action>", "Precision-<action>",
// "Recall-<action>". Throws ArgumentError for anything else.
MetricId parse_metric(std::string_view name, const GameSpec& game);
std::string metric_name(const MetricId& metric, const GameSpec& game);

struct ScoreTable {
    std::vector<ClassScores> per_class;
    SummaryScores summary;

    // Throws ArgumentError when the metric refers to a missing class.
    double value(const MetricId& metric) const;
};

// Proportions must be nonnegative and sum to 1 within 1e-9.
std::vector<double> proportions_from_counts(std::span<const long> counts);

// Ratio-of-expectations closed forms.
ScoreTable expected_scores_plug_in(std::span<const double> class_props, RandomGuess mode);

struct MonteCarloSpec {
    std::size_t trials = 100000;
    std::size_t test_size = 27;
    std::uint64_t seed = 0;
};

// Average of the actual metrics over simulated test sets whose true labels are
// drawn from class_props and whose predictions come from the random guesser.
ScoreTable expected_scores_monte_carlo(std::span<const double> class_props, RandomGuess mode, const MonteCarloSpec& spec);

double expected_random_score(std::span<const double> class_props,
                             RandomGuess mode,
                             const MetricId& metric,
                             const std::optional<MonteCarloSpec>& monte_carlo = std::nullopt);

// participant_id,game,classifier,hyperparam,seed,predicted,actual
void write_predictions_csv(const std::vector<Prediction>& predictions,
                           const LabeledSplit& split,
                           const Dataset& dataset,
                           const GameSpec& game,
                           const std::filesystem::path& path);

}  // namespace tb
