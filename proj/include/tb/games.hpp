#pragma once

#include <cstddef>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "tb/rng.hpp"

namespace tb {

struct Dataset;

// Actions are referred to by their position in GameSpec::actions.
using ActionIndex = int;

struct Payoff {
    int row = 0;
    int col = 0;
    bool operator==(const Payoff&) const = default;
};

// Two-player normal-form game over a shared action set.
struct GameSpec {
    std::string name;
    std::vector<std::string> actions;
    std::vector<std::vector<Payoff>> payoff;  // payoff[row_action][col_action]

    std::size_t action_count() const noexcept { return actions.size(); }
    std::optional<ActionIndex> find_action(std::string_view label) const;
    // Throws ArgumentError naming the game when the label is not an action.
    ActionIndex action_index(std::string_view label) const;
    const std::string& action_name(ActionIndex a) const;

    // Square payoff table over the action set; throws ValidationError otherwise.
    void validate() const;
};

// Chicken, Box and Door, in that order.
std::vector<GameSpec> default_games();

// games.json: [{"name": ..., "actions": [...], "payoff": [[[r, c], ...], ...]}, ...]
std::vector<GameSpec> load_games(const std::filesystem::path& path);
std::vector<GameSpec> parse_games(std::string_view json_text);
std::string games_to_json(const std::vector<GameSpec>& games);

Payoff payoff(const GameSpec& game, ActionIndex row, ActionIndex col);
Payoff payoff(const GameSpec& game, std::string_view row, std::string_view col);

bool is_symmetric(const GameSpec& game);
// True if some row action weakly dominates every other row action with at
// least one strict inequality.
bool has_dominant_strategy(const GameSpec& game);

struct MatchResult {
    // Participant indices; (i, i) is a self-pair.
    std::vector<std::pair<std::size_t, std::size_t>> pairs;
    std::vector<long> totals;
};

// Seeded shuffle then adjacent pairing; with odd n the last participant of the
// shuffled order plays against themselves.
MatchResult random_match(const Dataset& dataset, Rng& rng);

// Linear map of point totals onto [base, cap], rounded half up to cents.
std::vector<double> compensation(const std::vector<long>& totals, double base = 10.5, double cap = 15.0);

}  // namespace tb
