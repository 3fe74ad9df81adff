#include "tb/games.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "tb/dataset.hpp"
#include "tb/error.hpp"

namespace tb {

std::optional<ActionIndex> GameSpec::find_action(std::string_view label) const
{
    for (std::size_t i = 0; i < actions.size(); ++i) {
        if (actions[i] == label) return static_cast<ActionIndex>(i);
    }
    return std::nullopt;
}

ActionIndex GameSpec::action_index(std::string_view label) const
{
    if (auto a = find_action(label)) return *a;
    throw ArgumentError("'" + std::string(label) + "' is not an action of game " + name);
}

const std::string& GameSpec::action_name(ActionIndex a) const
{
    if (a < 0 || static_cast<std::size_t>(a) >= actions.size()) {
        throw ArgumentError("action index " + std::to_string(a) + " out of range for game " + name);
    }
    return actions[static_cast<std::size_t>(a)];
}

void GameSpec::validate() const
{
    if (name.empty()) throw ValidationError("game with empty name");
    if (actions.empty()) throw ValidationError("game " + name + " has no actions");
    for (std::size_t i = 0; i < actions.size(); ++i) {
        for (std::size_t j = i + 1; j < actions.size(); ++j) {
            if (actions[i] == actions[j]) throw ValidationError("game " + name + " repeats action " + actions[i]);
        }
    }
    if (payoff.size() != actions.size()) throw ValidationError("game " + name + ": payoff matrix is not square over the actions");
    for (const auto& row : payoff) {
        if (row.size() != actions.size()) throw ValidationError("game " + name + ": payoff matrix is not square over the actions");
    }
}

std::vector<GameSpec> default_games()
{
    return {
        {"chicken", {"Speed", "Stop"}, {{{0, 0}, {14, 2}}, {{2, 14}, {6, 6}}}},
        {"box", {"Left", "Right"}, {{{8, 8}, {16, 12}}, {{12, 16}, {6, 6}}}},
        {"door",
         {"A", "B", "C"},
         {{{10, 10}, {0, 0}, {0, 0}}, {{0, 0}, {10, 10}, {0, 0}}, {{0, 0}, {0, 0}, {8, 8}}}},
    };
}

std::vector<GameSpec> parse_games(std::string_view json_text)
{
    nlohmann::json doc;
    try {
        doc = nlohmann::json::parse(json_text);
    } catch (const nlohmann::json::exception& e) {
        throw SchemaError(std::string("games.json: ") + e.what());
    }
    if (!doc.is_array()) throw SchemaError("games.json: top level must be an array");

    std::vector<GameSpec> games;
    try {
        for (const auto& g : doc) {
            GameSpec spec;
            spec.name = g.at("name").get<std::string>();
            spec.actions = g.at("actions").get<std::vector<std::string>>();
            for (const auto& row : g.at("payoff")) {
                std::vector<Payoff> cells;
                for (const auto& cell : row) {
                    if (!cell.is_array() || cell.size() != 2) throw SchemaError("games.json: payoff cells must be [row, col] pairs");
                    cells.push_back({cell[0].get<int>(), cell[1].get<int>()});
                }
                spec.payoff.push_back(std::move(cells));
            }
            spec.validate();
            games.push_back(std::move(spec));
        }
    } catch (const nlohmann::json::exception& e) {
        throw SchemaError(std::string("games.json: ") + e.what());
    }
    for (std::size_t i = 0; i < games.size(); ++i) {
        for (std::size_t j = i + 1; j < games.size(); ++j) {
            if (games[i].name == games[j].name) throw ValidationError("games.json: duplicate game " + games[i].name);
        }
    }
    return games;
}

std::vector<GameSpec> load_games(const std::filesystem::path& path)
{
    std::ifstream in(path);
    if (!in) throw IoError("cannot open " + path.string());
    std::stringstream buf;
    buf << in.rdbuf();
    return parse_games(buf.str());
}

std::string games_to_json(const std::vector<GameSpec>& games)
{
    nlohmann::ordered_json doc = nlohmann::ordered_json::array();
    for (const auto& g : games) {
        nlohmann::ordered_json rows = nlohmann::ordered_json::array();
        for (const auto& row : g.payoff) {
            nlohmann::ordered_json cells = nlohmann::ordered_json::array();
            for (const auto& c : row) cells.push_back({c.row, c.col});
            rows.push_back(std::move(cells));
        }
        doc.push_back({{"name", g.name}, {"actions", g.actions}, {"payoff", std::move(rows)}});
    }
    return doc.dump(2) + "\n";
}

Payoff payoff(const GameSpec& game, ActionIndex row, ActionIndex col)
{
    const auto n = static_cast<ActionIndex>(game.action_count());
    if (row < 0 || row >= n || col < 0 || col >= n) {
        throw ArgumentError("illegal action for game " + game.name);
    }
    return game.payoff[static_cast<std::size_t>(row)][static_cast<std::size_t>(col)];
}

Payoff payoff(const GameSpec& game, std::string_view row, std::string_view col)
{
    return payoff(game, game.action_index(row), game.action_index(col));
}

bool is_symmetric(const GameSpec& game)
{
    const std::size_t n = game.action_count();
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < n; ++j) {
            if (game.payoff[i][j].row != game.payoff[j][i].col) return false;
        }
    }
    return true;
}

bool has_dominant_strategy(const GameSpec& game)
{
    const std::size_t n = game.action_count();
    for (std::size_t a = 0; a < n; ++a) {
        bool dominates_all = n > 1;
        for (std::size_t b = 0; b < n && dominates_all; ++b) {
            if (a == b) continue;
            bool weak = true;
            bool strict = false;
            for (std::size_t c = 0; c < n; ++c) {
                const int pa = game.payoff[a][c].row;
                const int pb = game.payoff[b][c].row;
                if (pa < pb) weak = false;
                if (pa > pb) strict = true;
            }
            dominates_all = weak && strict;
        }
        if (dominates_all) return true;
    }
    return false;
}

MatchResult random_match(const Dataset& dataset, Rng& rng)
{
    const std::size_t n = dataset.participants.size();
    std::vector<std::size_t> order(n);
    for (std::size_t i = 0; i < n; ++i) order[i] = i;
    rng.shuffle(std::span<std::size_t>(order));

    MatchResult result;
    result.totals.assign(n, 0);
    for (std::size_t i = 0; i + 1 < n; i += 2) result.pairs.emplace_back(order[i], order[i + 1]);
    if (n % 2 == 1) result.pairs.emplace_back(order[n - 1], order[n - 1]);

    for (const auto& [a, b] : result.pairs) {
        for (std::size_t g = 0; g < dataset.games.size(); ++g) {
            const auto& game = dataset.games[g];
            const ActionIndex ca = dataset.participants[a].choices[g];
            const ActionIndex cb = dataset.participants[b].choices[g];
            const Payoff p = payoff(game, ca, cb);
            result.totals[a] += p.row;
            if (b != a) result.totals[b] += p.col;
        }
    }
    return result;
}

std::vector<double> compensation(const std::vector<long>& totals, double base, double cap)
{
    if (totals.empty()) throw ArgumentError("compensation needs at least one participant");
    const auto [lo_it, hi_it] = std::minmax_element(totals.begin(), totals.end());
    const long lo = *lo_it;
    const long hi = *hi_it;
    std::vector<double> pay;
    pay.reserve(totals.size());
    for (long t : totals) {
        double amount = base;
        if (hi != lo) amount = base + (cap - base) * static_cast<double>(t - lo) / static_cast<double>(hi - lo);
        pay.push_back(std::floor(amount * 100.0 + 0.5) / 100.0);
    }
    return pay;
}

}  // namespace tb
