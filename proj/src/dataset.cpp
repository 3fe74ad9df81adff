#include "tb/dataset.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <numeric>
#include <set>
#include <sstream>
#include <unordered_map>
#include <unordered_set>

#include <json.hpp>

#include "tb/csv.hpp"
#include "tb/error.hpp"

namespace tb {

namespace {

std::string read_file(const std::filesystem::path& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path.string());
    std::stringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

std::string trim(std::string_view s)
{
    const auto b = s.find_first_not_of(" \t");
    if (b == std::string_view::npos) return {};
    const auto e = s.find_last_not_of(" \t");
    return std::string(s.substr(b, e - b + 1));
}

std::optional<long> parse_int(std::string_view s)
{
    const std::string t = trim(s);
    long v = 0;
    auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), v);
    if (ec != std::errc{} || ptr != t.data() + t.size() || t.empty()) return std::nullopt;
    return v;
}

std::optional<double> parse_real(std::string_view s)
{
    const std::string t = trim(s);
    double v = 0;
    auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), v);
    if (ec != std::errc{} || ptr != t.data() + t.size() || t.empty()) return std::nullopt;
    return v;
}

std::optional<bool> parse_bool(std::string_view s)
{
    std::string t = trim(s);
    std::transform(t.begin(), t.end(), t.begin(), [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    if (t == "1" || t == "true" || t == "yes") return true;
    if (t == "0" || t == "false" || t == "no" || t.empty()) return false;
    return std::nullopt;
}

Matrix parse_attribute_table(const csv::Table& table,
                             std::string_view source,
                             const Dataset& dataset,
                             bool raw_scale,
                             std::vector<std::string>& names)
{
    const std::size_t id_col = table.require("id", source);
    names.clear();
    std::vector<std::size_t> value_cols;
    std::unordered_set<std::string> seen;
    for (std::size_t c = 0; c < table.header.size(); ++c) {
        if (c == id_col) continue;
        if (!seen.insert(table.header[c]).second) {
            throw ValidationError(std::string(source) + ": duplicate attribute column '" + table.header[c] + "'");
        }
        names.push_back(table.header[c]);
        value_cols.push_back(c);
    }
    if (names.empty()) throw SchemaError(std::string(source) + ": no attribute columns");

    std::unordered_map<std::string, std::size_t> index_of;
    for (std::size_t i = 0; i < dataset.participants.size(); ++i) index_of.emplace(dataset.participants[i].id, i);

    Matrix values(dataset.participants.size(), names.size());
    std::vector<bool> filled(dataset.participants.size(), false);
    const double upper = raw_scale ? 5.0 : 1.0;
    for (const auto& row : table.rows) {
        const std::string& id = row[id_col];
        auto it = index_of.find(id);
        if (it == index_of.end()) throw ValidationError(std::string(source) + ": unknown participant id '" + id + "'");
        if (filled[it->second]) throw ValidationError(std::string(source) + ": duplicate participant id '" + id + "'");
        filled[it->second] = true;
        for (std::size_t k = 0; k < value_cols.size(); ++k) {
            auto v = parse_real(row[value_cols[k]]);
            if (!v || !std::isfinite(*v)) {
                throw ValidationError(std::string(source) + ": participant '" + id + "', attribute '" + names[k] +
                                      "': not a number");
            }
            if (*v < 0.0 || *v > upper) {
                throw ValidationError(std::string(source) + ": participant '" + id + "', attribute '" + names[k] +
                                      "': value " + csv::format_double(*v) + " outside [0, " +
                                      csv::format_double(upper) + "]" +
                                      (raw_scale ? "" : " (use raw scale for 0-5 scores)"));
            }
            values(it->second, k) = raw_scale ? *v / 5.0 : *v;
        }
    }
    for (std::size_t i = 0; i < filled.size(); ++i) {
        if (!filled[i]) {
            throw ValidationError(std::string(source) + ": no attribute row for participant '" +
                                  dataset.participants[i].id + "'");
        }
    }
    return values;
}

}  // namespace

std::string_view to_string(Gender g) noexcept
{
    switch (g) {
    case Gender::male:
        return "male";
    case Gender::female:
        return "female";
    default:
        return "unspecified";
    }
}

Gender parse_gender(std::string_view s) noexcept
{
    std::string t = trim(s);
    std::transform(t.begin(), t.end(), t.begin(), [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    if (t == "male" || t == "m") return Gender::male;
    if (t == "female" || t == "f") return Gender::female;
    return Gender::unspecified;
}

std::size_t Dataset::game_index(std::string_view name) const
{
    for (std::size_t g = 0; g < games.size(); ++g) {
        if (games[g].name == name) return g;
    }
    throw ArgumentError("unknown game '" + std::string(name) + "'");
}

std::vector<ActionIndex> Dataset::labels(std::size_t g) const
{
    std::vector<ActionIndex> out;
    out.reserve(participants.size());
    for (const auto& p : participants) out.push_back(p.choices.at(g));
    return out;
}

void Dataset::validate() const
{
    std::unordered_set<std::string> ids;
    for (const auto& p : participants) {
        if (p.id.empty()) throw ValidationError("participant with empty id");
        if (!ids.insert(p.id).second) throw ValidationError("duplicate participant id '" + p.id + "'");
        if (p.choices.size() != games.size()) {
            throw ValidationError("participant '" + p.id + "' has " + std::to_string(p.choices.size()) +
                                  " choices for " + std::to_string(games.size()) + " games");
        }
        for (std::size_t g = 0; g < games.size(); ++g) {
            if (p.choices[g] < 0 || static_cast<std::size_t>(p.choices[g]) >= games[g].action_count()) {
                throw ValidationError("participant '" + p.id + "': illegal action in game " + games[g].name);
            }
        }
    }
    std::unordered_set<std::string> names;
    for (const auto& a : attribute_names) {
        if (!names.insert(a).second) throw ValidationError("duplicate attribute name '" + a + "'");
    }
    if (attributes) {
        if (attributes->rows() != participants.size() || attributes->cols() != attribute_names.size()) {
            throw ValidationError("attribute matrix shape does not match participants x attribute names");
        }
        for (double v : attributes->data()) {
            if (!(v >= 0.0 && v <= 1.0)) throw ValidationError("attribute value outside [0, 1]");
        }
    }
}

Dataset parse_dataset(std::string_view participants_csv,
                      std::optional<std::string_view> attributes_csv,
                      const LoadOptions& options)
{
    const std::string psource = "participants.csv";
    if (participants_csv.find_first_not_of(" \t\r\n") == std::string_view::npos) {
        throw SchemaError(psource + ": empty file");
    }
    const csv::Table table = csv::parse(participants_csv, psource);

    Dataset ds;
    ds.games = options.games;
    for (const auto& g : ds.games) g.validate();

    const std::size_t id_col = table.require("id", psource);
    const std::size_t gender_col = table.require("gender", psource);
    const std::size_t age_col = table.require("age", psource);
    const std::size_t text_col = table.require("text_file", psource);
    std::vector<std::size_t> game_cols;
    for (const auto& g : ds.games) game_cols.push_back(table.require(g.name, psource));

    if (table.rows.empty()) throw SchemaError(psource + ": no participant rows");

    std::unordered_set<std::string> ids;
    for (const auto& row : table.rows) {
        Participant p;
        p.id = trim(row[id_col]);
        if (p.id.empty()) throw ValidationError(psource + ": empty participant id");
        if (!ids.insert(p.id).second) throw ValidationError(psource + ": duplicate participant id '" + p.id + "'");
        p.gender = parse_gender(row[gender_col]);
        auto age = parse_int(row[age_col]);
        if (!age || *age < 0) throw ValidationError(psource + ": participant '" + p.id + "': invalid age '" + row[age_col] + "'");
        p.age = static_cast<int>(*age);
        p.text_ref = row[text_col];
        for (std::size_t g = 0; g < ds.games.size(); ++g) {
            const std::string label = trim(row[game_cols[g]]);
            auto a = ds.games[g].find_action(label);
            if (!a) {
                throw ValidationError(psource + ": participant '" + p.id + "', game " + ds.games[g].name +
                                      ": illegal action '" + label + "'");
            }
            p.choices.push_back(*a);
        }
        ds.participants.push_back(std::move(p));
    }

    if (attributes_csv) {
        const std::string asource = "attributes.csv";
        const csv::Table at = csv::parse(*attributes_csv, asource);
        ds.attributes = parse_attribute_table(at, asource, ds, options.raw_scale, ds.attribute_names);
    }
    ds.validate();
    return ds;
}

Dataset load_dataset(const std::filesystem::path& participants_path,
                     const std::optional<std::filesystem::path>& attributes_path,
                     const LoadOptions& options)
{
    const std::string ptext = read_file(participants_path);
    std::optional<std::string> atext;
    if (attributes_path) atext = read_file(*attributes_path);
    Dataset ds;
    try {
        ds = parse_dataset(ptext, atext ? std::optional<std::string_view>(*atext) : std::nullopt, options);
    } catch (const SchemaError& e) {
        std::string msg = e.what();
        // Report the real file names rather than the canonical ones.
        for (auto [canon, real] : {std::pair{std::string("participants.csv"), participants_path.string()},
                                   std::pair{std::string("attributes.csv"),
                                             attributes_path ? attributes_path->string() : std::string("attributes.csv")}}) {
            if (msg.rfind(canon, 0) == 0) msg = real + msg.substr(canon.size());
        }
        throw SchemaError(msg);
    }
    ds.text_root = participants_path.parent_path();
    return ds;
}

void write_participants_csv(const Dataset& dataset, const std::filesystem::path& path)
{
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write " + path.string());
    std::vector<std::string> header = {"id", "gender", "age", "text_file"};
    for (const auto& g : dataset.games) header.push_back(g.name);
    out << csv::join(header) << '\n';
    for (const auto& p : dataset.participants) {
        std::vector<std::string> row = {p.id, std::string(to_string(p.gender)), std::to_string(p.age), p.text_ref};
        for (std::size_t g = 0; g < dataset.games.size(); ++g) row.push_back(dataset.games[g].action_name(p.choices[g]));
        out << csv::join(row) << '\n';
    }
}

void write_attributes_csv(const std::vector<std::string>& row_ids,
                          const std::vector<std::string>& names,
                          const Matrix& values,
                          const std::filesystem::path& path)
{
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write " + path.string());
    std::vector<std::string> header = {"id"};
    header.insert(header.end(), names.begin(), names.end());
    out << csv::join(header) << '\n';
    for (std::size_t r = 0; r < row_ids.size(); ++r) {
        std::vector<std::string> row = {row_ids[r]};
        for (std::size_t c = 0; c < names.size(); ++c) row.push_back(csv::format_double(values(r, c)));
        out << csv::join(row) << '\n';
    }
}

// ---- judgments -------------------------------------------------------------

void WorkerJudgment::validate() const
{
    if (score < 0 || score > 5) {
        throw ValidationError("worker '" + worker_id + "', text '" + text_id + "': score " + std::to_string(score) +
                              " outside 0..5");
    }
    if (is_test_question != expected_interval.has_value()) {
        throw ValidationError("worker '" + worker_id + "', text '" + text_id +
                              "': expected interval must be present exactly for test questions");
    }
    if (expected_interval) {
        const auto [lo, hi] = *expected_interval;
        if (!(0 <= lo && lo <= hi && hi <= 5)) {
            throw ValidationError("worker '" + worker_id + "', text '" + text_id + "': invalid interval " +
                                  std::to_string(lo) + "-" + std::to_string(hi));
        }
    }
}

std::vector<WorkerJudgment> parse_judgments(std::string_view csv_text, std::string_view source)
{
    const csv::Table t = csv::parse(csv_text, source);
    const std::size_t worker = t.require("worker_id", source);
    const std::size_t text = t.require("text_id", source);
    const std::size_t attr = t.require("attribute", source);
    const std::size_t score = t.require("score", source);
    const std::size_t is_test = t.require("is_test", source);
    const std::size_t lo = t.require("lo", source);
    const std::size_t hi = t.require("hi", source);

    std::vector<WorkerJudgment> out;
    out.reserve(t.rows.size());
    for (std::size_t r = 0; r < t.rows.size(); ++r) {
        const auto& row = t.rows[r];
        const std::string where = std::string(source) + " row " + std::to_string(r + 1);
        WorkerJudgment j;
        j.worker_id = trim(row[worker]);
        j.text_id = trim(row[text]);
        j.attribute = trim(row[attr]);
        auto s = parse_int(row[score]);
        if (!s) throw ValidationError(where + ": score '" + row[score] + "' is not an integer");
        j.score = static_cast<int>(*s);
        auto test = parse_bool(row[is_test]);
        if (!test) throw ValidationError(where + ": is_test '" + row[is_test] + "' is not a boolean");
        j.is_test_question = *test;
        const bool has_lo = !trim(row[lo]).empty();
        const bool has_hi = !trim(row[hi]).empty();
        if (has_lo || has_hi) {
            auto l = parse_int(row[lo]);
            auto h = parse_int(row[hi]);
            if (!l || !h) throw ValidationError(where + ": lo/hi must both be integers");
            j.expected_interval = ScoreInterval{static_cast<int>(*l), static_cast<int>(*h)};
        }
        try {
            j.validate();
        } catch (const ValidationError& e) {
            throw ValidationError(where + ": " + e.what());
        }
        out.push_back(std::move(j));
    }
    return out;
}

std::vector<WorkerJudgment> load_judgments(const std::filesystem::path& path)
{
    return parse_judgments(read_file(path), path.string());
}

Aggregation aggregate_judgments(const std::vector<WorkerJudgment>& judgments, const AggregateOptions& options)
{
    struct Tally {
        int tests = 0;
        int passed = 0;
    };
    std::map<std::string, Tally> tallies;
    for (const auto& j : judgments) {
        j.validate();
        auto& t = tallies[j.worker_id];
        if (j.is_test_question) {
            ++t.tests;
            if (j.score >= j.expected_interval->lo && j.score <= j.expected_interval->hi) ++t.passed;
        }
    }

    Aggregation agg;
    std::set<std::string> surviving;
    for (const auto& [id, t] : tallies) {
        WorkerStatus st;
        st.worker_id = id;
        st.test_questions = t.tests;
        st.test_passed = t.passed;
        st.success_rate = t.tests > 0 ? static_cast<double>(t.passed) / static_cast<double>(t.tests) : 0.0;
        st.passed = t.tests > 0 && st.success_rate >= options.pass_threshold;
        if (st.passed) {
            surviving.insert(id);
        } else {
            ++agg.report.excluded;
        }
        agg.report.workers.push_back(std::move(st));
    }

    std::set<std::string> texts;
    std::set<std::string> attrs_seen;
    for (const auto& j : judgments) {
        if (j.is_test_question) continue;
        texts.insert(j.text_id);
        attrs_seen.insert(j.attribute);
    }

    if (options.attribute_order.empty()) {
        agg.attribute_names.assign(attrs_seen.begin(), attrs_seen.end());
    } else {
        agg.attribute_names = options.attribute_order;
        std::set<std::string> declared(agg.attribute_names.begin(), agg.attribute_names.end());
        if (declared.size() != agg.attribute_names.size()) throw ValidationError("attribute order has duplicates");
        for (const auto& a : attrs_seen) {
            if (!declared.contains(a)) throw ValidationError("judgment for undeclared attribute '" + a + "'");
        }
    }
    agg.text_ids.assign(texts.begin(), texts.end());

    std::unordered_map<std::string, std::size_t> text_index;
    for (std::size_t i = 0; i < agg.text_ids.size(); ++i) text_index.emplace(agg.text_ids[i], i);
    std::unordered_map<std::string, std::size_t> attr_index;
    for (std::size_t i = 0; i < agg.attribute_names.size(); ++i) attr_index.emplace(agg.attribute_names[i], i);

    // Integer sums keep the mean independent of judgment order.
    const std::size_t cols = agg.attribute_names.size();
    std::vector<long> sums(agg.text_ids.size() * cols, 0);
    std::vector<long> counts(agg.text_ids.size() * cols, 0);
    for (const auto& j : judgments) {
        if (j.is_test_question || !surviving.contains(j.worker_id)) continue;
        const std::size_t cell = text_index.at(j.text_id) * cols + attr_index.at(j.attribute);
        sums[cell] += j.score;
        ++counts[cell];
    }

    agg.values = Matrix(agg.text_ids.size(), cols);
    for (std::size_t t = 0; t < agg.text_ids.size(); ++t) {
        for (std::size_t a = 0; a < cols; ++a) {
            const std::size_t cell = t * cols + a;
            if (counts[cell] == 0) {
                throw CoverageError("no surviving judgments for text '" + agg.text_ids[t] + "', attribute '" +
                                    agg.attribute_names[a] + "'");
            }
            if (counts[cell] < options.required_estimates) ++agg.report.cells_below_required;
            agg.values(t, a) = static_cast<double>(sums[cell]) / static_cast<double>(5 * counts[cell]);
        }
    }
    return agg;
}

void write_worker_report_csv(const WorkerReport& report, const std::filesystem::path& path)
{
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write " + path.string());
    out << "worker_id,test_questions,test_passed,success_rate,passed\n";
    for (const auto& w : report.workers) {
        out << csv::join({w.worker_id, std::to_string(w.test_questions), std::to_string(w.test_passed),
                          csv::format_fixed(w.success_rate, 6), w.passed ? "1" : "0"})
            << '\n';
    }
}

// ---- summary ---------------------------------------------------------------

namespace {

AgeStats age_stats(std::vector<int> ages)
{
    AgeStats s;
    s.count = ages.size();
    if (ages.empty()) return s;
    std::sort(ages.begin(), ages.end());
    s.min = ages.front();
    s.max = ages.back();
    const double n = static_cast<double>(ages.size());
    s.mean = std::accumulate(ages.begin(), ages.end(), 0.0) / n;
    const std::size_t mid = ages.size() / 2;
    s.median = ages.size() % 2 ? ages[mid] : 0.5 * (ages[mid - 1] + ages[mid]);
    if (ages.size() > 1) {
        double ss = 0.0;
        for (int a : ages) ss += (a - s.mean) * (a - s.mean);
        s.stddev = std::sqrt(ss / (n - 1.0));
    }
    return s;
}

nlohmann::json age_json(const AgeStats& s)
{
    return {{"count", s.count}, {"mean", s.mean}, {"median", s.median}, {"std", s.stddev}, {"min", s.min}, {"max", s.max}};
}

}  // namespace

SummaryReport summarize(const Dataset& dataset)
{
    dataset.validate();
    SummaryReport r;
    r.participants = dataset.size();
    std::vector<int> all, male, female;
    for (const auto& p : dataset.participants) {
        all.push_back(p.age);
        switch (p.gender) {
        case Gender::male:
            ++r.male;
            male.push_back(p.age);
            break;
        case Gender::female:
            ++r.female;
            female.push_back(p.age);
            break;
        default:
            ++r.unspecified;
        }
    }
    r.age = age_stats(all);
    r.age_male = age_stats(male);
    r.age_female = age_stats(female);

    for (std::size_t g = 0; g < dataset.games.size(); ++g) {
        const auto& game = dataset.games[g];
        GameSummary gs;
        gs.game = game.name;
        gs.actions = game.actions;
        const std::size_t m = game.action_count();
        gs.counts.assign(m, 0);
        gs.male_counts.assign(m, 0);
        gs.female_counts.assign(m, 0);
        gs.unspecified_counts.assign(m, 0);
        for (const auto& p : dataset.participants) {
            const auto a = static_cast<std::size_t>(p.choices[g]);
            ++gs.counts[a];
            if (p.gender == Gender::male) ++gs.male_counts[a];
            else if (p.gender == Gender::female) ++gs.female_counts[a];
            else ++gs.unspecified_counts[a];
        }
        for (std::size_t a = 0; a < m; ++a) {
            gs.proportions.push_back(static_cast<double>(gs.counts[a]) / static_cast<double>(r.participants));
        }
        r.games.push_back(std::move(gs));
    }
    return r;
}

std::string SummaryReport::to_json() const
{
    nlohmann::json doc;
    doc["participants"] = participants;
    doc["gender"] = {{"male", male}, {"female", female}, {"unspecified", unspecified}};
    doc["age"] = {{"all", age_json(age)}, {"male", age_json(age_male)}, {"female", age_json(age_female)}};
    nlohmann::json games_json = nlohmann::json::object();
    for (const auto& g : games) {
        nlohmann::json actions = nlohmann::json::object();
        for (std::size_t a = 0; a < g.actions.size(); ++a) {
            actions[g.actions[a]] = {{"count", g.counts[a]},
                                     {"male", g.male_counts[a]},
                                     {"female", g.female_counts[a]},
                                     {"unspecified", g.unspecified_counts[a]},
                                     {"proportion", g.proportions[a]}};
        }
        games_json[g.game] = {{"actions", actions}, {"action_order", g.actions}};
    }
    doc["games"] = std::move(games_json);
    return doc.dump(2) + "\n";
}

}  // namespace tb
