#include <algorithm>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "tb/classifiers.hpp"
#include "tb/clustering.hpp"
#include "tb/csv.hpp"
#include "tb/dataset.hpp"
#include "tb/error.hpp"
#include "tb/features.hpp"
#include "tb/games.hpp"
#include "tb/harness.hpp"
#include "tb/rng.hpp"
#include "tb/version.hpp"

namespace fs = std::filesystem;

namespace {

std::string default_out_dir()
{
    const char* env = std::getenv("TB_OUT_DIR");
    return env && *env ? env : ".";
}

fs::path prepare_out_dir(const std::string& out)
{
    fs::path dir(out);
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw tb::IoError("cannot create " + dir.string() + ": " + ec.message());
    return dir;
}

std::vector<tb::GameSpec> games_from(const std::string& games_file)
{
    return games_file.empty() ? tb::default_games() : tb::load_games(games_file);
}

tb::Dataset load(const std::string& participants, const std::string& attributes, bool raw_scale, const std::string& games_file)
{
    tb::LoadOptions opts;
    opts.raw_scale = raw_scale;
    opts.games = games_from(games_file);
    std::optional<fs::path> attr;
    if (!attributes.empty()) attr = attributes;
    return tb::load_dataset(participants, attr, opts);
}

void write_text(const fs::path& path, const std::string& text)
{
    std::ofstream out(path, std::ios::binary);
    if (!out) throw tb::IoError("cannot write " + path.string());
    out << text;
}

std::vector<double> parse_props(const std::string& text)
{
    std::vector<double> values;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) {
        try {
            std::size_t used = 0;
            const double v = std::stod(item, &used);
            if (used != item.size() || !(v >= 0)) throw std::invalid_argument(item);
            values.push_back(v);
        } catch (const std::exception&) {
            throw tb::ArgumentError("--props: bad value '" + item + "'");
        }
    }
    double total = 0;
    for (double v : values) total += v;
    if (values.empty() || total <= 0) throw tb::ArgumentError("--props needs positive counts or proportions");
    for (double& v : values) v /= total;
    return values;
}

// ---- verbs -----------------------------------------------------------------

struct DataFlags {
    std::string participants;
    std::string attributes;
    std::string games_file;
    bool raw_scale = false;

    void add(CLI::App* cmd, bool participants_required = true)
    {
        auto* p = cmd->add_option("--participants", participants, "participants.csv");
        if (participants_required) p->required();
        p->check(CLI::ExistingFile);
        cmd->add_option("--attributes", attributes, "attributes.csv")->check(CLI::ExistingFile);
        cmd->add_option("--games-file", games_file, "games.json (defaults to chicken, box, door)")->check(CLI::ExistingFile);
        cmd->add_flag("--raw-scale", raw_scale, "attribute file holds raw 0-5 scores");
    }
};

int run_ingest(const DataFlags& data, const std::string& out)
{
    const tb::Dataset ds = load(data.participants, data.attributes, data.raw_scale, data.games_file);
    const fs::path dir = prepare_out_dir(out);
    tb::write_participants_csv(ds, dir / "participants.csv");
    if (ds.attributes) {
        std::vector<std::string> ids;
        for (const auto& p : ds.participants) ids.push_back(p.id);
        tb::write_attributes_csv(ids, ds.attribute_names, *ds.attributes, dir / "attributes.csv");
    }
    write_text(dir / "summary.json", tb::summarize(ds).to_json());
    std::cout << "ingested " << ds.size() << " participants into " << dir.string() << '\n';
    return 0;
}

int run_aggregate(const std::string& judgments, double threshold, int required, const std::string& out)
{
    tb::AggregateOptions opts;
    opts.pass_threshold = threshold;
    opts.required_estimates = required;
    const auto agg = tb::aggregate_judgments(tb::load_judgments(judgments), opts);
    const fs::path dir = prepare_out_dir(out);
    tb::write_attributes_csv(agg.text_ids, agg.attribute_names, agg.values, dir / "attributes.csv");
    tb::write_worker_report_csv(agg.report, dir / "worker_report.csv");
    std::cout << "workers " << agg.report.workers.size() << ", excluded " << agg.report.excluded << " ("
              << tb::csv::format_fixed(100.0 * agg.report.excluded_fraction(), 1) << "%), cells below required "
              << agg.report.cells_below_required << '\n';
    return 0;
}

int run_stats(const DataFlags& data, const std::string& out)
{
    const tb::Dataset ds = load(data.participants, data.attributes, data.raw_scale, data.games_file);
    const tb::SummaryReport report = tb::summarize(ds);
    const fs::path dir = prepare_out_dir(out);
    write_text(dir / "summary.json", report.to_json());
    std::ofstream hist(dir / "histograms.csv", std::ios::binary);
    if (!hist) throw tb::IoError("cannot write " + (dir / "histograms.csv").string());
    hist << "game,action,all,male,female,unspecified,proportion\n";
    for (const auto& g : report.games) {
        for (std::size_t a = 0; a < g.actions.size(); ++a) {
            hist << tb::csv::join({g.game, g.actions[a], std::to_string(g.counts[a]), std::to_string(g.male_counts[a]),
                                   std::to_string(g.female_counts[a]), std::to_string(g.unspecified_counts[a]),
                                   tb::csv::format_fixed(g.proportions[a], 6)})
                 << '\n';
        }
    }
    std::cout << report.to_json();
    return 0;
}

int run_cluster(const std::string& config_path, const std::string& feature_set, const std::string& features_path,
                const DataFlags& data, const std::vector<int>& ks, const std::string& out)
{
    tb::FeatureMatrix fm;
    std::string name = feature_set;
    if (!features_path.empty()) {
        fm = tb::load_feature_csv(features_path);
        if (name.empty()) name = fs::path(features_path).stem().string();
    } else {
        if (config_path.empty() && data.participants.empty()) {
            throw tb::ArgumentError("cluster needs --features, --config or --participants");
        }
        tb::ExperimentConfig config;
        if (!config_path.empty()) config = tb::load_config(config_path);
        if (!data.participants.empty()) config.participants = data.participants;
        if (!data.attributes.empty()) config.attributes = data.attributes;
        if (!data.games_file.empty()) config.games_file = data.games_file;
        config.raw_scale = config.raw_scale || data.raw_scale;
        if (name.empty()) name = config.feature_sets.empty() ? "ours24" : config.feature_sets.front();
        if (config.feature_set_specs.empty()) config.feature_set_specs.push_back({name, tb::FeatureSetSpec::Kind::attributes, {}, {}});
        const tb::Dataset ds = load(config.participants.string(), config.attributes.string(), config.raw_scale, config.games_file.string());
        auto sets = tb::build_feature_sets(config, ds);
        auto it = sets.find(name);
        if (it == sets.end()) throw tb::ConfigError("no feature set named '" + name + "'");
        fm = std::move(it->second);
    }
    const tb::Dendrogram dendro = tb::ward_linkage(fm);
    const fs::path dir = prepare_out_dir(out);
    tb::write_dendrogram_csv(dendro, dir / ("dendrogram_" + name + ".csv"));
    if (!ks.empty()) {
        std::ofstream cuts(dir / ("clusters_" + name + ".csv"), std::ios::binary);
        if (!cuts) throw tb::IoError("cannot write clusters file");
        cuts << "id,k,cluster\n";
        for (int k : ks) {
            if (k < 1) throw tb::ArgumentError("--k must be positive");
            const auto assignment = tb::cut(dendro, static_cast<std::size_t>(k));
            for (std::size_t i = 0; i < fm.rows(); ++i) {
                cuts << tb::csv::join({fm.row_ids[i], std::to_string(k), std::to_string(assignment.label_of[i])}) << '\n';
            }
        }
    }
    std::cout << "dendrogram of " << fm.rows() << " rows written to " << dir.string() << '\n';
    return 0;
}

struct EvaluateFlags {
    std::string config;
    std::optional<std::uint64_t> seed;
    std::optional<int> repetitions;
    int threads = 0;
    bool raw_scale = false;
    bool tie_over_tied_labels = false;
    std::string mvc_scope;
};

int run_evaluate(const EvaluateFlags& f, const std::string& out)
{
    tb::ExperimentConfig config = tb::load_config(f.config);
    if (f.seed) config.master_seed = *f.seed;
    if (f.repetitions) config.repetitions = *f.repetitions;
    if (f.raw_scale) config.raw_scale = true;
    if (f.tie_over_tied_labels) config.tac.tie_over_tied_labels = true;
    if (f.mvc_scope == "whole") config.mvc_scope = tb::MvcScope::whole_data;
    if (f.mvc_scope == "train") config.mvc_scope = tb::MvcScope::train_only;
    if (f.threads < 0) throw tb::ArgumentError("--threads must be nonnegative");
    config.validate();
    if (config.participants.empty()) throw tb::ConfigError("config does not name a participants file");

    // A bare feature set name refers to the dataset's own attributes.
    for (const auto& name : config.feature_sets) {
        const bool has_spec = std::any_of(config.feature_set_specs.begin(), config.feature_set_specs.end(),
                                          [&](const auto& s) { return s.name == name; });
        if (!has_spec && config.feature_sets.size() == 1) {
            config.feature_set_specs.push_back({name, tb::FeatureSetSpec::Kind::attributes, {}, {}});
        }
    }

    const tb::Dataset ds = load(config.participants.string(), config.attributes.string(), config.raw_scale, config.games_file.string());
    const auto features = tb::build_feature_sets(config, ds);
    tb::RunStats stats;
    tb::ExecutionOptions exec;
    exec.threads = f.threads;
    const tb::ResultTable table = tb::run_experiment(config, ds, features, exec, &stats);

    const fs::path dir = prepare_out_dir(out);
    auto files = tb::emit_reports(table, dir, config.games, config.selection_metric);
    tb::write_manifest(dir, config, files);
    std::cout << "evaluated " << config.repetitions << " repetitions (test size " << stats.test_size << "); reports in "
              << dir.string() << '\n';
    return 0;
}

struct BaselineFlags {
    std::string game;
    std::string props;
    std::string games_file;
    bool monte_carlo = false;
    std::size_t trials = 100000;
    std::size_t test_size = 27;
    std::uint64_t seed = 0;
};

int run_baselines(const BaselineFlags& f)
{
    const auto games = games_from(f.games_file);
    const auto it = std::find_if(games.begin(), games.end(), [&](const auto& g) { return g.name == f.game; });
    if (it == games.end()) throw tb::ArgumentError("unknown game '" + f.game + "'");
    const auto props = parse_props(f.props);
    if (props.size() != it->action_count()) {
        throw tb::ArgumentError("--props needs " + std::to_string(it->action_count()) + " values for " + it->name);
    }
    std::cout << "classifier,game,metric,value\n";
    for (auto [name, mode] : {std::pair{"ERG", tb::RandomGuess::uniform}, std::pair{"EWG", tb::RandomGuess::weighted}}) {
        const tb::ScoreTable t = f.monte_carlo
                                     ? tb::expected_scores_monte_carlo(props, mode, {f.trials, f.test_size, f.seed})
                                     : tb::expected_scores_plug_in(props, mode);
        auto line = [&](const std::string& metric, double v) {
            std::cout << tb::csv::join({name, it->name, metric, tb::csv::format_fixed(v, 4)}) << '\n';
        };
        line("Accuracy", t.summary.accuracy);
        line("MAV-F1", t.summary.mav_f1);
        line("MWAV-F1", t.summary.mwav_f1);
        for (std::size_t a = 0; a < it->action_count(); ++a) {
            line("F1-" + it->actions[a], t.per_class[a].f1);
            line("Precision-" + it->actions[a], t.per_class[a].precision);
            line("Recall-" + it->actions[a], t.per_class[a].recall);
        }
    }
    return 0;
}

int run_match(const DataFlags& data, std::uint64_t seed, double base, double cap, const std::string& out)
{
    const tb::Dataset ds = load(data.participants, data.attributes, data.raw_scale, data.games_file);
    tb::Rng rng(tb::derive_seed(seed, {tb::hash_name("match")}));
    const tb::MatchResult m = tb::random_match(ds, rng);
    const auto pay = tb::compensation(m.totals, base, cap);
    std::vector<std::size_t> partner(ds.size());
    for (const auto& [a, b] : m.pairs) {
        partner[a] = b;
        partner[b] = a;
    }
    const fs::path dir = prepare_out_dir(out);
    std::ofstream csv_out(dir / "match.csv", std::ios::binary);
    if (!csv_out) throw tb::IoError("cannot write match.csv");
    csv_out << "id,partner,points,payment\n";
    double total = 0;
    for (std::size_t i = 0; i < ds.size(); ++i) {
        csv_out << tb::csv::join({ds.participants[i].id, ds.participants[partner[i]].id, std::to_string(m.totals[i]),
                                  tb::csv::format_fixed(pay[i], 2)})
                << '\n';
        total += pay[i];
    }
    std::cout << m.pairs.size() << " pairs, mean payment " << tb::csv::format_fixed(total / static_cast<double>(ds.size()), 2)
              << ", seed " << seed << '\n';
    return 0;
}

int run_report(const std::string& results, const std::string& selection_metric, const std::string& out)
{
    const tb::ResultTable table = tb::read_results_csv(results);
    std::vector<std::string> games;
    for (const auto& r : table.rows) {
        if (std::find(games.begin(), games.end(), r.game) == games.end()) games.push_back(r.game);
    }
    const fs::path dir = prepare_out_dir(out);
    tb::emit_reports(table, dir, games, selection_metric);
    std::cout << "reports re-rendered in " << dir.string() << '\n';
    return 0;
}

}  // namespace

int main(int argc, char** argv)
{
    CLI::App app{"Seeded experiments on game-choice prediction from free-text self descriptions"};
    app.require_subcommand(1);
    app.set_version_flag("--version", std::string("{\"engine\": \"") + tb::kEngineVersion + "\", \"schema\": \"" +
                                          tb::kSchemaVersion + "\", \"build\": \"" + tb::kBuildDescription + "\"}");

    std::string out = default_out_dir();
    auto add_out = [&](CLI::App* cmd) { cmd->add_option("--out", out, "output directory (default: $TB_OUT_DIR or .)"); };

    DataFlags data;
    auto* ingest = app.add_subcommand("ingest", "load and validate a dataset, emit canonical files");
    data.add(ingest);
    add_out(ingest);

    std::string judgments;
    double threshold = 0.70;
    int required = 8;
    auto* aggregate = app.add_subcommand("aggregate", "crowd judgments to attributes.csv and a worker report");
    aggregate->add_option("--judgments", judgments, "judgments.csv")->required()->check(CLI::ExistingFile);
    aggregate->add_option("--threshold", threshold, "test-question pass rate a worker needs")->capture_default_str();
    aggregate->add_option("--required", required, "estimates wanted per text and attribute")->capture_default_str();
    add_out(aggregate);

    auto* stats = app.add_subcommand("stats", "participant summary and per-game choice histograms");
    data.add(stats);
    add_out(stats);

    std::string config_path, feature_set, features_path;
    std::vector<int> ks;
    auto* cluster = app.add_subcommand("cluster", "Ward dendrogram of a feature set");
    cluster->add_option("--config", config_path, "experiment config naming the data and feature sets")->check(CLI::ExistingFile);
    cluster->add_option("--feature-set", feature_set, "feature set name from the config");
    cluster->add_option("--features", features_path, "feature CSV (id,<col>...) to cluster directly")->check(CLI::ExistingFile);
    cluster->add_option("--k", ks, "also write the flat partitions for these cluster counts");
    data.add(cluster, false);
    add_out(cluster);

    EvaluateFlags ev;
    auto* evaluate = app.add_subcommand("evaluate", "run the repeated-split experiment from a config file");
    evaluate->add_option("--config", ev.config, "experiment config (JSON)")->required()->check(CLI::ExistingFile);
    evaluate->add_option("--seed", ev.seed, "master seed (overrides the config)");
    evaluate->add_option("--repetitions", ev.repetitions, "number of splits (overrides the config)");
    evaluate->add_option("--threads", ev.threads, "worker threads; 1 runs the serial reference path, 0 the OpenMP default")
        ->capture_default_str();
    evaluate->add_flag("--raw-scale", ev.raw_scale, "attribute file holds raw 0-5 scores");
    evaluate->add_flag("--tie-over-tied-labels", ev.tie_over_tied_labels, "TAC ties draw among the tied labels only");
    evaluate->add_option("--mvc-scope", ev.mvc_scope, "majority computed over the whole data or the train part")
        ->check(CLI::IsMember({"whole", "train"}));
    add_out(evaluate);

    BaselineFlags bl;
    auto* baselines = app.add_subcommand("baselines", "expected scores of the random guessers (ERG, EWG)");
    baselines->add_option("--game", bl.game, "game name")->required();
    baselines->add_option("--props", bl.props, "class counts or proportions, comma separated, in action order")->required();
    baselines->add_option("--games-file", bl.games_file, "games.json")->check(CLI::ExistingFile);
    baselines->add_flag("--monte-carlo", bl.monte_carlo, "simulate instead of the plug-in formulas");
    baselines->add_option("--trials", bl.trials, "Monte Carlo trials")->capture_default_str();
    baselines->add_option("--test-size", bl.test_size, "Monte Carlo test set size")->capture_default_str();
    baselines->add_option("--seed", bl.seed, "Monte Carlo seed")->capture_default_str();

    std::uint64_t match_seed = 0;
    double base = 10.5, cap = 15.0;
    DataFlags match_data;
    auto* match = app.add_subcommand("match", "random pairing, game points and compensation");
    match_data.add(match);
    match->add_option("--seed", match_seed, "matching seed")->capture_default_str();
    match->add_option("--base", base, "minimum payment")->capture_default_str();
    match->add_option("--cap", cap, "maximum payment")->capture_default_str();
    add_out(match);

    std::string results, selection_metric = "MAV-F1";
    auto* report = app.add_subcommand("report", "re-render tables and curves from a saved results.csv");
    report->add_option("--results", results, "results.csv from evaluate")->required()->check(CLI::ExistingFile);
    report->add_option("--selection-metric", selection_metric, "metric used to pick best and median")->capture_default_str();
    add_out(report);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    try {
        if (*ingest) return run_ingest(data, out);
        if (*aggregate) return run_aggregate(judgments, threshold, required, out);
        if (*stats) return run_stats(data, out);
        if (*cluster) return run_cluster(config_path, feature_set, features_path, data, ks, out);
        if (*evaluate) return run_evaluate(ev, out);
        if (*baselines) return run_baselines(bl);
        if (*match) return run_match(match_data, match_seed, base, cap, out);
        if (*report) return run_report(results, selection_metric, out);
    } catch (const tb::Error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 2;
}
