#include "tb/harness.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <fstream>
#include <mutex>
#include <set>
#include <sstream>

#include <openssl/evp.h>
#ifdef _OPENMP
#include <omp.h>
#endif
#include <json.hpp>

#include "tb/clustering.hpp"
#include "tb/csv.hpp"
#include "tb/dataset.hpp"
#include "tb/error.hpp"
#include "tb/rng.hpp"
#include "tb/version.hpp"

namespace tb {

namespace {

constexpr const char* kNoFeatures = "-";

int default_threads()
{
#ifdef _OPENMP
    return omp_get_max_threads();
#else
    return 1;
#endif
}

bool uses_features(std::string_view classifier) { return classifier == "TAC" || classifier == "KNN"; }

bool known_classifier(std::string_view c)
{
    return c == "TAC" || c == "KNN" || c == "MVC" || c == "ERG" || c == "EWG";
}

std::string_view kind_name(FeatureSetSpec::Kind k)
{
    switch (k) {
    case FeatureSetSpec::Kind::attributes:
        return "attributes";
    case FeatureSetSpec::Kind::external:
        return "external";
    case FeatureSetSpec::Kind::combined:
        return "combined";
    case FeatureSetSpec::Kind::tfidf:
        return "tfidf";
    }
    return "attributes";
}

FeatureSetSpec::Kind parse_kind(const std::string& s)
{
    if (s == "attributes") return FeatureSetSpec::Kind::attributes;
    if (s == "external") return FeatureSetSpec::Kind::external;
    if (s == "combined") return FeatureSetSpec::Kind::combined;
    if (s == "tfidf") return FeatureSetSpec::Kind::tfidf;
    throw ConfigError("unknown feature set kind '" + s + "'");
}

std::vector<std::string> metric_names(const GameSpec& game)
{
    std::vector<std::string> names = {"Accuracy", "MAV-F1", "MWAV-F1"};
    for (const auto& prefix : {"F1-", "Precision-", "Recall-"}) {
        for (const auto& a : game.actions) names.push_back(prefix + a);
    }
    return names;
}

// Writes metric values in metric_names() order.
void write_scores(const std::vector<ClassScores>& per_class, const SummaryScores& s, double* out)
{
    const std::size_t m = per_class.size();
    out[0] = s.accuracy;
    out[1] = s.mav_f1;
    out[2] = s.mwav_f1;
    for (std::size_t a = 0; a < m; ++a) {
        out[3 + a] = per_class[a].f1;
        out[3 + m + a] = per_class[a].precision;
        out[3 + 2 * m + a] = per_class[a].recall;
    }
}

enum class CellKind { tac, knn, mvc };

struct Cell {
    CellKind kind;
    std::size_t game;      // index into Context::games
    std::size_t features;  // index into Context::feature_names
    int hyper;
    std::size_t offset;
    std::uint64_t seed_key;  // classifier/feature-set/game tag for stream derivation
};

struct Context {
    const ExperimentConfig* config = nullptr;
    std::size_t n = 0;
    std::size_t test_size = 0;
    std::vector<const GameSpec*> games;
    std::vector<std::vector<ActionIndex>> labels;
    std::vector<std::string> feature_names;
    std::vector<std::vector<ClusterAssignment>> cuts;  // [feature][k - k_lo]
    std::vector<Matrix> sq_dist;                       // [feature], only for K-NN
    std::vector<Cell> cells;
    std::size_t slots = 0;
    std::size_t knn_max = 0;
    bool any_knn = false;
    ResultTable layout;  // rows with metric names; values filled at the end
    std::vector<std::size_t> row_cell;  // row -> cell index, or npos for expected-score rows
};

Context prepare(const ExperimentConfig& config,
                const Dataset& dataset,
                const std::map<std::string, FeatureMatrix>& features,
                RunStats* stats)
{
    config.validate();
    dataset.validate();

    Context ctx;
    ctx.config = &config;
    ctx.n = dataset.size();
    ctx.test_size = test_size_for(ctx.n, config.train_fraction);
    if (ctx.test_size < 1 || ctx.test_size >= ctx.n) {
        throw ConfigError("train fraction leaves an empty train or test set for n = " + std::to_string(ctx.n));
    }

    for (const auto& g : config.games) {
        const std::size_t gi = [&] {
            try {
                return dataset.game_index(g);
            } catch (const ArgumentError&) {
                throw ConfigError("configured game '" + g + "' is not in the dataset");
            }
        }();
        ctx.games.push_back(&dataset.games[gi]);
        ctx.labels.push_back(dataset.labels(gi));
        parse_metric(config.selection_metric, dataset.games[gi]);
    }

    const bool any_tac = std::find(config.classifiers.begin(), config.classifiers.end(), "TAC") != config.classifiers.end();
    ctx.any_knn = std::find(config.classifiers.begin(), config.classifiers.end(), "KNN") != config.classifiers.end();
    const bool feature_based = any_tac || ctx.any_knn;

    if (feature_based) {
        for (const auto& name : config.feature_sets) {
            auto it = features.find(name);
            if (it == features.end()) throw ConfigError("configuration references missing feature set '" + name + "'");
            const FeatureMatrix& fm = it->second;
            if (fm.rows() != ctx.n) throw ConfigError("feature set '" + name + "' has " + std::to_string(fm.rows()) + " rows, dataset has " + std::to_string(ctx.n));
            for (std::size_t i = 0; i < ctx.n; ++i) {
                if (fm.row_ids[i] != dataset.participants[i].id) {
                    throw AlignmentError("feature set '" + name + "' is not aligned with the participant order");
                }
            }
            ctx.feature_names.push_back(name);
            std::vector<ClusterAssignment> cuts;
            if (any_tac) {
                if (config.k_range.hi > static_cast<int>(ctx.n)) throw ConfigError("k range exceeds the participant count");
                const Dendrogram dendro = ward_linkage(fm);
                if (stats) {
                    ++stats->linkage_calls;
                    stats->dendrogram_digests[name] = dendro.digest();
                }
                for (int k = config.k_range.lo; k <= config.k_range.hi; ++k) cuts.push_back(cut(dendro, static_cast<std::size_t>(k)));
            }
            ctx.cuts.push_back(std::move(cuts));
            ctx.sq_dist.push_back(ctx.any_knn ? pairwise_sq_dist(fm) : Matrix{});
        }
    }
    if (ctx.any_knn) {
        ctx.knn_max = static_cast<std::size_t>(config.K_range.hi);
        if (ctx.knn_max > ctx.n - ctx.test_size) throw ConfigError("K range exceeds the train set size");
    }
    if (stats) stats->test_size = ctx.test_size;

    constexpr std::size_t npos = static_cast<std::size_t>(-1);
    for (std::size_t g = 0; g < ctx.games.size(); ++g) {
        const GameSpec& game = *ctx.games[g];
        const auto names = metric_names(game);
        auto add_row = [&](const std::string& classifier, const std::string& fs, int hyper, std::size_t reps) {
            ResultRow row;
            row.classifier = classifier;
            row.feature_set = fs;
            row.game = game.name;
            row.hyperparam = hyper;
            row.repetitions = reps;
            for (const auto& m : names) row.metrics.emplace_back(m, 0.0);
            ctx.layout.rows.push_back(std::move(row));
        };
        auto add_cell = [&](CellKind kind, const std::string& classifier, std::size_t f, int hyper) {
            const std::string fs = kind == CellKind::mvc ? kNoFeatures : ctx.feature_names[f];
            add_row(classifier, fs, hyper, static_cast<std::size_t>(config.repetitions));
            ctx.row_cell.push_back(ctx.cells.size());
            ctx.cells.push_back({kind, g, f, hyper, ctx.slots,
                                 derive_seed(hash_name(classifier), {hash_name(fs), hash_name(game.name)})});
            ctx.slots += names.size();
        };

        for (const auto& c : config.classifiers) {
            if (c == "TAC") {
                for (std::size_t f = 0; f < ctx.feature_names.size(); ++f) {
                    for (int k = config.k_range.lo; k <= config.k_range.hi; ++k) add_cell(CellKind::tac, c, f, k);
                }
            } else if (c == "KNN") {
                for (std::size_t f = 0; f < ctx.feature_names.size(); ++f) {
                    for (int K = config.K_range.lo; K <= config.K_range.hi; ++K) add_cell(CellKind::knn, c, f, K);
                }
            } else if (c == "MVC") {
                add_cell(CellKind::mvc, c, 0, 0);
            } else {
                // Expected scores from whole-data class proportions.
                std::vector<long> counts(game.action_count(), 0);
                for (auto l : ctx.labels[g]) ++counts[static_cast<std::size_t>(l)];
                const auto table = expected_scores_plug_in(proportions_from_counts(counts),
                                                           c == "ERG" ? RandomGuess::uniform : RandomGuess::weighted);
                add_row(c, kNoFeatures, 0, 0);
                std::vector<double> values(names.size());
                write_scores(table.per_class, table.summary, values.data());
                for (std::size_t m = 0; m < names.size(); ++m) ctx.layout.rows.back().metrics[m].second = values[m];
                ctx.row_cell.push_back(npos);
            }
        }
    }
    return ctx;
}

void evaluate_repetition(const Context& ctx, std::size_t r, double* out)
{
    const ExperimentConfig& config = *ctx.config;
    const auto test = repetition_test_indices(config.master_seed, r, ctx.n, ctx.test_size);

    std::vector<LabeledSplit> splits;
    splits.reserve(ctx.games.size());
    splits.emplace_back(ctx.labels[0], test);
    for (std::size_t g = 1; g < ctx.games.size(); ++g) splits.push_back(splits[0].relabeled(ctx.labels[g]));

    std::vector<std::vector<std::vector<std::size_t>>> neighbors(ctx.feature_names.size());
    if (ctx.any_knn) {
        for (std::size_t f = 0; f < ctx.feature_names.size(); ++f) {
            neighbors[f] = nearest_train_neighbors(ctx.sq_dist[f], splits[0], ctx.knn_max);
        }
    }

    for (const Cell& cell : ctx.cells) {
        const LabeledSplit& split = splits[cell.game];
        const std::size_t m = ctx.games[cell.game]->action_count();
        Rng rng(derive_seed(config.master_seed, {r, cell.seed_key, static_cast<std::uint64_t>(cell.hyper)}));
        Prediction pred;
        switch (cell.kind) {
        case CellKind::tac:
            pred = tac_predict(ctx.cuts[cell.features][static_cast<std::size_t>(cell.hyper - config.k_range.lo)], split, m, rng,
                               config.tac);
            break;
        case CellKind::knn:
            pred = knn_vote(neighbors[cell.features], split, m, static_cast<std::size_t>(cell.hyper), rng);
            break;
        case CellKind::mvc:
            pred = mvc_predict(split, m, config.mvc_scope);
            break;
        }
        const ConfusionMatrix cm = score(pred, split, m);
        write_scores(per_class_prf(cm), aggregate(cm), out + cell.offset);
    }
}

ResultTable finish(Context& ctx, const std::vector<double>& sums)
{
    ResultTable table = std::move(ctx.layout);
    const double reps = static_cast<double>(ctx.config->repetitions);
    for (std::size_t i = 0; i < table.rows.size(); ++i) {
        const std::size_t c = ctx.row_cell[i];
        if (c == static_cast<std::size_t>(-1)) continue;
        const std::size_t offset = ctx.cells[c].offset;
        auto& metrics = table.rows[i].metrics;
        for (std::size_t m = 0; m < metrics.size(); ++m) metrics[m].second = sums[offset + m] / reps;
    }
    return table;
}

}  // namespace

// ---- config ----------------------------------------------------------------

void ExperimentConfig::validate() const
{
    if (repetitions < 1) throw ConfigError("repetitions must be at least 1");
    if (!(train_fraction > 0.0 && train_fraction < 1.0)) throw ConfigError("train_fraction must be in (0, 1)");
    if (k_range.lo < 1 || k_range.lo > k_range.hi) throw ConfigError("k_range must be a nonempty range of positive integers");
    if (K_range.lo < 1 || K_range.lo > K_range.hi) throw ConfigError("K_range must be a nonempty range of positive integers");
    if (games.empty()) throw ConfigError("no games configured");
    std::set<std::string> seen;
    for (const auto& c : classifiers) {
        if (!known_classifier(c)) throw ConfigError("unknown classifier '" + c + "'");
        if (!seen.insert(c).second) throw ConfigError("classifier '" + c + "' listed twice");
    }
    const bool feature_based = std::any_of(classifiers.begin(), classifiers.end(), [](const auto& c) { return uses_features(c); });
    if (feature_based && feature_sets.empty()) throw ConfigError("TAC/KNN configured without feature sets");
    std::set<std::string> fs(feature_sets.begin(), feature_sets.end());
    if (fs.size() != feature_sets.size()) throw ConfigError("feature set listed twice");
    std::set<std::string> gs(games.begin(), games.end());
    if (gs.size() != games.size()) throw ConfigError("game listed twice");
}

ExperimentConfig parse_config(std::string_view json_text, const std::filesystem::path& base_dir)
{
    nlohmann::json doc;
    try {
        doc = nlohmann::json::parse(json_text);
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("config: ") + e.what());
    }
    if (!doc.is_object()) throw ConfigError("config: top level must be an object");

    static const std::set<std::string> known = {
        "repetitions", "train_fraction", "k_range", "K_range", "classifiers", "feature_sets", "games", "master_seed",
        "selection_metric", "mvc_scope", "tie_over_tied_labels", "tie_draw_per_cluster", "participants", "attributes",
        "raw_scale", "games_file"};
    for (const auto& [key, value] : doc.items()) {
        if (!known.contains(key)) throw ConfigError("config: unknown key '" + key + "'");
    }

    auto resolve = [&](const std::string& p) -> std::filesystem::path {
        std::filesystem::path path(p);
        if (p.empty() || path.is_absolute() || base_dir.empty()) return path;
        return base_dir / path;
    };
    auto range = [](const nlohmann::json& j, const char* key) {
        if (!j.is_array() || j.size() != 2) throw ConfigError(std::string("config: ") + key + " must be [lo, hi]");
        return IntRange{j[0].get<int>(), j[1].get<int>()};
    };

    ExperimentConfig c;
    try {
        if (doc.contains("repetitions")) c.repetitions = doc["repetitions"].get<int>();
        if (doc.contains("train_fraction")) c.train_fraction = doc["train_fraction"].get<double>();
        if (doc.contains("k_range")) c.k_range = range(doc["k_range"], "k_range");
        if (doc.contains("K_range")) c.K_range = range(doc["K_range"], "K_range");
        if (doc.contains("classifiers")) c.classifiers = doc["classifiers"].get<std::vector<std::string>>();
        if (doc.contains("games")) c.games = doc["games"].get<std::vector<std::string>>();
        if (doc.contains("master_seed")) c.master_seed = doc["master_seed"].get<std::uint64_t>();
        if (doc.contains("selection_metric")) c.selection_metric = doc["selection_metric"].get<std::string>();
        if (doc.contains("mvc_scope")) {
            const auto s = doc["mvc_scope"].get<std::string>();
            if (s == "whole") c.mvc_scope = MvcScope::whole_data;
            else if (s == "train") c.mvc_scope = MvcScope::train_only;
            else throw ConfigError("config: mvc_scope must be 'whole' or 'train'");
        }
        if (doc.contains("tie_over_tied_labels")) c.tac.tie_over_tied_labels = doc["tie_over_tied_labels"].get<bool>();
        if (doc.contains("tie_draw_per_cluster")) c.tac.draw_per_cluster = doc["tie_draw_per_cluster"].get<bool>();
        if (doc.contains("participants")) c.participants = resolve(doc["participants"].get<std::string>());
        if (doc.contains("attributes")) c.attributes = resolve(doc["attributes"].get<std::string>());
        if (doc.contains("raw_scale")) c.raw_scale = doc["raw_scale"].get<bool>();
        if (doc.contains("games_file")) c.games_file = resolve(doc["games_file"].get<std::string>());
        if (doc.contains("feature_sets")) {
            c.feature_sets.clear();
            for (const auto& fs : doc["feature_sets"]) {
                if (fs.is_string()) {
                    c.feature_sets.push_back(fs.get<std::string>());
                    continue;
                }
                FeatureSetSpec spec;
                spec.name = fs.at("name").get<std::string>();
                spec.kind = parse_kind(fs.value("kind", std::string("attributes")));
                if (fs.contains("path")) spec.path = resolve(fs["path"].get<std::string>());
                if (fs.contains("stopwords")) spec.stopwords = resolve(fs["stopwords"].get<std::string>());
                if ((spec.kind == FeatureSetSpec::Kind::external || spec.kind == FeatureSetSpec::Kind::combined) && spec.path.empty()) {
                    throw ConfigError("config: feature set '" + spec.name + "' needs a path");
                }
                c.feature_sets.push_back(spec.name);
                c.feature_set_specs.push_back(std::move(spec));
            }
        }
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("config: ") + e.what());
    }
    c.validate();
    return c;
}

ExperimentConfig load_config(const std::filesystem::path& path)
{
    std::ifstream in(path);
    if (!in) throw IoError("cannot open " + path.string());
    std::stringstream buf;
    buf << in.rdbuf();
    return parse_config(buf.str(), path.parent_path());
}

std::string config_to_json(const ExperimentConfig& c)
{
    nlohmann::ordered_json fs = nlohmann::ordered_json::array();
    for (const auto& name : c.feature_sets) {
        auto it = std::find_if(c.feature_set_specs.begin(), c.feature_set_specs.end(), [&](const auto& s) { return s.name == name; });
        if (it == c.feature_set_specs.end()) {
            fs.push_back(name);
            continue;
        }
        nlohmann::ordered_json spec = {{"name", it->name}, {"kind", kind_name(it->kind)}};
        if (!it->path.empty()) spec["path"] = it->path.string();
        if (!it->stopwords.empty()) spec["stopwords"] = it->stopwords.string();
        fs.push_back(std::move(spec));
    }
    nlohmann::ordered_json doc = {
        {"repetitions", c.repetitions},
        {"train_fraction", c.train_fraction},
        {"k_range", {c.k_range.lo, c.k_range.hi}},
        {"K_range", {c.K_range.lo, c.K_range.hi}},
        {"classifiers", c.classifiers},
        {"feature_sets", std::move(fs)},
        {"games", c.games},
        {"master_seed", c.master_seed},
        {"selection_metric", c.selection_metric},
        {"mvc_scope", c.mvc_scope == MvcScope::whole_data ? "whole" : "train"},
        {"tie_over_tied_labels", c.tac.tie_over_tied_labels},
        {"tie_draw_per_cluster", c.tac.draw_per_cluster},
        {"participants", c.participants.string()},
        {"attributes", c.attributes.string()},
        {"raw_scale", c.raw_scale},
        {"games_file", c.games_file.string()},
    };
    return doc.dump(2) + "\n";
}

std::map<std::string, FeatureMatrix> build_feature_sets(const ExperimentConfig& config, const Dataset& dataset)
{
    std::map<std::string, FeatureMatrix> out;
    for (const auto& spec : config.feature_set_specs) {
        switch (spec.kind) {
        case FeatureSetSpec::Kind::attributes:
            out.emplace(spec.name, select_attributes(dataset));
            break;
        case FeatureSetSpec::Kind::external: {
            const FeatureMatrix ext = load_feature_csv(spec.path);
            out.emplace(spec.name, select_attributes(dataset, &ext, AttributeSelection::external_only));
            break;
        }
        case FeatureSetSpec::Kind::combined: {
            const FeatureMatrix ext = load_feature_csv(spec.path);
            out.emplace(spec.name, select_attributes(dataset, &ext, AttributeSelection::combined));
            break;
        }
        case FeatureSetSpec::Kind::tfidf: {
            std::vector<std::string> ids;
            for (const auto& p : dataset.participants) ids.push_back(p.id);
            const auto texts = load_texts(dataset);
            if (spec.stopwords.empty()) {
                out.emplace(spec.name, tfidf(texts, ids).features);
            } else {
                out.emplace(spec.name, tfidf(texts, ids, load_stop_words(spec.stopwords)).features);
            }
            break;
        }
        }
    }
    return out;
}

std::size_t test_size_for(std::size_t n, double train_fraction)
{
    return static_cast<std::size_t>(std::floor((1.0 - train_fraction) * static_cast<double>(n) + 0.5));
}

std::vector<std::size_t> repetition_test_indices(std::uint64_t master_seed, std::size_t r, std::size_t n, std::size_t test_size)
{
    Rng rng(derive_seed(master_seed, {r, hash_name("split")}));
    return sample_test_indices(n, test_size, rng);
}

// ---- run -------------------------------------------------------------------

ResultTable run_experiment_serial(const ExperimentConfig& config,
                                  const Dataset& dataset,
                                  const std::map<std::string, FeatureMatrix>& features,
                                  RunStats* stats)
{
    Context ctx = prepare(config, dataset, features, stats);
    std::vector<double> sums(ctx.slots, 0.0);
    std::vector<double> values(ctx.slots);
    for (std::size_t r = 0; r < static_cast<std::size_t>(config.repetitions); ++r) {
        evaluate_repetition(ctx, r, values.data());
        for (std::size_t s = 0; s < ctx.slots; ++s) sums[s] += values[s];
    }
    return finish(ctx, sums);
}

ResultTable run_experiment(const ExperimentConfig& config,
                           const Dataset& dataset,
                           const std::map<std::string, FeatureMatrix>& features,
                           const ExecutionOptions& execution,
                           RunStats* stats)
{
    if (execution.threads == 1) return run_experiment_serial(config, dataset, features, stats);

    Context ctx = prepare(config, dataset, features, stats);
    const std::size_t reps = static_cast<std::size_t>(config.repetitions);
    constexpr std::size_t kBlock = 256;
    std::vector<double> sums(ctx.slots, 0.0);
    std::vector<double> block(kBlock * ctx.slots);
    std::exception_ptr failure;
    std::mutex failure_mutex;

    for (std::size_t start = 0; start < reps; start += kBlock) {
        const std::size_t count = std::min(kBlock, reps - start);
        const int threads = execution.threads > 0 ? execution.threads : default_threads();
#pragma omp parallel for schedule(dynamic) num_threads(threads)
        for (std::ptrdiff_t j = 0; j < static_cast<std::ptrdiff_t>(count); ++j) {
            try {
                evaluate_repetition(ctx, start + static_cast<std::size_t>(j), block.data() + static_cast<std::size_t>(j) * ctx.slots);
            } catch (...) {
                std::lock_guard lock(failure_mutex);
                if (!failure) failure = std::current_exception();
            }
        }
        if (failure) std::rethrow_exception(failure);
        // Reduce in repetition order so the sums match the serial path bit for bit.
        for (std::size_t j = 0; j < count; ++j) {
            const double* v = block.data() + j * ctx.slots;
            for (std::size_t s = 0; s < ctx.slots; ++s) sums[s] += v[s];
        }
    }
    return finish(ctx, sums);
}

// ---- tables ----------------------------------------------------------------

std::optional<double> ResultRow::metric(std::string_view name) const
{
    for (const auto& [m, v] : metrics) {
        if (m == name) return v;
    }
    return std::nullopt;
}

const ResultRow* ResultTable::find(std::string_view classifier, std::string_view feature_set, std::string_view game, int hyperparam) const
{
    for (const auto& r : rows) {
        if (r.classifier == classifier && r.feature_set == feature_set && r.game == game && r.hyperparam == hyperparam) return &r;
    }
    return nullptr;
}

bool ResultTable::operator==(const ResultTable& o) const
{
    if (rows.size() != o.rows.size()) return false;
    for (std::size_t i = 0; i < rows.size(); ++i) {
        const auto& a = rows[i];
        const auto& b = o.rows[i];
        if (a.classifier != b.classifier || a.feature_set != b.feature_set || a.game != b.game ||
            a.hyperparam != b.hyperparam || a.repetitions != b.repetitions || a.metrics != b.metrics) {
            return false;
        }
    }
    return true;
}

Selection select_best_median(const ResultTable& table,
                             std::string_view classifier,
                             std::string_view feature_set,
                             std::string_view game,
                             std::string_view selection_metric)
{
    std::vector<std::pair<double, const ResultRow*>> candidates;
    for (const auto& r : table.rows) {
        if (r.classifier != classifier || r.feature_set != feature_set || r.game != game) continue;
        auto v = r.metric(selection_metric);
        if (!v) throw ArgumentError("row lacks selection metric '" + std::string(selection_metric) + "'");
        candidates.emplace_back(*v, &r);
    }
    if (candidates.empty()) {
        throw ArgumentError("no rows for " + std::string(classifier) + "/" + std::string(feature_set) + "/" + std::string(game));
    }
    std::sort(candidates.begin(), candidates.end(), [](const auto& a, const auto& b) {
        return a.first < b.first || (a.first == b.first && a.second->hyperparam < b.second->hyperparam);
    });
    Selection s;
    // Highest value; among equal values the smallest hyper-parameter.
    const double top = candidates.back().first;
    const auto best = std::find_if(candidates.begin(), candidates.end(), [&](const auto& c) { return c.first == top; });
    s.best = best->second;
    s.best_hyperparam = s.best->hyperparam;
    s.median = candidates[(candidates.size() - 1) / 2].second;
    s.median_hyperparam = s.median->hyperparam;
    return s;
}

namespace {

struct Group {
    std::string classifier, feature_set, game;
};

std::vector<Group> groups_of(const ResultTable& table)
{
    std::vector<Group> out;
    for (const auto& r : table.rows) {
        const bool seen = std::any_of(out.begin(), out.end(), [&](const Group& g) {
            return g.classifier == r.classifier && g.feature_set == r.feature_set && g.game == r.game;
        });
        if (!seen) out.push_back({r.classifier, r.feature_set, r.game});
    }
    return out;
}

std::ofstream open_out(const std::filesystem::path& path)
{
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write " + path.string());
    return out;
}

std::string fixed(double v) { return csv::format_fixed(v, 4); }

void write_table3(const ResultTable& table,
                  const std::vector<Group>& groups,
                  const std::filesystem::path& path,
                  std::string_view selection_metric,
                  bool median)
{
    auto out = open_out(path);
    out << "classifier,feature_set,game,hyperparam,Accuracy,MAV-F1,MWAV-F1\n";
    for (const auto& g : groups) {
        const Selection s = select_best_median(table, g.classifier, g.feature_set, g.game, selection_metric);
        const ResultRow& r = median ? *s.median : *s.best;
        out << csv::join({r.classifier, r.feature_set, r.game, std::to_string(r.hyperparam), fixed(r.metric("Accuracy").value_or(0)),
                          fixed(r.metric("MAV-F1").value_or(0)), fixed(r.metric("MWAV-F1").value_or(0))})
            << '\n';
    }
    if (!out) throw IoError("write failed: " + path.string());
}

}  // namespace

std::vector<std::filesystem::path> emit_reports(const ResultTable& table,
                                                const std::filesystem::path& out_dir,
                                                const std::vector<std::string>& games,
                                                std::string_view selection_metric)
{
    std::error_code ec;
    std::filesystem::create_directories(out_dir, ec);
    if (ec) throw IoError("cannot create " + out_dir.string() + ": " + ec.message());

    std::vector<std::filesystem::path> written;
    const auto groups = groups_of(table);

    {
        const auto path = out_dir / "results.csv";
        auto out = open_out(path);
        out << "classifier,feature_set,game,hyperparam,metric,mean,repetitions\n";
        for (const auto& r : table.rows) {
            for (const auto& [m, v] : r.metrics) {
                out << csv::join({r.classifier, r.feature_set, r.game, std::to_string(r.hyperparam), m, csv::format_double(v),
                                  std::to_string(r.repetitions)})
                    << '\n';
            }
        }
        if (!out) throw IoError("write failed: " + path.string());
        written.push_back(path);
    }
    {
        const auto path = out_dir / "table2.csv";
        auto out = open_out(path);
        out << "classifier,feature_set,game,hyperparam,action,F1\n";
        for (const auto& g : groups) {
            const Selection s = select_best_median(table, g.classifier, g.feature_set, g.game, selection_metric);
            for (const auto& [m, v] : s.best->metrics) {
                if (!m.starts_with("F1-")) continue;
                out << csv::join({g.classifier, g.feature_set, g.game, std::to_string(s.best_hyperparam), m.substr(3), fixed(v)}) << '\n';
            }
        }
        if (!out) throw IoError("write failed: " + path.string());
        written.push_back(path);
    }
    written.push_back(out_dir / "table3_best.csv");
    write_table3(table, groups, written.back(), selection_metric, false);
    written.push_back(out_dir / "table3_median.csv");
    write_table3(table, groups, written.back(), selection_metric, true);

    for (const auto& game : games) {
        const auto path = out_dir / ("curves_" + game + ".csv");
        auto out = open_out(path);
        out << "classifier,feature_set,k,metric,value\n";
        std::vector<int> ks;
        for (const auto& r : table.rows) {
            if (r.game == game && r.classifier == "TAC" && std::find(ks.begin(), ks.end(), r.hyperparam) == ks.end()) {
                ks.push_back(r.hyperparam);
            }
        }
        std::sort(ks.begin(), ks.end());
        for (const auto& r : table.rows) {
            if (r.game != game) continue;
            if (r.classifier == "TAC") {
                for (const auto& [m, v] : r.metrics) {
                    out << csv::join({r.classifier, r.feature_set, std::to_string(r.hyperparam), m, fixed(v)}) << '\n';
                }
            } else if (r.hyperparam == 0) {
                // Reference lines for the baselines.
                for (int k : ks) {
                    for (const auto& [m, v] : r.metrics) {
                        out << csv::join({r.classifier, r.feature_set, std::to_string(k), m, fixed(v)}) << '\n';
                    }
                }
            }
        }
        if (!out) throw IoError("write failed: " + path.string());
        written.push_back(path);
    }
    return written;
}

ResultTable read_results_csv(const std::filesystem::path& path)
{
    const csv::Table t = csv::read(path);
    const std::string src = path.string();
    const std::size_t c = t.require("classifier", src), f = t.require("feature_set", src), g = t.require("game", src),
                      h = t.require("hyperparam", src), m = t.require("metric", src), v = t.require("mean", src),
                      n = t.require("repetitions", src);
    ResultTable table;
    for (const auto& row : t.rows) {
        const int hyper = std::stoi(row[h]);
        ResultRow* target = nullptr;
        if (!table.rows.empty()) {
            auto& last = table.rows.back();
            if (last.classifier == row[c] && last.feature_set == row[f] && last.game == row[g] && last.hyperparam == hyper) {
                target = &last;
            }
        }
        if (!target) {
            ResultRow r;
            r.classifier = row[c];
            r.feature_set = row[f];
            r.game = row[g];
            r.hyperparam = hyper;
            r.repetitions = std::stoull(row[n]);
            table.rows.push_back(std::move(r));
            target = &table.rows.back();
        }
        double value = 0.0;
        try {
            value = std::stod(row[v]);
        } catch (const std::exception&) {
            throw ValidationError(src + ": bad mean value '" + row[v] + "'");
        }
        target->metrics.emplace_back(row[m], value);
    }
    return table;
}

std::string sha256_file(const std::filesystem::path& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path.string());
    EVP_MD_CTX* md = EVP_MD_CTX_new();
    EVP_DigestInit_ex(md, EVP_sha256(), nullptr);
    char buf[1 << 15];
    while (in) {
        in.read(buf, sizeof buf);
        EVP_DigestUpdate(md, buf, static_cast<std::size_t>(in.gcount()));
    }
    unsigned char digest[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    EVP_DigestFinal_ex(md, digest, &len);
    EVP_MD_CTX_free(md);
    static const char* hex = "0123456789abcdef";
    std::string out;
    for (unsigned int i = 0; i < len; ++i) {
        out.push_back(hex[digest[i] >> 4]);
        out.push_back(hex[digest[i] & 15]);
    }
    return out;
}

void write_manifest(const std::filesystem::path& out_dir, const ExperimentConfig& config, const std::vector<std::filesystem::path>& files)
{
    nlohmann::ordered_json doc;
    doc["engine_version"] = kEngineVersion;
    doc["schema_version"] = kSchemaVersion;
    doc["build"] = kBuildDescription;
    doc["master_seed"] = config.master_seed;
    doc["config"] = nlohmann::ordered_json::parse(config_to_json(config));
    nlohmann::ordered_json listing = nlohmann::ordered_json::array();
    for (const auto& f : files) listing.push_back({{"file", f.filename().string()}, {"sha256", sha256_file(f)}});
    doc["files"] = std::move(listing);
    auto out = open_out(out_dir / "manifest.json");
    out << doc.dump(2) << '\n';
}

}  // namespace tb
