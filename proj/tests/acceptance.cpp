// Acceptance gate. Prints one line per criterion and exits nonzero if any fails.
//
//   acceptance                   criteria 1-6 on generated data
//   acceptance --public-data DIR criteria 3 and 4 on the released data set
//                                (DIR/participants.csv, DIR/attributes.csv);
//                                exits 77 when DIR is missing

#include <chrono>
#include <cmath>
#include <cstdlib>
#include <functional>
#include <iostream>
#include <sstream>

#include <sys/wait.h>

#include "support.hpp"
#include "tb/classifiers.hpp"
#include "tb/error.hpp"
#include "tb/harness.hpp"
#include "tb/rng.hpp"

using namespace tb;
namespace fs = std::filesystem;

namespace {

constexpr int kSkip = 77;

struct Outcome {
    enum Status { pass, fail, skip } status = pass;
    std::string detail;
};

class Gate {
public:
    void report(int id, const std::string& title, const Outcome& o)
    {
        static const char* names[] = {"PASS", "FAIL", "SKIP"};
        std::cout << "[" << names[o.status] << "] criterion " << id << ": " << title << " | " << o.detail << std::endl;
        failed_ |= o.status == Outcome::fail;
        skipped_ |= o.status == Outcome::skip;
    }

    void run(int id, const std::string& title, const std::function<Outcome()>& body)
    {
        try {
            report(id, title, body());
        } catch (const std::exception& e) {
            report(id, title, {Outcome::fail, std::string("exception: ") + e.what()});
        }
    }

    bool failed() const { return failed_; }
    bool skipped() const { return skipped_; }

private:
    bool failed_ = false;
    bool skipped_ = false;
};

std::string fmt(double v, int digits = 2)
{
    std::ostringstream s;
    s.setf(std::ios::fixed);
    s.precision(digits);
    s << v;
    return s.str();
}

bool near(double value, double target, double tol, std::string& detail, const std::string& name)
{
    const bool ok = std::abs(value - target) <= tol;
    detail += name + "=" + fmt(value) + (ok ? "" : "(!)") + " vs " + fmt(target) + "+-" + fmt(tol, 1) + "; ";
    return ok;
}

double seconds_since(std::chrono::steady_clock::time_point t0)
{
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

// Labels with the published per-game counts. MVC scores depend on the labels
// only through these counts, so the split distribution matches the real data.
Dataset count_matched_dataset()
{
    std::mt19937_64 gen(271);
    return tbt::make_dataset({tbt::labels_with_counts({156, 115}, gen), tbt::labels_with_counts({187, 84}, gen),
                              tbt::labels_with_counts({88, 117, 66}, gen)});
}

// ---- criterion 1 -------------------------------------------------------------

Outcome mvc_per_class_f1()
{
    const Dataset ds = count_matched_dataset();
    ExperimentConfig c;
    c.repetitions = 5000;
    c.classifiers = {"MVC"};
    c.feature_sets = {};
    const auto t0 = std::chrono::steady_clock::now();
    const ResultTable t = run_experiment(c, ds, {});
    const double elapsed = seconds_since(t0);

    auto metric = [&](const char* game, const char* name) { return *t.find("MVC", "-", game, 0)->metric(name); };
    Outcome o;
    bool ok = near(metric("chicken", "F1-Speed"), 73.07, 0.5, o.detail, "F1-Speed");
    ok &= near(metric("box", "F1-Left"), 81.66, 0.5, o.detail, "F1-Left");
    ok &= near(metric("door", "F1-B"), 60.31, 0.8, o.detail, "F1-B");
    double minority = 0;
    for (auto [g, m] : {std::pair{"chicken", "F1-Stop"}, std::pair{"box", "F1-Right"}, std::pair{"door", "F1-A"},
                        std::pair{"door", "F1-C"}}) {
        minority = std::max(minority, std::abs(metric(g, m)));
    }
    ok &= minority == 0.0;
    ok &= elapsed < 10.0;
    o.detail += "max minority F1=" + fmt(minority) + "; " + fmt(elapsed) + " s; labels with the published counts 156/115, 187/84, 88/117/66";
    o.status = ok ? Outcome::pass : Outcome::fail;
    return o;
}

// ---- criterion 2 -------------------------------------------------------------

Outcome random_baselines()
{
    const std::vector<std::vector<long>> counts = {{156, 115}, {187, 84}, {88, 117, 66}};
    const auto games = default_games();
    Outcome o;
    bool ok = true;
    const auto pc = proportions_from_counts(counts[0]);
    const auto pb = proportions_from_counts(counts[1]);
    ok &= near(expected_scores_plug_in(pc, RandomGuess::uniform).per_class[0].f1, 53.60, 1.0, o.detail, "ERG F1-Speed");
    ok &= near(expected_scores_plug_in(pc, RandomGuess::uniform).per_class[1].f1, 46.0, 1.0, o.detail, "ERG F1-Stop");
    ok &= near(expected_scores_plug_in(pc, RandomGuess::weighted).per_class[0].f1, 57.23, 1.0, o.detail, "EWG F1-Speed");
    ok &= near(expected_scores_plug_in(pb, RandomGuess::weighted).per_class[0].f1, 69.33, 1.0, o.detail, "EWG F1-Left");

    double worst = 0;
    std::string worst_name;
    for (std::size_t g = 0; g < 3; ++g) {
        const auto p = proportions_from_counts(counts[g]);
        for (auto mode : {RandomGuess::uniform, RandomGuess::weighted}) {
            const auto plug = expected_scores_plug_in(p, mode);
            const auto mc = expected_scores_monte_carlo(p, mode, {100000, 27, derive_seed(2, {g})});
            auto track = [&](double a, double b, const std::string& name) {
                if (std::abs(a - b) > worst) {
                    worst = std::abs(a - b);
                    worst_name = std::string(mode == RandomGuess::uniform ? "ERG " : "EWG ") + games[g].name + " " + name;
                }
            };
            track(plug.summary.accuracy, mc.summary.accuracy, "Accuracy");
            track(plug.summary.mav_f1, mc.summary.mav_f1, "MAV-F1");
            track(plug.summary.mwav_f1, mc.summary.mwav_f1, "MWAV-F1");
            for (std::size_t a = 0; a < p.size(); ++a) {
                track(plug.per_class[a].f1, mc.per_class[a].f1, "F1-" + games[g].actions[a]);
                track(plug.per_class[a].precision, mc.per_class[a].precision, "Precision-" + games[g].actions[a]);
                track(plug.per_class[a].recall, mc.per_class[a].recall, "Recall-" + games[g].actions[a]);
            }
        }
    }
    ok &= worst <= 1.5;
    o.detail += "Monte Carlo (1e5 trials, test size 27) max |MC - plug-in| = " + fmt(worst, 3) + " (" + worst_name + "), limit 1.5";
    o.status = ok ? Outcome::pass : Outcome::fail;
    return o;
}

// ---- criterion 3 fallback ----------------------------------------------------

fs::path source_dir() { return fs::path(TB_SOURCE_DIR); }

int run_cli(const std::string& args)
{
    const std::string cmd = std::string("\"") + TB_CLI_PATH + "\" " + args + " > /dev/null";
    const int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

Outcome frozen_regression()
{
    Outcome o;
    const fs::path out = tbt::temp_dir("acceptance_frozen");
    const int rc = run_cli("evaluate --config \"" + (source_dir() / "configs" / "fixture.json").string() + "\" --out \"" +
                           out.string() + "\"");
    if (rc != 0) return {Outcome::fail, "evaluate exited with " + std::to_string(rc)};
    bool ok = true;
    for (const char* name : {"table3_best.csv", "table3_median.csv", "table2.csv"}) {
        const bool same = tbt::read_file(out / name) == tbt::read_file(source_dir() / "tests" / "data" / "frozen" / name);
        o.detail += std::string(name) + (same ? " identical; " : " DIFFERS; ");
        ok &= same;
    }

    // separable fixture: TAC at the true k is exact
    std::mt19937_64 gen(3);
    std::normal_distribution<double> noise(0.0, 0.01);
    Matrix x(12, 4);
    for (std::size_t i = 0; i < 12; ++i) {
        for (std::size_t c = 0; c < 4; ++c) x(i, c) = (c == i / 4 ? 0.9 : 0.1) + noise(gen);
    }
    std::vector<std::vector<int>> labels(3, std::vector<int>(12));
    const int per_group[3][3] = {{0, 0, 0}, {1, 0, 1}, {0, 1, 2}};
    for (std::size_t i = 0; i < 12; ++i) {
        for (std::size_t g = 0; g < 3; ++g) labels[g][i] = per_group[i / 4][g];
    }
    const Dataset ds = tbt::make_dataset(labels);
    std::map<std::string, FeatureMatrix> features;
    features.emplace("sep", tbt::as_features(ds, x));
    ExperimentConfig c;
    c.repetitions = 500;
    c.train_fraction = 0.75;
    c.k_range = {3, 3};
    c.classifiers = {"TAC"};
    c.feature_sets = {"sep"};
    const auto t = run_experiment(c, ds, features);
    bool exact = true;
    for (const auto& row : t.rows) exact &= *row.metric("Accuracy") == 100.0 && *row.metric("MWAV-F1") == 100.0;
    o.detail += exact ? "separable 12-participant fixture: Accuracy = MWAV-F1 = 100 at k=3; " : "separable fixture NOT exact; ";
    ok &= exact;
    o.detail += "released data unavailable here, replaced by the criterion 5 suite and this frozen regression";
    o.status = ok ? Outcome::pass : Outcome::fail;
    return o;
}

// ---- criterion 5 -------------------------------------------------------------

double chi2_p_value_2dof(double x) { return std::exp(-x / 2.0); }

Outcome property_suite()
{
    Outcome o;
    bool ok = true;
    std::mt19937_64 gen(5);

    // Ward oracle
    int ward_bad = 0;
    for (int trial = 0; trial < 200; ++trial) {
        const std::size_t n = 2 + gen() % 39;
        const std::size_t d = 1 + gen() % 8;
        const Matrix m = tbt::random_matrix(gen, n, d);
        std::vector<std::vector<std::size_t>> expected;
        tbt::naive_ward(m, &expected);
        const auto dendro = ward_linkage(m);
        for (std::size_t k = 1; k <= n; ++k) {
            if (!tbt::same_partition(cut(dendro, k).label_of, expected[k])) {
                ++ward_bad;
                break;
            }
        }
    }
    ok &= ward_bad == 0;
    o.detail += "Ward oracle 200 instances, " + std::to_string(ward_bad) + " mismatches; ";

    // monotone heights, nested cuts
    int shape_bad = 0;
    for (int trial = 0; trial < 1000; ++trial) {
        const std::size_t n = 1 + gen() % 40;
        const std::size_t d = 1 + gen() % 8;
        Matrix m = tbt::random_matrix(gen, n, d);
        if (n > 2 && trial % 4 == 0) {
            for (std::size_t c = 0; c < d; ++c) m(1, c) = m(0, c);
        }
        const auto dendro = ward_linkage(m);
        bool good = true;
        for (std::size_t s = 1; s < dendro.merges.size(); ++s) good &= dendro.merges[s].height >= dendro.merges[s - 1].height;
        auto prev = cut(dendro, n);
        for (std::size_t k = n; k-- > 1 && good;) {
            const auto cur = cut(dendro, k);
            std::map<std::uint32_t, std::uint32_t> parent;
            for (std::size_t i = 0; i < n; ++i) {
                auto [it, inserted] = parent.emplace(prev.label_of[i], cur.label_of[i]);
                good &= it->second == cur.label_of[i];
            }
            prev = cur;
        }
        shape_bad += !good;
    }
    ok &= shape_bad == 0;
    o.detail += "monotonicity/nesting 1000 instances, " + std::to_string(shape_bad) + " violations; ";

    // TAC k = 1 is the train majority
    int tac1_bad = 0, tac1_checked = 0;
    for (int trial = 0; trial < 500; ++trial) {
        const std::size_t n = 4 + gen() % 60;
        const std::size_t actions = 2 + gen() % 2;
        std::vector<ActionIndex> labels(n);
        for (auto& l : labels) l = static_cast<ActionIndex>(gen() % actions);
        Rng srng(gen());
        LabeledSplit split(labels, sample_test_indices(n, 1 + gen() % (n / 2), srng));
        std::vector<int> counts(actions, 0);
        for (auto i : split.train()) ++counts[static_cast<std::size_t>(labels[i])];
        const int top = *std::max_element(counts.begin(), counts.end());
        if (std::count(counts.begin(), counts.end(), top) > 1) continue;
        ClusterAssignment one{1, std::vector<std::uint32_t>(n, 0)};
        Rng rng(gen());
        ++tac1_checked;
        tac1_bad += tac_predict(one, split, actions, rng).predicted != mvc_predict(split, actions, MvcScope::train_only).predicted;
    }
    ok &= tac1_bad == 0;
    o.detail += "TAC(k=1) = train majority on " + std::to_string(tac1_checked) + " splits, " + std::to_string(tac1_bad) + " differ; ";

    // TAC k = n guesses uniformly over the actions
    const std::size_t n = 271;
    ClusterAssignment singletons{n, std::vector<std::uint32_t>(n)};
    for (std::size_t i = 0; i < n; ++i) singletons.label_of[i] = static_cast<std::uint32_t>(i);
    std::vector<ActionIndex> door_labels(n, 1);
    std::vector<double> freq(3, 0);
    const int draws = 10000;
    for (int s = 0; s < draws; ++s) {
        Rng srng(derive_seed(77, {static_cast<std::uint64_t>(s), 0}));
        LabeledSplit split(door_labels, sample_test_indices(n, 27, srng));
        Rng rng(derive_seed(77, {static_cast<std::uint64_t>(s), 1}));
        ++freq[static_cast<std::size_t>(tac_predict(singletons, split, 3, rng).predicted[0])];
    }
    double chi2 = 0;
    for (double f : freq) chi2 += (f - draws / 3.0) * (f - draws / 3.0) / (draws / 3.0);
    const double p = chi2_p_value_2dof(chi2);
    ok &= p > 0.001;
    o.detail += "TAC(k=n) chi-square p=" + fmt(p, 3) + "; ";

    // metric conventions and confusion oracle
    int metric_bad = 0;
    for (int trial = 0; trial < 500; ++trial) {
        const std::size_t m = 2 + gen() % 3;
        const std::size_t len = 1 + gen() % 50;
        std::vector<int> actual(len), predicted(len);
        for (std::size_t i = 0; i < len; ++i) {
            actual[i] = static_cast<int>(gen() % m);
            predicted[i] = static_cast<int>(gen() % m);
        }
        const auto cm = confusion(actual, predicted, m);
        const auto pc = per_class_prf(cm);
        const auto s = aggregate(cm);
        const auto oracle = tbt::naive_scores(actual, predicted, m);
        auto same = [](double a, double b) { return std::abs(a - b) <= 1e-9 * std::max(1.0, std::abs(b)); };
        bool good = same(s.accuracy, oracle.accuracy) && same(s.mav_f1, oracle.mav) && same(s.mwav_f1, oracle.mwav);
        for (std::size_t c = 0; c < m; ++c) {
            good &= same(pc[c].precision, oracle.precision[c]) && same(pc[c].recall, oracle.recall[c]) && same(pc[c].f1, oracle.f1[c]);
            for (double v : {pc[c].precision, pc[c].recall, pc[c].f1}) good &= v >= 0 && v <= 100;
        }
        for (double v : {s.accuracy, s.mav_f1, s.mwav_f1}) good &= v >= 0 && v <= 100;

        // balanced version of the same instance
        std::vector<int> bal_actual, bal_pred;
        for (std::size_t c = 0; c < m; ++c) {
            for (int j = 0; j < 4; ++j) {
                bal_actual.push_back(static_cast<int>(c));
                bal_pred.push_back(static_cast<int>(gen() % m));
            }
        }
        const auto bal = aggregate(confusion(bal_actual, bal_pred, m));
        good &= same(bal.mav_f1, bal.mwav_f1);
        metric_bad += !good;
    }
    ok &= metric_bad == 0;
    o.detail += "confusion oracle and metric conventions 500 instances, " + std::to_string(metric_bad) + " failures; ";

    // determinism through the CLI
    const fs::path config = source_dir() / "configs" / "fixture.json";
    std::vector<fs::path> runs;
    for (const char* threads : {"1", "8", "1"}) {
        runs.push_back(tbt::temp_dir(std::string("acceptance_det_") + std::to_string(runs.size())));
        if (run_cli("evaluate --config \"" + config.string() + "\" --seed 7 --threads " + threads + " --out \"" +
                    runs.back().string() + "\"") != 0) {
            ok = false;
            o.detail += "evaluate failed; ";
        }
    }
    std::size_t compared = 0, differing = 0;
    for (const auto& entry : fs::directory_iterator(runs[0])) {
        const auto name = entry.path().filename();
        const std::string a = tbt::read_file(runs[0] / name);
        for (std::size_t r = 1; r < runs.size(); ++r) differing += tbt::read_file(runs[r] / name) != a;
        ++compared;
    }
    ok &= compared >= 8 && differing == 0;
    o.detail += "evaluate x3 (threads 1, 8, 1): " + std::to_string(compared) + " files, " + std::to_string(differing) + " differ";
    o.status = ok ? Outcome::pass : Outcome::fail;
    return o;
}

// ---- criterion 6 -------------------------------------------------------------

Outcome performance()
{
    std::mt19937_64 gen(6);
    const Matrix x = tbt::random_matrix(gen, 271, 24, true);
    const Dataset ds = tbt::make_dataset({tbt::labels_with_counts({156, 115}, gen), tbt::labels_with_counts({187, 84}, gen),
                                          tbt::labels_with_counts({88, 117, 66}, gen)},
                                         &x);
    std::map<std::string, FeatureMatrix> features;
    features.emplace("ours24", select_attributes(ds));
    ExperimentConfig c;  // defaults: 5000 reps, k 2..30, K 1..5, TAC/KNN/MVC/ERG/EWG, three games
    RunStats stats;
    const auto calls_before = linkage_call_count();
    const auto t0 = std::chrono::steady_clock::now();
    const auto table = run_experiment(c, ds, features, {}, &stats);
    const double elapsed = seconds_since(t0);
    const auto calls = linkage_call_count() - calls_before;
    Outcome o;
    const bool ok = elapsed < 60.0 && calls == 1 && stats.linkage_calls == 1 && table.rows.size() == 3 * (29 + 5 + 3);
    o.detail = "n=271 d=24, 5000 reps, " + std::to_string(table.rows.size()) + " result rows in " + fmt(elapsed) +
               " s (limit 60); ward_linkage calls=" + std::to_string(calls) + " for 1 feature set";
    o.status = ok ? Outcome::pass : Outcome::fail;
    return o;
}

// ---- released data -----------------------------------------------------------

int public_data(const fs::path& dir)
{
    Gate gate;
    if (!fs::exists(dir / "participants.csv") || !fs::exists(dir / "attributes.csv")) {
        const std::string why = "released data set not found at " + dir.string();
        gate.report(3, "TAC headline on the released data", {Outcome::skip, why});
        gate.report(4, "qualitative orderings on the released data", {Outcome::skip, why});
        return kSkip;
    }
    const Dataset ds = load_dataset(dir / "participants.csv", dir / "attributes.csv");
    std::map<std::string, FeatureMatrix> features;
    features.emplace("ours24", select_attributes(ds));
    ExperimentConfig c;
    c.classifiers = {"TAC", "MVC"};
    const auto table = run_experiment(c, ds, features);

    gate.run(3, "TAC headline on the released data", [&] {
        Outcome o;
        const auto sel = select_best_median(table, "TAC", "ours24", "chicken");
        o.detail = "best k=" + std::to_string(sel.best_hyperparam) + "; ";
        bool ok = near(*sel.best->metric("Accuracy"), 61.2, 2.0, o.detail, "Accuracy");
        ok &= near(*sel.best->metric("MAV-F1"), 57.82, 2.0, o.detail, "MAV-F1");
        ok &= near(*sel.best->metric("MWAV-F1"), 60.05, 2.0, o.detail, "MWAV-F1");
        o.status = ok ? Outcome::pass : Outcome::fail;
        return o;
    });
    gate.run(4, "qualitative orderings on the released data", [&] {
        Outcome o;
        bool ok = true;
        for (const char* g : {"chicken", "box", "door"}) {
            const double tac = *select_best_median(table, "TAC", "ours24", g).best->metric("MAV-F1");
            const double mvc = *table.find("MVC", "-", g, 0)->metric("MAV-F1");
            o.detail += std::string(g) + " MAV-F1 TAC " + fmt(tac) + " vs MVC " + fmt(mvc) + "; ";
            ok &= tac > mvc;
        }
        const double mvc_chicken = *table.find("MVC", "-", "chicken", 0)->metric("Accuracy");
        bool some_k = false;
        for (int k = 10; k <= 30; ++k) some_k |= *table.find("TAC", "ours24", "chicken", k)->metric("Accuracy") > mvc_chicken;
        o.detail += std::string("chicken TAC Accuracy > MVC at some k>=10: ") + (some_k ? "yes" : "no") + "; ";
        ok &= some_k;
        const double mvc_door = *table.find("MVC", "-", "door", 0)->metric("Accuracy");
        bool mvc_wins = true;
        for (int k = 2; k <= 30; ++k) mvc_wins &= mvc_door > *table.find("TAC", "ours24", "door", k)->metric("Accuracy");
        o.detail += std::string("door MVC Accuracy above TAC at every k: ") + (mvc_wins ? "yes" : "no");
        ok &= mvc_wins;
        o.status = ok ? Outcome::pass : Outcome::fail;
        return o;
    });
    return gate.failed() ? 1 : 0;
}

}  // namespace

int main(int argc, char** argv)
{
    if (argc >= 2 && std::string(argv[1]) == "--public-data") {
        fs::path dir;
        if (argc >= 3) dir = argv[2];
        else if (const char* env = std::getenv("TB_RELEASE_DATA")) dir = env;
        else dir = source_dir() / "data" / "release";
        return public_data(dir);
    }

    Gate gate;
    gate.run(1, "MVC per-class F1", mvc_per_class_f1);
    gate.run(2, "ERG/EWG expected scores", random_baselines);
    gate.run(3, "TAC headline (fallback: frozen synthetic regression)", frozen_regression);
    gate.report(4, "qualitative orderings", {Outcome::skip, "needs the released data set; see the acceptance_public_data test"});
    gate.run(5, "property suite", property_suite);
    gate.run(6, "performance and dendrogram reuse", performance);
    return gate.failed() ? 1 : 0;
}
