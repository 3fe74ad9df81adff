#include "tb/classifiers.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include "tb/clustering.hpp"
#include "tb/csv.hpp"
#include "tb/dataset.hpp"
#include "tb/error.hpp"

namespace tb {

LabeledSplit::LabeledSplit(std::vector<ActionIndex> labels, std::vector<std::size_t> test)
    : labels_(std::move(labels)), test_(std::move(test))
{
    const std::size_t n = labels_.size();
    std::sort(test_.begin(), test_.end());
    if (test_.empty() || test_.size() >= n) throw ArgumentError("split needs nonempty train and test sets");
    if (std::adjacent_find(test_.begin(), test_.end()) != test_.end()) throw ArgumentError("split has a repeated test index");
    if (test_.back() >= n) throw ArgumentError("split test index out of range");
    is_train_.assign(n, true);
    for (auto t : test_) is_train_[t] = false;
    train_.reserve(n - test_.size());
    for (std::size_t i = 0; i < n; ++i) {
        if (is_train_[i]) train_.push_back(i);
    }
}

ActionIndex LabeledSplit::train_label(std::size_t i) const
{
    if (i >= labels_.size() || !is_train_[i]) throw ArgumentError("label of a test participant requested");
    return labels_[i];
}

LabeledSplit LabeledSplit::relabeled(std::vector<ActionIndex> labels) const
{
    if (labels.size() != labels_.size()) throw ArgumentError("relabeled: label count differs");
    LabeledSplit copy = *this;
    copy.labels_ = std::move(labels);
    return copy;
}

std::vector<std::size_t> sample_test_indices(std::size_t n, std::size_t test_size, Rng& rng)
{
    if (test_size == 0 || test_size >= n) throw ArgumentError("test size must be in 1..n-1");
    std::vector<std::size_t> idx(n);
    for (std::size_t i = 0; i < n; ++i) idx[i] = i;
    // Partial Fisher-Yates: the first test_size slots are a uniform subset.
    for (std::size_t i = 0; i < test_size; ++i) {
        const std::size_t j = i + rng.uniform_index(n - i);
        std::swap(idx[i], idx[j]);
    }
    idx.resize(test_size);
    std::sort(idx.begin(), idx.end());
    return idx;
}

ConfusionMatrix score(const Prediction& prediction, const LabeledSplit& split, std::size_t action_count)
{
    std::vector<int> actual;
    actual.reserve(prediction.participants.size());
    for (auto i : prediction.participants) actual.push_back(split.actual(i));
    return confusion(actual, prediction.predicted, action_count);
}

namespace {

Prediction empty_prediction(std::string name, int hyper, const LabeledSplit& split, const Rng* rng)
{
    Prediction p;
    p.classifier = std::move(name);
    p.hyperparam = hyper;
    p.seed = rng ? rng->seed() : 0;
    p.participants = split.test();
    p.predicted.reserve(split.test().size());
    return p;
}

// Labels sharing the maximum count (count > 0 only).
void top_labels(std::span<const int> counts, std::vector<ActionIndex>& out)
{
    out.clear();
    int best = 0;
    for (std::size_t a = 0; a < counts.size(); ++a) {
        if (counts[a] > best) {
            best = counts[a];
            out.assign(1, static_cast<ActionIndex>(a));
        } else if (counts[a] == best && best > 0) {
            out.push_back(static_cast<ActionIndex>(a));
        }
    }
}

}  // namespace

Prediction tac_predict(const ClusterAssignment& assignment,
                       const LabeledSplit& split,
                       std::size_t action_count,
                       Rng& rng,
                       const TacOptions& options)
{
    if (assignment.label_of.size() != split.size()) {
        throw ArgumentError("cluster assignment does not cover every participant");
    }
    if (action_count == 0) throw ArgumentError("game without actions");
    const std::size_t k = assignment.k;
    std::vector<int> counts(k * action_count, 0);
    for (auto i : split.train()) {
        ++counts[assignment.label_of[i] * action_count + static_cast<std::size_t>(split.train_label(i))];
    }

    Prediction pred = empty_prediction("TAC", static_cast<int>(k), split, &rng);
    std::vector<ActionIndex> top;
    std::vector<int> cluster_draw(options.draw_per_cluster ? k : 0, -1);
    for (auto t : split.test()) {
        const std::size_t c = assignment.label_of[t];
        top_labels(std::span<const int>(counts.data() + c * action_count, action_count), top);
        if (top.size() == 1) {
            pred.predicted.push_back(top.front());
            continue;
        }
        if (options.draw_per_cluster && cluster_draw[c] >= 0) {
            pred.predicted.push_back(cluster_draw[c]);
            continue;
        }
        ActionIndex draw;
        if (options.tie_over_tied_labels && !top.empty()) {
            draw = top[rng.uniform_index(top.size())];
        } else {
            draw = static_cast<ActionIndex>(rng.uniform_index(action_count));
        }
        if (options.draw_per_cluster) cluster_draw[c] = draw;
        pred.predicted.push_back(draw);
    }
    return pred;
}

std::vector<std::vector<std::size_t>> nearest_train_neighbors(const Matrix& sq_dist,
                                                              const LabeledSplit& split,
                                                              std::size_t k_max)
{
    if (sq_dist.rows() != split.size() || sq_dist.cols() != split.size()) {
        throw ArgumentError("distance matrix does not match the split");
    }
    if (k_max < 1 || k_max > split.train().size()) {
        throw ArgumentError("K = " + std::to_string(k_max) + " outside 1.." + std::to_string(split.train().size()));
    }
    std::vector<std::vector<std::size_t>> out;
    out.reserve(split.test().size());
    std::vector<std::size_t> candidates;
    for (auto t : split.test()) {
        candidates = split.train();
        auto closer = [&](std::size_t a, std::size_t b) {
            const double da = sq_dist(t, a);
            const double db = sq_dist(t, b);
            return da < db || (da == db && a < b);
        };
        std::partial_sort(candidates.begin(), candidates.begin() + static_cast<std::ptrdiff_t>(k_max), candidates.end(), closer);
        candidates.resize(k_max);
        out.push_back(candidates);
    }
    return out;
}

Prediction knn_vote(const std::vector<std::vector<std::size_t>>& neighbors,
                    const LabeledSplit& split,
                    std::size_t action_count,
                    std::size_t K,
                    Rng& rng)
{
    if (neighbors.size() != split.test().size()) throw ArgumentError("neighbor lists do not match the test set");
    Prediction pred = empty_prediction("KNN", static_cast<int>(K), split, &rng);
    std::vector<int> counts(action_count);
    std::vector<ActionIndex> top;
    for (const auto& list : neighbors) {
        if (K < 1 || K > list.size()) throw ArgumentError("K = " + std::to_string(K) + " exceeds the neighbor lists");
        std::fill(counts.begin(), counts.end(), 0);
        for (std::size_t j = 0; j < K; ++j) ++counts[static_cast<std::size_t>(split.train_label(list[j]))];
        top_labels(counts, top);
        pred.predicted.push_back(top.size() == 1 ? top.front() : top[rng.uniform_index(top.size())]);
    }
    return pred;
}

Prediction knn_predict(const Matrix& sq_dist, const LabeledSplit& split, std::size_t action_count, std::size_t K, Rng& rng)
{
    return knn_vote(nearest_train_neighbors(sq_dist, split, K), split, action_count, K, rng);
}

ActionIndex majority_label(std::span<const ActionIndex> labels, std::size_t action_count)
{
    std::vector<long> counts(action_count, 0);
    for (auto l : labels) ++counts.at(static_cast<std::size_t>(l));
    return static_cast<ActionIndex>(std::max_element(counts.begin(), counts.end()) - counts.begin());
}

Prediction mvc_predict(const LabeledSplit& split, std::size_t action_count, MvcScope scope)
{
    std::vector<ActionIndex> pool;
    if (scope == MvcScope::whole_data) {
        for (std::size_t i = 0; i < split.size(); ++i) pool.push_back(split.actual(i));
    } else {
        for (auto i : split.train()) pool.push_back(split.train_label(i));
    }
    const ActionIndex label = majority_label(pool, action_count);
    Prediction pred = empty_prediction("MVC", 0, split, nullptr);
    pred.predicted.assign(split.test().size(), label);
    return pred;
}

// ---- expected scores -------------------------------------------------------

MetricId parse_metric(std::string_view name, const GameSpec& game)
{
    using K = MetricId::Kind;
    if (name == "Accuracy") return {K::accuracy, 0};
    if (name == "MAV-F1") return {K::mav_f1, 0};
    if (name == "MWAV-F1") return {K::mwav_f1, 0};
    for (auto [prefix, kind] : {std::pair{std::string_view("F1-"), K::f1},
                                std::pair{std::string_view("Precision-"), K::precision},
                                std::pair{std::string_view("Recall-"), K::recall}}) {
        if (name.starts_with(prefix)) {
            if (auto a = game.find_action(name.substr(prefix.size()))) return {kind, static_cast<std::size_t>(*a)};
        }
    }
    throw ArgumentError("unknown measure '" + std::string(name) + "' for game " + game.name);
}

std::string metric_name(const MetricId& metric, const GameSpec& game)
{
    using K = MetricId::Kind;
    switch (metric.kind) {
    case K::accuracy:
        return "Accuracy";
    case K::mav_f1:
        return "MAV-F1";
    case K::mwav_f1:
        return "MWAV-F1";
    case K::precision:
        return "Precision-" + game.action_name(static_cast<ActionIndex>(metric.action));
    case K::recall:
        return "Recall-" + game.action_name(static_cast<ActionIndex>(metric.action));
    case K::f1:
        return "F1-" + game.action_name(static_cast<ActionIndex>(metric.action));
    }
    throw ArgumentError("unknown measure");
}

double ScoreTable::value(const MetricId& metric) const
{
    using K = MetricId::Kind;
    switch (metric.kind) {
    case K::accuracy:
        return summary.accuracy;
    case K::mav_f1:
        return summary.mav_f1;
    case K::mwav_f1:
        return summary.mwav_f1;
    default:
        break;
    }
    if (metric.action >= per_class.size()) throw ArgumentError("measure refers to a class outside the action set");
    const ClassScores& c = per_class[metric.action];
    if (metric.kind == K::precision) return c.precision;
    if (metric.kind == K::recall) return c.recall;
    return c.f1;
}

std::vector<double> proportions_from_counts(std::span<const long> counts)
{
    long total = 0;
    for (long c : counts) {
        if (c < 0) throw ArgumentError("negative class count");
        total += c;
    }
    if (total == 0) throw ArgumentError("class counts sum to zero");
    std::vector<double> p;
    for (long c : counts) p.push_back(static_cast<double>(c) / static_cast<double>(total));
    return p;
}

namespace {

void check_proportions(std::span<const double> props)
{
    if (props.empty()) throw ArgumentError("no class proportions");
    double s = 0.0;
    for (double p : props) {
        if (!(p >= 0.0)) throw ArgumentError("class proportions must be nonnegative");
        s += p;
    }
    if (std::abs(s - 1.0) > 1e-9) throw ArgumentError("class proportions must sum to 1");
}

std::vector<double> guess_distribution(std::span<const double> props, RandomGuess mode)
{
    if (mode == RandomGuess::weighted) return {props.begin(), props.end()};
    return std::vector<double>(props.size(), 1.0 / static_cast<double>(props.size()));
}

}  // namespace

ScoreTable expected_scores_plug_in(std::span<const double> class_props, RandomGuess mode)
{
    check_proportions(class_props);
    const auto q = guess_distribution(class_props, mode);
    ScoreTable t;
    double acc = 0.0, mav = 0.0, mwav = 0.0;
    for (std::size_t i = 0; i < class_props.size(); ++i) {
        const double p = class_props[i];
        ClassScores c;
        c.recall = p > 0.0 ? q[i] : 0.0;
        c.precision = q[i] > 0.0 ? p : 0.0;
        c.f1 = (c.precision + c.recall) > 0.0 ? 2.0 * c.precision * c.recall / (c.precision + c.recall) : 0.0;
        acc += q[i] * p;
        mav += c.f1;
        mwav += p * c.f1;
        c.precision *= 100.0;
        c.recall *= 100.0;
        c.f1 *= 100.0;
        t.per_class.push_back(c);
    }
    t.summary.accuracy = 100.0 * acc;
    t.summary.mav_f1 = 100.0 * mav / static_cast<double>(class_props.size());
    t.summary.mwav_f1 = 100.0 * mwav;
    return t;
}

ScoreTable expected_scores_monte_carlo(std::span<const double> class_props, RandomGuess mode, const MonteCarloSpec& spec)
{
    check_proportions(class_props);
    if (spec.trials == 0 || spec.test_size == 0) throw ArgumentError("Monte Carlo needs trials and a test size");
    const auto q = guess_distribution(class_props, mode);
    const std::size_t m = class_props.size();
    Rng rng(spec.seed);

    ScoreTable mean;
    mean.per_class.assign(m, ClassScores{});
    std::vector<int> actual(spec.test_size), predicted(spec.test_size);
    for (std::size_t t = 0; t < spec.trials; ++t) {
        for (std::size_t j = 0; j < spec.test_size; ++j) {
            actual[j] = static_cast<int>(rng.weighted_index(class_props));
            predicted[j] = static_cast<int>(rng.weighted_index(q));
        }
        const ConfusionMatrix cm = confusion(actual, predicted, m);
        const auto pc = per_class_prf(cm);
        const auto s = aggregate(cm);
        for (std::size_t i = 0; i < m; ++i) {
            mean.per_class[i].precision += pc[i].precision;
            mean.per_class[i].recall += pc[i].recall;
            mean.per_class[i].f1 += pc[i].f1;
        }
        mean.summary.accuracy += s.accuracy;
        mean.summary.mav_f1 += s.mav_f1;
        mean.summary.mwav_f1 += s.mwav_f1;
    }
    const double trials = static_cast<double>(spec.trials);
    for (auto& c : mean.per_class) {
        c.precision /= trials;
        c.recall /= trials;
        c.f1 /= trials;
    }
    mean.summary.accuracy /= trials;
    mean.summary.mav_f1 /= trials;
    mean.summary.mwav_f1 /= trials;
    return mean;
}

double expected_random_score(std::span<const double> class_props,
                             RandomGuess mode,
                             const MetricId& metric,
                             const std::optional<MonteCarloSpec>& monte_carlo)
{
    const ScoreTable t = monte_carlo ? expected_scores_monte_carlo(class_props, mode, *monte_carlo)
                                     : expected_scores_plug_in(class_props, mode);
    return t.value(metric);
}

void write_predictions_csv(const std::vector<Prediction>& predictions,
                           const LabeledSplit& split,
                           const Dataset& dataset,
                           const GameSpec& game,
                           const std::filesystem::path& path)
{
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write " + path.string());
    out << "participant_id,game,classifier,hyperparam,seed,predicted,actual\n";
    for (const auto& p : predictions) {
        for (std::size_t j = 0; j < p.participants.size(); ++j) {
            const std::size_t i = p.participants[j];
            out << csv::join({dataset.participants.at(i).id, game.name, p.classifier, std::to_string(p.hyperparam),
                              std::to_string(p.seed), game.action_name(p.predicted[j]), game.action_name(split.actual(i))})
                << '\n';
        }
    }
}

}  // namespace tb
