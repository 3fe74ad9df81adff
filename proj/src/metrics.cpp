#include "tb/metrics.hpp"

#include "tb/error.hpp"

namespace tb {

long ConfusionMatrix::total() const noexcept
{
    long t = 0;
    for (long c : counts_) t += c;
    return t;
}

long ConfusionMatrix::true_count(std::size_t c) const noexcept
{
    long t = 0;
    for (std::size_t p = 0; p < classes_; ++p) t += at(c, p);
    return t;
}

long ConfusionMatrix::predicted_count(std::size_t c) const noexcept
{
    long t = 0;
    for (std::size_t a = 0; a < classes_; ++a) t += at(a, c);
    return t;
}

long ConfusionMatrix::correct() const noexcept
{
    long t = 0;
    for (std::size_t c = 0; c < classes_; ++c) t += at(c, c);
    return t;
}

ConfusionMatrix confusion(std::span<const int> actual, std::span<const int> predicted, std::size_t classes)
{
    if (actual.size() != predicted.size()) {
        throw ArgumentError("confusion: " + std::to_string(actual.size()) + " actual labels vs " +
                            std::to_string(predicted.size()) + " predictions");
    }
    if (actual.empty()) throw ArgumentError("confusion: empty label sequence");
    ConfusionMatrix cm(classes);
    const int limit = static_cast<int>(classes);
    for (std::size_t i = 0; i < actual.size(); ++i) {
        if (actual[i] < 0 || actual[i] >= limit || predicted[i] < 0 || predicted[i] >= limit) {
            throw ArgumentError("confusion: label outside the action set");
        }
        cm.add(static_cast<std::size_t>(actual[i]), static_cast<std::size_t>(predicted[i]));
    }
    return cm;
}

std::vector<ClassScores> per_class_prf(const ConfusionMatrix& cm)
{
    std::vector<ClassScores> out(cm.classes());
    for (std::size_t c = 0; c < cm.classes(); ++c) {
        const double hit = static_cast<double>(cm.at(c, c));
        const long pred = cm.predicted_count(c);
        const long truth = cm.true_count(c);
        const double p = pred > 0 ? hit / static_cast<double>(pred) : 0.0;
        const double r = truth > 0 ? hit / static_cast<double>(truth) : 0.0;
        out[c].precision = 100.0 * p;
        out[c].recall = 100.0 * r;
        out[c].f1 = (p + r) > 0.0 ? 100.0 * 2.0 * p * r / (p + r) : 0.0;
    }
    return out;
}

SummaryScores aggregate(const ConfusionMatrix& cm)
{
    SummaryScores s;
    const long total = cm.total();
    if (total == 0 || cm.classes() == 0) return s;
    const auto per_class = per_class_prf(cm);
    double sum = 0.0;
    double weighted = 0.0;
    for (std::size_t c = 0; c < cm.classes(); ++c) {
        sum += per_class[c].f1;
        weighted += static_cast<double>(cm.true_count(c)) * per_class[c].f1;
    }
    s.mav_f1 = sum / static_cast<double>(cm.classes());
    s.mwav_f1 = weighted / static_cast<double>(total);
    s.accuracy = 100.0 * static_cast<double>(cm.correct()) / static_cast<double>(total);
    return s;
}

}  // namespace tb
