#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace tb {

// counts[true][predicted] over a game's action set.
class ConfusionMatrix {
public:
    explicit ConfusionMatrix(std::size_t classes = 0) : classes_(classes), counts_(classes * classes, 0) {}

    std::size_t classes() const noexcept { return classes_; }
    long at(std::size_t actual, std::size_t predicted) const noexcept { return counts_[actual * classes_ + predicted]; }
    void add(std::size_t actual, std::size_t predicted) noexcept { ++counts_[actual * classes_ + predicted]; }

    long total() const noexcept;
    long true_count(std::size_t c) const noexcept;
    long predicted_count(std::size_t c) const noexcept;
    long correct() const noexcept;

    bool operator==(const ConfusionMatrix&) const = default;

private:
    std::size_t classes_;
    std::vector<long> counts_;
};

// Throws ArgumentError on length mismatch, empty input or labels outside 0..classes-1.
ConfusionMatrix confusion(std::span<const int> actual, std::span<const int> predicted, std::size_t classes);

// Scores on a 0-100 scale. Empty denominators give 0, and F1 is 0 when
// precision + recall is 0.
struct ClassScores {
    double precision = 0.0;
    double recall = 0.0;
    double f1 = 0.0;
};

std::vector<ClassScores> per_class_prf(const ConfusionMatrix& cm);

struct SummaryScores {
    double mav_f1 = 0.0;    // unweighted mean over every action of the game
    double mwav_f1 = 0.0;   // weighted by true class frequency in the test set
    double accuracy = 0.0;
};

SummaryScores aggregate(const ConfusionMatrix& cm);

}  // namespace tb
