#pragma once

#include <cstddef>
#include <filesystem>
#include <string>
#include <string_view>
#include <unordered_set>
#include <vector>

#include "tb/matrix.hpp"

namespace tb {

struct Dataset;

enum class Provenance { attributes, external, combined, tfidf };

std::string_view to_string(Provenance p) noexcept;

// Per-participant representation. Rows follow Dataset participant order.
struct FeatureMatrix {
    std::vector<std::string> row_ids;
    std::vector<std::string> col_names;
    Matrix values;
    Provenance provenance = Provenance::attributes;

    std::size_t rows() const noexcept { return values.rows(); }
    std::size_t cols() const noexcept { return values.cols(); }

    // Finite entries, matching shapes, and [0, 1] for attribute provenances.
    void validate() const;
};

enum class AttributeSelection { own, external_only, combined };

// The dataset's own attribute columns, the external set alone, or both side by
// side (own columns first). Throws AlignmentError when row ids differ.
FeatureMatrix select_attributes(const Dataset& dataset,
                                const FeatureMatrix* external = nullptr,
                                AttributeSelection selection = AttributeSelection::own);

// External feature CSV (id,<col>...). Rows stay in file order.
FeatureMatrix load_feature_csv(const std::filesystem::path& path, Provenance provenance = Provenance::external);
void write_feature_csv(const FeatureMatrix& features, const std::filesystem::path& path);

// ---- text ------------------------------------------------------------------

class StopWords {
public:
    StopWords() = default;
    // Entries are normalized the same way as tokens (lowercased, punctuation removed).
    explicit StopWords(const std::vector<std::string>& words);

    bool contains(std::string_view token) const { return words_.contains(std::string(token)); }
    std::size_t size() const noexcept { return words_.size(); }

private:
    std::unordered_set<std::string> words_;
};

// The list shipped as data/stopwords.txt.
const StopWords& default_stop_words();
const std::vector<std::string>& default_stop_word_list();
// One token per line, UTF-8. Blank lines and lines starting with '#' are skipped.
StopWords load_stop_words(const std::filesystem::path& path);

// Lowercase (ASCII), remove ASCII and common Unicode punctuation, split on
// whitespace, drop stop words.
std::vector<std::string> tokenize(std::string_view text, const StopWords& stop_words = default_stop_words());

struct Vocabulary {
    std::vector<std::string> terms;  // sorted, unique
    std::vector<std::size_t> document_frequency;
};

struct TfidfResult {
    FeatureMatrix features;
    Vocabulary vocabulary;
};

// value = raw count * ln(n / df), rows L2-normalized; all-zero rows are left as is.
// Throws VectorizationError if no document yields a token.
TfidfResult tfidf(const std::vector<std::string>& texts,
                  const std::vector<std::string>& row_ids = {},
                  const StopWords& stop_words = default_stop_words());

// Reads each participant's text_ref relative to the dataset's text root.
std::vector<std::string> load_texts(const Dataset& dataset);

}  // namespace tb
