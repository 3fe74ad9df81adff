#include "tb/features.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>

#include "tb/csv.hpp"
#include "tb/dataset.hpp"
#include "tb/error.hpp"

namespace tb {

namespace {

// Generated from data/stopwords.txt at configure time.
constexpr std::string_view kStopWordsText =
#include "stopwords_data.inc"
    ;

// Appends the UTF-8 encoding of the code point at text[i], advancing i.
// Returns the code point, or U+FFFD for malformed bytes (consumed one at a time).
char32_t decode_utf8(std::string_view text, std::size_t& i)
{
    const auto b0 = static_cast<unsigned char>(text[i]);
    auto cont = [&](std::size_t k) -> int {
        if (i + k >= text.size()) return -1;
        const auto b = static_cast<unsigned char>(text[i + k]);
        return (b & 0xC0) == 0x80 ? (b & 0x3F) : -1;
    };
    if (b0 < 0x80) {
        ++i;
        return b0;
    }
    int len = 0;
    char32_t cp = 0;
    if ((b0 & 0xE0) == 0xC0) {
        len = 2;
        cp = b0 & 0x1F;
    } else if ((b0 & 0xF0) == 0xE0) {
        len = 3;
        cp = b0 & 0x0F;
    } else if ((b0 & 0xF8) == 0xF0) {
        len = 4;
        cp = b0 & 0x07;
    } else {
        ++i;
        return 0xFFFD;
    }
    for (int k = 1; k < len; ++k) {
        const int c = cont(static_cast<std::size_t>(k));
        if (c < 0) {
            ++i;
            return 0xFFFD;
        }
        cp = (cp << 6) | static_cast<char32_t>(c);
    }
    i += static_cast<std::size_t>(len);
    return cp;
}

bool is_space(char32_t c)
{
    return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v' || c == 0x00A0 ||
           (c >= 0x2000 && c <= 0x200B) || c == 0x202F || c == 0x205F || c == 0x3000 || c == 0xFEFF;
}

bool is_punct(char32_t c)
{
    if (c < 0x80) return std::ispunct(static_cast<int>(c)) != 0;
    switch (c) {
    case 0x00A1: case 0x00A7: case 0x00AB: case 0x00B6: case 0x00B7: case 0x00BB: case 0x00BF:
    case 0xFFFD:
        return true;
    default:
        break;
    }
    return (c >= 0x2010 && c <= 0x2027) || (c >= 0x2030 && c <= 0x205E) || (c >= 0x3001 && c <= 0x3003) ||
           (c >= 0x3008 && c <= 0x3011) || (c >= 0xFF01 && c <= 0xFF0F);
}

void append_utf8(std::string& out, char32_t cp)
{
    if (cp < 0x80) {
        out.push_back(static_cast<char>(cp));
    } else if (cp < 0x800) {
        out.push_back(static_cast<char>(0xC0 | (cp >> 6)));
        out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
    } else if (cp < 0x10000) {
        out.push_back(static_cast<char>(0xE0 | (cp >> 12)));
        out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
        out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
    } else {
        out.push_back(static_cast<char>(0xF0 | (cp >> 18)));
        out.push_back(static_cast<char>(0x80 | ((cp >> 12) & 0x3F)));
        out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
        out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
    }
}

// Lowercased, punctuation-free words, stop words not yet removed.
std::vector<std::string> split_words(std::string_view text)
{
    std::vector<std::string> words;
    std::string current;
    std::size_t i = 0;
    while (i < text.size()) {
        const char32_t c = decode_utf8(text, i);
        if (is_space(c)) {
            if (!current.empty()) words.push_back(std::move(current));
            current.clear();
        } else if (!is_punct(c)) {
            append_utf8(current, (c >= 'A' && c <= 'Z') ? c + ('a' - 'A') : c);
        }
    }
    if (!current.empty()) words.push_back(std::move(current));
    return words;
}

std::vector<std::string> parse_word_list(std::string_view text)
{
    std::vector<std::string> words;
    std::size_t start = 0;
    while (start <= text.size()) {
        auto end = text.find('\n', start);
        if (end == std::string_view::npos) end = text.size();
        std::string_view line = text.substr(start, end - start);
        while (!line.empty() && (line.back() == '\r' || line.back() == ' ' || line.back() == '\t')) line.remove_suffix(1);
        while (!line.empty() && (line.front() == ' ' || line.front() == '\t')) line.remove_prefix(1);
        if (!line.empty() && line.front() != '#') words.emplace_back(line);
        start = end + 1;
    }
    return words;
}

void check_unit_interval(const FeatureMatrix& fm)
{
    for (std::size_t r = 0; r < fm.rows(); ++r) {
        for (std::size_t c = 0; c < fm.cols(); ++c) {
            const double v = fm.values(r, c);
            if (!(v >= 0.0 && v <= 1.0)) {
                throw ValidationError("feature '" + fm.col_names[c] + "' of row '" + fm.row_ids[r] +
                                      "' is outside [0, 1]");
            }
        }
    }
}

}  // namespace

std::string_view to_string(Provenance p) noexcept
{
    switch (p) {
    case Provenance::attributes:
        return "attributes";
    case Provenance::external:
        return "external";
    case Provenance::combined:
        return "combined";
    case Provenance::tfidf:
        return "tfidf";
    }
    return "unknown";
}

void FeatureMatrix::validate() const
{
    if (row_ids.size() != values.rows() || col_names.size() != values.cols()) {
        throw ValidationError("feature matrix labels do not match its shape");
    }
    for (double v : values.data()) {
        if (!std::isfinite(v)) throw InputError("feature matrix has a non-finite entry");
    }
    if (provenance != Provenance::tfidf) check_unit_interval(*this);
}

FeatureMatrix select_attributes(const Dataset& dataset, const FeatureMatrix* external, AttributeSelection selection)
{
    std::vector<std::string> ids;
    ids.reserve(dataset.size());
    for (const auto& p : dataset.participants) ids.push_back(p.id);

    if (selection != AttributeSelection::own) {
        if (!external) throw ArgumentError("external feature matrix required for this selection");
        if (external->row_ids != ids) {
            throw AlignmentError("external features are not aligned with the participant order");
        }
        external->validate();
    }
    if (selection != AttributeSelection::external_only && !dataset.attributes) {
        throw ArgumentError("dataset has no attribute matrix");
    }

    FeatureMatrix out;
    out.row_ids = ids;
    if (selection == AttributeSelection::external_only) {
        out.col_names = external->col_names;
        out.values = external->values;
        out.provenance = Provenance::external;
        return out;
    }

    const Matrix& own = *dataset.attributes;
    if (selection == AttributeSelection::own) {
        out.col_names = dataset.attribute_names;
        out.values = own;
        out.provenance = Provenance::attributes;
        return out;
    }

    out.col_names = dataset.attribute_names;
    out.col_names.insert(out.col_names.end(), external->col_names.begin(), external->col_names.end());
    out.values = Matrix(ids.size(), own.cols() + external->cols());
    for (std::size_t r = 0; r < ids.size(); ++r) {
        auto dst = out.values.row(r);
        std::copy(own.row(r).begin(), own.row(r).end(), dst.begin());
        std::copy(external->values.row(r).begin(), external->values.row(r).end(), dst.begin() + static_cast<std::ptrdiff_t>(own.cols()));
    }
    out.provenance = Provenance::combined;
    return out;
}

FeatureMatrix load_feature_csv(const std::filesystem::path& path, Provenance provenance)
{
    const csv::Table t = csv::read(path);
    const std::size_t id_col = t.require("id", path.string());
    FeatureMatrix fm;
    fm.provenance = provenance;
    std::vector<std::size_t> cols;
    for (std::size_t c = 0; c < t.header.size(); ++c) {
        if (c == id_col) continue;
        if (std::find(fm.col_names.begin(), fm.col_names.end(), t.header[c]) != fm.col_names.end()) {
            throw ValidationError(path.string() + ": duplicate column '" + t.header[c] + "'");
        }
        fm.col_names.push_back(t.header[c]);
        cols.push_back(c);
    }
    if (t.rows.empty()) throw SchemaError(path.string() + ": no rows");
    fm.values = Matrix(t.rows.size(), cols.size());
    for (std::size_t r = 0; r < t.rows.size(); ++r) {
        fm.row_ids.push_back(t.rows[r][id_col]);
        for (std::size_t k = 0; k < cols.size(); ++k) {
            const std::string& s = t.rows[r][cols[k]];
            char* end = nullptr;
            const double v = std::strtod(s.c_str(), &end);
            if (s.empty() || end != s.c_str() + s.size()) {
                throw ValidationError(path.string() + ": row '" + fm.row_ids.back() + "', column '" + fm.col_names[k] +
                                      "': not a number");
            }
            fm.values(r, k) = v;
        }
    }
    fm.validate();
    return fm;
}

void write_feature_csv(const FeatureMatrix& features, const std::filesystem::path& path)
{
    write_attributes_csv(features.row_ids, features.col_names, features.values, path);
}

StopWords::StopWords(const std::vector<std::string>& words)
{
    for (const auto& w : words) {
        for (auto& part : split_words(w)) words_.insert(std::move(part));
    }
}

const std::vector<std::string>& default_stop_word_list()
{
    static const std::vector<std::string> list = parse_word_list(kStopWordsText);
    return list;
}

const StopWords& default_stop_words()
{
    static const StopWords words(default_stop_word_list());
    return words;
}

StopWords load_stop_words(const std::filesystem::path& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path.string());
    std::stringstream buf;
    buf << in.rdbuf();
    return StopWords(parse_word_list(buf.str()));
}

std::vector<std::string> tokenize(std::string_view text, const StopWords& stop_words)
{
    auto words = split_words(text);
    std::erase_if(words, [&](const std::string& w) { return stop_words.contains(w); });
    return words;
}

TfidfResult tfidf(const std::vector<std::string>& texts, const std::vector<std::string>& row_ids, const StopWords& stop_words)
{
    if (texts.empty()) throw VectorizationError("no documents");
    if (!row_ids.empty() && row_ids.size() != texts.size()) throw ArgumentError("row id count does not match document count");
    const std::size_t n = texts.size();

    std::vector<std::map<std::string, std::size_t>> counts(n);
#pragma omp parallel for schedule(dynamic)
    for (std::ptrdiff_t d = 0; d < static_cast<std::ptrdiff_t>(n); ++d) {
        for (auto& tok : tokenize(texts[static_cast<std::size_t>(d)], stop_words)) ++counts[static_cast<std::size_t>(d)][tok];
    }

    std::map<std::string, std::size_t> df;
    for (const auto& doc : counts) {
        for (const auto& [term, c] : doc) ++df[term];
    }
    if (df.empty()) throw VectorizationError("every document is empty after tokenization");

    TfidfResult result;
    auto& vocab = result.vocabulary;
    std::map<std::string, std::size_t> column;
    for (const auto& [term, f] : df) {
        column.emplace(term, vocab.terms.size());
        vocab.terms.push_back(term);
        vocab.document_frequency.push_back(f);
    }

    auto& fm = result.features;
    fm.provenance = Provenance::tfidf;
    fm.col_names = vocab.terms;
    if (row_ids.empty()) {
        for (std::size_t d = 0; d < n; ++d) fm.row_ids.push_back(std::to_string(d));
    } else {
        fm.row_ids = row_ids;
    }
    fm.values = Matrix(n, vocab.terms.size());
    const double docs = static_cast<double>(n);
    for (std::size_t d = 0; d < n; ++d) {
        auto row = fm.values.row(d);
        for (const auto& [term, c] : counts[d]) {
            const std::size_t j = column.at(term);
            row[j] = static_cast<double>(c) * std::log(docs / static_cast<double>(vocab.document_frequency[j]));
        }
        double norm = 0.0;
        for (double v : row) norm += v * v;
        if (norm > 0.0) {
            norm = std::sqrt(norm);
            for (double& v : row) v /= norm;
        }
    }
    return result;
}

std::vector<std::string> load_texts(const Dataset& dataset)
{
    std::vector<std::string> texts;
    texts.reserve(dataset.size());
    for (const auto& p : dataset.participants) {
        const std::filesystem::path path = dataset.text_root / p.text_ref;
        std::ifstream in(path, std::ios::binary);
        if (!in) throw IoError("cannot open text of participant '" + p.id + "': " + path.string());
        std::stringstream buf;
        buf << in.rdbuf();
        texts.push_back(buf.str());
    }
    return texts;
}

}  // namespace tb
