#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>
#include <map>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "tb/clustering.hpp"
#include "tb/dataset.hpp"
#include "tb/features.hpp"
#include "tb/games.hpp"
#include "tb/matrix.hpp"
#include "tb/metrics.hpp"

namespace tbt {

using tb::Matrix;

inline std::string pid(std::size_t i)
{
    char buf[32];
    std::snprintf(buf, sizeof buf, "p%03zu", i + 1);
    return buf;
}

inline Matrix random_matrix(std::mt19937_64& gen, std::size_t n, std::size_t d, bool unit = false)
{
    Matrix m(n, d);
    std::normal_distribution<double> normal(0.0, 1.0);
    std::uniform_real_distribution<double> uniform(0.0, 1.0);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < d; ++j) m(i, j) = unit ? uniform(gen) : normal(gen);
    }
    return m;
}

// Dataset with the default games; labels[g][i] is participant i's action in game g.
inline tb::Dataset make_dataset(const std::vector<std::vector<int>>& labels, const Matrix* attributes = nullptr)
{
    tb::Dataset ds;
    ds.games = tb::default_games();
    const std::size_t n = labels.front().size();
    for (std::size_t i = 0; i < n; ++i) {
        tb::Participant p;
        p.id = pid(i);
        p.gender = i % 2 ? tb::Gender::female : tb::Gender::male;
        p.age = 20 + static_cast<int>(i % 40);
        p.text_ref = "texts/" + p.id + ".txt";
        for (const auto& g : labels) p.choices.push_back(g[i]);
        ds.participants.push_back(std::move(p));
    }
    if (attributes) {
        for (std::size_t j = 0; j < attributes->cols(); ++j) ds.attribute_names.push_back("a" + std::to_string(j + 1));
        ds.attributes = *attributes;
    }
    return ds;
}

// Labels with the given per-action counts laid out in a seeded random order.
inline std::vector<int> labels_with_counts(const std::vector<int>& counts, std::mt19937_64& gen)
{
    std::vector<int> out;
    for (std::size_t a = 0; a < counts.size(); ++a) out.insert(out.end(), static_cast<std::size_t>(counts[a]), static_cast<int>(a));
    std::shuffle(out.begin(), out.end(), gen);
    return out;
}

inline tb::FeatureMatrix as_features(const tb::Dataset& ds, const Matrix& values)
{
    tb::FeatureMatrix fm;
    for (const auto& p : ds.participants) fm.row_ids.push_back(p.id);
    for (std::size_t j = 0; j < values.cols(); ++j) fm.col_names.push_back("f" + std::to_string(j));
    fm.values = values;
    return fm;
}

// ---- Ward oracle -------------------------------------------------------------

struct OracleMerge {
    std::size_t left, right;
    double cost;
};

// Recomputes every candidate cost from cluster centroids at every step:
// cost(A, B) = |A||B| / (|A| + |B|) * ||mean(A) - mean(B)||^2.
inline std::vector<OracleMerge> naive_ward(const Matrix& x, std::vector<std::vector<std::size_t>>* partitions_by_k = nullptr)
{
    const std::size_t n = x.rows(), d = x.cols();
    struct Cluster {
        std::size_t id;
        std::vector<std::size_t> members;
        std::vector<double> centroid;
    };
    std::vector<Cluster> clusters;
    for (std::size_t i = 0; i < n; ++i) {
        Cluster c{i, {i}, std::vector<double>(d)};
        for (std::size_t j = 0; j < d; ++j) c.centroid[j] = x(i, j);
        clusters.push_back(std::move(c));
    }
    auto snapshot = [&] {
        std::vector<std::size_t> label(n);
        for (std::size_t c = 0; c < clusters.size(); ++c) {
            for (auto m : clusters[c].members) label[m] = c;
        }
        // canonical numbering by first appearance
        std::map<std::size_t, std::size_t> remap;
        for (auto& l : label) {
            auto [it, inserted] = remap.emplace(l, remap.size());
            l = it->second;
        }
        return label;
    };
    if (partitions_by_k) {
        partitions_by_k->assign(n + 1, {});
        (*partitions_by_k)[n] = snapshot();
    }
    std::vector<OracleMerge> merges;
    for (std::size_t step = 0; step + 1 < n; ++step) {
        double best = std::numeric_limits<double>::infinity();
        std::size_t ba = 0, bb = 0, blo = 0, bhi = 0;
        for (std::size_t a = 0; a < clusters.size(); ++a) {
            for (std::size_t b = a + 1; b < clusters.size(); ++b) {
                double dist = 0;
                for (std::size_t j = 0; j < d; ++j) {
                    const double diff = clusters[a].centroid[j] - clusters[b].centroid[j];
                    dist += diff * diff;
                }
                const double na = static_cast<double>(clusters[a].members.size());
                const double nb = static_cast<double>(clusters[b].members.size());
                const double cost = na * nb / (na + nb) * dist;
                const std::size_t lo = std::min(clusters[a].id, clusters[b].id);
                const std::size_t hi = std::max(clusters[a].id, clusters[b].id);
                if (cost < best || (cost == best && std::make_pair(lo, hi) < std::make_pair(blo, bhi))) {
                    best = cost;
                    ba = a;
                    bb = b;
                    blo = lo;
                    bhi = hi;
                }
            }
        }
        merges.push_back({blo, bhi, best});
        Cluster merged{n + step, clusters[ba].members, std::vector<double>(d)};
        merged.members.insert(merged.members.end(), clusters[bb].members.begin(), clusters[bb].members.end());
        for (std::size_t j = 0; j < d; ++j) {
            double s = 0;
            for (auto m : merged.members) s += x(m, j);
            merged.centroid[j] = s / static_cast<double>(merged.members.size());
        }
        clusters.erase(clusters.begin() + static_cast<std::ptrdiff_t>(bb));
        clusters.erase(clusters.begin() + static_cast<std::ptrdiff_t>(ba));
        clusters.push_back(std::move(merged));
        if (partitions_by_k) (*partitions_by_k)[clusters.size()] = snapshot();
    }
    return merges;
}

// Same partition up to relabeling.
inline bool same_partition(const std::vector<std::uint32_t>& a, const std::vector<std::size_t>& b)
{
    if (a.size() != b.size()) return false;
    std::map<std::uint32_t, std::size_t> fwd;
    std::map<std::size_t, std::uint32_t> back;
    for (std::size_t i = 0; i < a.size(); ++i) {
        auto [f, fi] = fwd.emplace(a[i], b[i]);
        auto [g, gi] = back.emplace(b[i], a[i]);
        if (f->second != b[i] || g->second != a[i]) return false;
    }
    return true;
}

// ---- metric oracle -----------------------------------------------------------

struct OracleScores {
    std::vector<double> precision, recall, f1;
    double accuracy = 0, mav = 0, mwav = 0;
};

// Direct tallies from the label sequences, no confusion matrix.
inline OracleScores naive_scores(const std::vector<int>& actual, const std::vector<int>& predicted, std::size_t m)
{
    OracleScores s;
    const double n = static_cast<double>(actual.size());
    double correct = 0;
    for (std::size_t c = 0; c < m; ++c) {
        double tp = 0, fp = 0, fn = 0;
        for (std::size_t i = 0; i < actual.size(); ++i) {
            const bool is_a = actual[i] == static_cast<int>(c);
            const bool is_p = predicted[i] == static_cast<int>(c);
            tp += is_a && is_p;
            fp += !is_a && is_p;
            fn += is_a && !is_p;
        }
        const double p = tp + fp > 0 ? tp / (tp + fp) : 0;
        const double r = tp + fn > 0 ? tp / (tp + fn) : 0;
        const double f = p + r > 0 ? 2 * p * r / (p + r) : 0;
        s.precision.push_back(100 * p);
        s.recall.push_back(100 * r);
        s.f1.push_back(100 * f);
        s.mav += 100 * f / static_cast<double>(m);
        s.mwav += 100 * f * (tp + fn) / n;
    }
    for (std::size_t i = 0; i < actual.size(); ++i) correct += actual[i] == predicted[i];
    s.accuracy = 100 * correct / n;
    return s;
}

// ---- files -------------------------------------------------------------------

inline std::filesystem::path temp_dir(const std::string& name)
{
    auto dir = std::filesystem::temp_directory_path() / ("tb_test_" + name);
    std::filesystem::remove_all(dir);
    std::filesystem::create_directories(dir);
    return dir;
}

inline void write_file(const std::filesystem::path& path, const std::string& text)
{
    std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary);
    out << text;
}

inline std::string read_file(const std::filesystem::path& path)
{
    std::ifstream in(path, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

}  // namespace tbt
