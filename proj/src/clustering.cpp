#include "tb/clustering.hpp"

#include <atomic>
#include <bit>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>
#include <tuple>

#include "tb/csv.hpp"
#include "tb/error.hpp"
#include "tb/features.hpp"
#include "tb/rng.hpp"

namespace tb {

namespace {

std::atomic<std::uint64_t> g_linkage_calls{0};

std::uint64_t fold(std::uint64_t h, std::uint64_t v) noexcept { return mix64(h ^ v); }

// Merge candidate ordering: cost first, then cluster ids.
struct PairKey {
    double cost;
    std::size_t lo;
    std::size_t hi;

    bool operator<(const PairKey& o) const noexcept { return std::tie(cost, lo, hi) < std::tie(o.cost, o.lo, o.hi); }
};

class WardState {
public:
    explicit WardState(Matrix dist) : d_(std::move(dist)), n_(d_.rows())
    {
        id_.resize(n_);
        size_.assign(n_, 1);
        active_.assign(n_, true);
        std::iota(id_.begin(), id_.end(), std::size_t{0});
        nn_.assign(n_, kNone);
        for (std::size_t i = 0; i < n_; ++i) refresh_neighbor(i);
    }

    Dendrogram run()
    {
        Dendrogram dendro;
        dendro.n = n_;
        dendro.merges.reserve(n_ ? n_ - 1 : 0);
        for (std::size_t step = 0; step + 1 < n_; ++step) {
            std::size_t a = kNone;
            for (std::size_t i = 0; i < n_; ++i) {
                if (!active_[i] || nn_[i] == kNone) continue;
                if (a == kNone || key(i, nn_[i]) < key(a, nn_[a])) a = i;
            }
            const std::size_t b = nn_[a];
            const double dab = d_(a, b);
            const std::size_t na = size_[a];
            const std::size_t nb = size_[b];

            Merge m;
            m.left = std::min(id_[a], id_[b]);
            m.right = std::max(id_[a], id_[b]);
            m.height = 0.5 * dab;
            m.size = na + nb;
            dendro.merges.push_back(m);

            for (std::size_t c = 0; c < n_; ++c) {
                if (!active_[c] || c == a || c == b) continue;
                const double nc = static_cast<double>(size_[c]);
                const double v = ((static_cast<double>(na) + nc) * d_(a, c) + (static_cast<double>(nb) + nc) * d_(b, c) -
                                  nc * dab) /
                                 (static_cast<double>(na + nb) + nc);
                d_(a, c) = v;
                d_(c, a) = v;
            }
            active_[b] = false;
            nn_[b] = kNone;
            id_[a] = n_ + step;
            size_[a] = na + nb;

            for (std::size_t c = 0; c < n_; ++c) {
                if (!active_[c] || c == a) continue;
                if (nn_[c] == a || nn_[c] == b) {
                    refresh_neighbor(c);
                } else if (key(c, a) < key(c, nn_[c])) {
                    nn_[c] = a;
                }
            }
            refresh_neighbor(a);
        }
        return dendro;
    }

private:
    static constexpr std::size_t kNone = std::numeric_limits<std::size_t>::max();

    PairKey key(std::size_t i, std::size_t j) const noexcept
    {
        return {d_(i, j), std::min(id_[i], id_[j]), std::max(id_[i], id_[j])};
    }

    void refresh_neighbor(std::size_t i)
    {
        std::size_t best = kNone;
        for (std::size_t j = 0; j < n_; ++j) {
            if (j == i || !active_[j]) continue;
            if (best == kNone || key(i, j) < key(i, best)) best = j;
        }
        nn_[i] = best;
    }

    Matrix d_;
    std::size_t n_;
    std::vector<std::size_t> id_;
    std::vector<std::size_t> size_;
    std::vector<bool> active_;
    std::vector<std::size_t> nn_;
};

}  // namespace

void Dendrogram::validate() const
{
    if (n == 0) {
        if (!merges.empty()) throw ValidationError("dendrogram without leaves has merges");
        return;
    }
    if (merges.size() != n - 1) throw ValidationError("dendrogram must have n - 1 merges");
    std::vector<std::size_t> sizes(2 * n - 1, 0);
    std::vector<bool> consumed(2 * n - 1, false);
    for (std::size_t i = 0; i < n; ++i) sizes[i] = 1;
    double prev = -std::numeric_limits<double>::infinity();
    for (std::size_t s = 0; s < merges.size(); ++s) {
        const Merge& m = merges[s];
        const std::size_t created = n + s;
        if (m.left >= created || m.right >= created || m.left == m.right) {
            throw ValidationError("merge " + std::to_string(s) + " refers to a cluster that does not exist yet");
        }
        if (consumed[m.left] || consumed[m.right]) {
            throw ValidationError("merge " + std::to_string(s) + " reuses a consumed cluster");
        }
        consumed[m.left] = consumed[m.right] = true;
        if (m.size != sizes[m.left] + sizes[m.right]) throw ValidationError("merge " + std::to_string(s) + " has a wrong size");
        sizes[created] = m.size;
        if (!(m.height >= 0.0) || m.height < prev) throw ValidationError("merge heights are not non-decreasing");
        prev = m.height;
    }
    if (!merges.empty() && merges.back().size != n) throw ValidationError("root does not contain every leaf");
}

std::uint64_t Dendrogram::digest() const
{
    std::uint64_t h = fold(0x5eedULL, n);
    for (const auto& m : merges) {
        h = fold(h, m.left);
        h = fold(h, m.right);
        h = fold(h, std::bit_cast<std::uint64_t>(m.height));
        h = fold(h, m.size);
    }
    return h;
}

std::uint64_t ClusterAssignment::digest() const
{
    std::uint64_t h = fold(0xc1u, k);
    for (auto l : label_of) h = fold(h, l);
    return h;
}

Matrix pairwise_sq_dist(const Matrix& x)
{
    const std::size_t n = x.rows();
    const std::size_t d = x.cols();
    Matrix out(n, n);
#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t ii = 0; ii < static_cast<std::ptrdiff_t>(n); ++ii) {
        const auto i = static_cast<std::size_t>(ii);
        const auto xi = x.row(i);
        for (std::size_t j = 0; j < n; ++j) {
            if (j == i) continue;
            const auto xj = x.row(j);
            double s = 0.0;
            for (std::size_t c = 0; c < d; ++c) {
                const double diff = xi[c] - xj[c];
                s += diff * diff;
            }
            out(i, j) = s;
        }
    }
    return out;
}

Matrix pairwise_sq_dist(const FeatureMatrix& features) { return pairwise_sq_dist(features.values); }

Dendrogram ward_linkage(const Matrix& features)
{
    g_linkage_calls.fetch_add(1, std::memory_order_relaxed);
    if (features.rows() == 0) throw ArgumentError("ward_linkage needs at least one row");
    for (double v : features.data()) {
        if (!std::isfinite(v)) throw InputError("ward_linkage: non-finite feature value");
    }
    WardState state(pairwise_sq_dist(features));
    return state.run();
}

Dendrogram ward_linkage(const FeatureMatrix& features) { return ward_linkage(features.values); }

std::uint64_t linkage_call_count() noexcept { return g_linkage_calls.load(std::memory_order_relaxed); }

ClusterAssignment cut(const Dendrogram& dendrogram, std::size_t k)
{
    const std::size_t n = dendrogram.n;
    if (k < 1 || k > n) {
        throw ArgumentError("cut: k = " + std::to_string(k) + " outside 1.." + std::to_string(n));
    }
    // Union-find over leaves plus internal ids; apply the first n - k merges.
    std::vector<std::size_t> parent(2 * n - 1);
    std::iota(parent.begin(), parent.end(), std::size_t{0});
    auto find = [&](std::size_t v) {
        while (parent[v] != v) {
            parent[v] = parent[parent[v]];
            v = parent[v];
        }
        return v;
    };
    for (std::size_t s = 0; s + k < n; ++s) {
        const Merge& m = dendrogram.merges[s];
        parent[find(m.left)] = n + s;
        parent[find(m.right)] = n + s;
    }

    ClusterAssignment out;
    out.k = k;
    out.label_of.resize(n);
    std::vector<std::uint32_t> label_of_root(2 * n - 1, std::numeric_limits<std::uint32_t>::max());
    std::uint32_t next = 0;
    for (std::size_t i = 0; i < n; ++i) {
        const std::size_t r = find(i);
        if (label_of_root[r] == std::numeric_limits<std::uint32_t>::max()) label_of_root[r] = next++;
        out.label_of[i] = label_of_root[r];
    }
    return out;
}

void write_dendrogram_csv(const Dendrogram& dendrogram, const std::filesystem::path& path)
{
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write " + path.string());
    out << "left,right,height,size\n";
    for (const auto& m : dendrogram.merges) {
        out << m.left << ',' << m.right << ',' << csv::format_double(m.height) << ',' << m.size << '\n';
    }
}

Dendrogram read_dendrogram_csv(const std::filesystem::path& path)
{
    const csv::Table t = csv::read(path);
    const std::string src = path.string();
    const std::size_t l = t.require("left", src), r = t.require("right", src), h = t.require("height", src),
                      s = t.require("size", src);
    Dendrogram d;
    d.n = t.rows.size() + 1;
    for (const auto& row : t.rows) {
        Merge m;
        m.left = std::stoull(row[l]);
        m.right = std::stoull(row[r]);
        m.height = std::stod(row[h]);
        m.size = std::stoull(row[s]);
        d.merges.push_back(m);
    }
    d.validate();
    return d;
}

}  // namespace tb
