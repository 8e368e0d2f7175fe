#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iterator>
#include <string>
#include <tuple>
#include <vector>

#include "kbe/kb_data.hpp"
#include "kbe/model.hpp"
#include "kbe/rng.hpp"

namespace kbe::test {

inline constexpr ModelKind kAllKinds[] = {ModelKind::Unstructured, ModelKind::TransE, ModelKind::SE,
                                          ModelKind::STransE};

/// Every block filled with U[-scale, scale]; matrices get identity plus noise.
inline ModelParams random_params(ModelKind kind, std::size_t dim, std::size_t ne, std::size_t nr, Rng& rng,
                                 double scale = 1.0) {
    ModelParams p(kind, dim, ne, nr);
    for (double& x : p.entity_block()) x = rng.uniform(-scale, scale);
    for (double& x : p.relation_block()) x = rng.uniform(-scale, scale);
    for (double& x : p.head_matrix_block()) x += rng.uniform(-scale, scale);
    for (double& x : p.tail_matrix_block()) x += rng.uniform(-scale, scale);
    return p;
}

/// Independent dense evaluation of W1 h + r - W2 t.
inline std::vector<double> naive_residual(const ModelParams& p, const Triple& t) {
    const std::size_t k = p.dim();
    std::vector<double> d(k, 0.0);
    const auto h = p.entity(t.head);
    const auto tl = p.entity(t.tail);
    for (std::size_t i = 0; i < k; ++i) {
        double lhs = 0.0;
        double rhs = 0.0;
        if (has_relation_matrices(p.kind())) {
            const auto w1 = p.head_matrix(t.relation);
            const auto w2 = p.tail_matrix(t.relation);
            for (std::size_t j = 0; j < k; ++j) {
                lhs += w1[i * k + j] * h[j];
                rhs += w2[i * k + j] * tl[j];
            }
        } else {
            lhs = h[i];
            rhs = tl[i];
        }
        if (has_relation_vectors(p.kind())) lhs += p.relation(t.relation)[i];
        d[i] = lhs - rhs;
    }
    return d;
}

inline double naive_norm(const std::vector<double>& d, NormKind norm) {
    double s = 0.0;
    for (double x : d) s += norm == NormKind::L1 ? std::abs(x) : x * x;
    return norm == NormKind::L1 ? s : std::sqrt(s);
}

/// Sort-based ranking: candidates ordered by score, the target placed first
/// among equal scores. Filtered drops known candidates other than the target.
inline std::size_t brute_force_rank(const ModelParams& p, NormKind norm, const Triple& triple, Side side,
                                    bool filtered, const TripleSet& known) {
    std::vector<std::tuple<double, int, EntityId>> cands;
    const EntityId target = side == Side::Head ? triple.head : triple.tail;
    for (EntityId e = 0; e < p.num_entities(); ++e) {
        Triple c = triple;
        (side == Side::Head ? c.head : c.tail) = e;
        if (filtered && e != target && known.contains(c)) continue;
        cands.emplace_back(naive_norm(naive_residual(p, c), norm), e == target ? 0 : 1, e);
    }
    std::sort(cands.begin(), cands.end());
    for (std::size_t i = 0; i < cands.size(); ++i) {
        if (std::get<2>(cands[i]) == target) return i + 1;
    }
    return 0;
}

class TempDir {
public:
    explicit TempDir(const std::string& tag) {
        Rng rng(std::hash<std::string>{}(tag) ^ static_cast<std::uint64_t>(::time(nullptr)));
        path_ = std::filesystem::temp_directory_path() / ("kbe_" + tag + "_" + std::to_string(rng.next() % 1000000));
        std::filesystem::create_directories(path_);
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(path_, ec);
    }
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;

    const std::filesystem::path& path() const { return path_; }
    std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

private:
    std::filesystem::path path_;
};

inline void write_file(const std::filesystem::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    out << text;
}

inline std::string read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

} // namespace kbe::test
