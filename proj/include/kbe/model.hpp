#pragma once

// Translation-based score functions over shared parameter storage.
//
//   Unstructured  f = |h - t|
//   TransE        f = |h + r - t|
//   SE            f = |W1 h - W2 t|
//   STransE       f = |W1 h + r - W2 t|
//
// under either the L1 or the L2 norm. Lower scores mean more plausible triples.

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <string_view>
#include <vector>

#include "kbe/kb_data.hpp"

namespace kbe {

enum class ModelKind : std::uint8_t { Unstructured = 0, TransE = 1, SE = 2, STransE = 3 };
enum class NormKind : std::uint8_t { L1 = 0, L2 = 1 };
enum class Side : std::uint8_t { Head = 0, Tail = 1 };

constexpr bool has_relation_vectors(ModelKind k) noexcept {
    return k == ModelKind::TransE || k == ModelKind::STransE;
}
constexpr bool has_relation_matrices(ModelKind k) noexcept {
    return k == ModelKind::SE || k == ModelKind::STransE;
}

std::string_view to_string(ModelKind k);
std::string_view to_string(NormKind n);
std::string_view to_string(Side s);
std::optional<ModelKind> parse_model_kind(std::string_view s);
std::optional<NormKind> parse_norm_kind(std::string_view s);

class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Entity vectors, relation vectors and per-relation (W1, W2) matrix pairs.
/// Matrices are k x k, row-major. Blocks not used by `kind` are empty.
class ModelParams {
public:
    ModelParams() = default;
    /// Zero vectors; matrices (if any) set to the identity.
    ModelParams(ModelKind kind, std::size_t dim, std::size_t num_entities, std::size_t num_relations);

    ModelKind kind() const noexcept { return kind_; }
    std::size_t dim() const noexcept { return dim_; }
    std::size_t num_entities() const noexcept { return num_entities_; }
    std::size_t num_relations() const noexcept { return num_relations_; }

    std::span<double> entity(EntityId e);
    std::span<const double> entity(EntityId e) const;
    std::span<double> relation(RelationId r);
    std::span<const double> relation(RelationId r) const;
    std::span<double> head_matrix(RelationId r);
    std::span<const double> head_matrix(RelationId r) const;
    std::span<double> tail_matrix(RelationId r);
    std::span<const double> tail_matrix(RelationId r) const;

    // Whole blocks, for serialization and bulk checks.
    std::span<double> entity_block() noexcept { return entities_; }
    std::span<const double> entity_block() const noexcept { return entities_; }
    std::span<double> relation_block() noexcept { return relations_; }
    std::span<const double> relation_block() const noexcept { return relations_; }
    std::span<double> head_matrix_block() noexcept { return head_mats_; }
    std::span<const double> head_matrix_block() const noexcept { return head_mats_; }
    std::span<double> tail_matrix_block() noexcept { return tail_mats_; }
    std::span<const double> tail_matrix_block() const noexcept { return tail_mats_; }

    bool all_finite() const noexcept;

    friend bool operator==(const ModelParams&, const ModelParams&) = default;

private:
    void check_relation_vectors() const;
    void check_relation_matrices() const;

    ModelKind kind_ = ModelKind::TransE;
    std::size_t dim_ = 0;
    std::size_t num_entities_ = 0;
    std::size_t num_relations_ = 0;
    std::vector<double> entities_;
    std::vector<double> relations_;
    std::vector<double> head_mats_;
    std::vector<double> tail_mats_;
};

/// out = m * v for a row-major k x k matrix.
void mat_vec(std::span<const double> m, std::span<const double> v, std::span<double> out);
/// out = m^T * v for a row-major k x k matrix.
void mat_t_vec(std::span<const double> m, std::span<const double> v, std::span<double> out);

double l2_norm(std::span<const double> v);
double vector_norm(std::span<const double> v, NormKind norm);

/// d = W1 h + r - W2 t, with the blocks absent from the model kind dropped.
void residual(const ModelParams& params, const Triple& triple, std::span<double> out);

double score(const ModelParams& params, NormKind norm, const Triple& triple);

/// Partial derivatives of the score. Blocks the kind does not have are empty.
/// At d == 0 every block is zero (subgradient convention).
struct ScoreGradients {
    std::vector<double> head;
    std::vector<double> tail;
    std::vector<double> relation;
    std::vector<double> head_matrix;
    std::vector<double> tail_matrix;
    double score = 0.0;
};

ScoreGradients score_gradients(const ModelParams& params, NormKind norm, const Triple& triple);
/// Same as above, reusing `out`'s storage.
void score_gradients_into(const ModelParams& params, NormKind norm, const Triple& triple, ScoreGradients& out);

/// W1 e and W2 e for every entity under one relation. Lets ranking over all
/// candidates pay the matrix products once per relation instead of per query.
class RelationProjection {
public:
    RelationProjection(const ModelParams& params, RelationId relation);

    RelationId relation() const noexcept { return relation_; }
    std::span<const double> head_side(EntityId e) const { return {head_.data() + e * dim_, dim_}; }
    std::span<const double> tail_side(EntityId e) const { return {tail_.data() + e * dim_, dim_}; }

private:
    RelationId relation_;
    std::size_t dim_;
    std::vector<double> head_;
    std::vector<double> tail_;
};

/// Score of (e, r, fixed) for every entity e (side == Head) or (fixed, r, e)
/// (side == Tail). Entry e is bit-identical to score() on that triple.
std::vector<double> score_against_all(const ModelParams& params, NormKind norm, RelationId relation,
                                      EntityId fixed, Side side,
                                      const RelationProjection* projection = nullptr);

void score_against_all_into(const ModelParams& params, NormKind norm, RelationId relation, EntityId fixed,
                            Side side, const RelationProjection* projection, std::span<double> out);

} // namespace kbe
