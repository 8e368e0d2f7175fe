#include "kbe/model.hpp"

#include <cmath>
#include <string>

namespace kbe {

std::string_view to_string(ModelKind k) {
    switch (k) {
    case ModelKind::Unstructured: return "unstructured";
    case ModelKind::TransE: return "transe";
    case ModelKind::SE: return "se";
    case ModelKind::STransE: return "stranse";
    }
    return "?";
}

std::string_view to_string(NormKind n) { return n == NormKind::L1 ? "l1" : "l2"; }

std::string_view to_string(Side s) { return s == Side::Head ? "head" : "tail"; }

std::optional<ModelKind> parse_model_kind(std::string_view s) {
    for (auto k : {ModelKind::Unstructured, ModelKind::TransE, ModelKind::SE, ModelKind::STransE}) {
        if (s == to_string(k)) return k;
    }
    return std::nullopt;
}

std::optional<NormKind> parse_norm_kind(std::string_view s) {
    if (s == "l1" || s == "L1") return NormKind::L1;
    if (s == "l2" || s == "L2") return NormKind::L2;
    return std::nullopt;
}

ModelParams::ModelParams(ModelKind kind, std::size_t dim, std::size_t num_entities, std::size_t num_relations)
    : kind_(kind), dim_(dim), num_entities_(num_entities), num_relations_(num_relations) {
    if (dim == 0) throw ConfigError("embedding dimension must be positive");
    entities_.assign(num_entities * dim, 0.0);
    if (has_relation_vectors(kind)) relations_.assign(num_relations * dim, 0.0);
    if (has_relation_matrices(kind)) {
        head_mats_.assign(num_relations * dim * dim, 0.0);
        for (std::size_t r = 0; r < num_relations; ++r) {
            for (std::size_t i = 0; i < dim; ++i) head_mats_[r * dim * dim + i * dim + i] = 1.0;
        }
        tail_mats_ = head_mats_;
    }
}

void ModelParams::check_relation_vectors() const {
    if (!has_relation_vectors(kind_)) {
        throw ConfigError(std::string(to_string(kind_)) + " model has no relation vectors");
    }
}

void ModelParams::check_relation_matrices() const {
    if (!has_relation_matrices(kind_)) {
        throw ConfigError(std::string(to_string(kind_)) + " model has no relation matrices");
    }
}

std::span<double> ModelParams::entity(EntityId e) { return {entities_.data() + e * dim_, dim_}; }
std::span<const double> ModelParams::entity(EntityId e) const { return {entities_.data() + e * dim_, dim_}; }

std::span<double> ModelParams::relation(RelationId r) {
    check_relation_vectors();
    return {relations_.data() + r * dim_, dim_};
}
std::span<const double> ModelParams::relation(RelationId r) const {
    check_relation_vectors();
    return {relations_.data() + r * dim_, dim_};
}

std::span<double> ModelParams::head_matrix(RelationId r) {
    check_relation_matrices();
    return {head_mats_.data() + r * dim_ * dim_, dim_ * dim_};
}
std::span<const double> ModelParams::head_matrix(RelationId r) const {
    check_relation_matrices();
    return {head_mats_.data() + r * dim_ * dim_, dim_ * dim_};
}
std::span<double> ModelParams::tail_matrix(RelationId r) {
    check_relation_matrices();
    return {tail_mats_.data() + r * dim_ * dim_, dim_ * dim_};
}
std::span<const double> ModelParams::tail_matrix(RelationId r) const {
    check_relation_matrices();
    return {tail_mats_.data() + r * dim_ * dim_, dim_ * dim_};
}

bool ModelParams::all_finite() const noexcept {
    for (const auto* block : {&entities_, &relations_, &head_mats_, &tail_mats_}) {
        for (double x : *block) {
            if (!std::isfinite(x)) return false;
        }
    }
    return true;
}

// ---------------------------------------------------------------------------

void mat_vec(std::span<const double> m, std::span<const double> v, std::span<double> out) {
    const std::size_t k = v.size();
    for (std::size_t i = 0; i < k; ++i) {
        const double* row = m.data() + i * k;
        double acc = 0.0;
        for (std::size_t j = 0; j < k; ++j) acc += row[j] * v[j];
        out[i] = acc;
    }
}

void mat_t_vec(std::span<const double> m, std::span<const double> v, std::span<double> out) {
    const std::size_t k = v.size();
    for (std::size_t j = 0; j < k; ++j) out[j] = 0.0;
    for (std::size_t i = 0; i < k; ++i) {
        const double* row = m.data() + i * k;
        const double vi = v[i];
        for (std::size_t j = 0; j < k; ++j) out[j] += row[j] * vi;
    }
}

double l2_norm(std::span<const double> v) {
    double acc = 0.0;
    for (double x : v) acc += x * x;
    return std::sqrt(acc);
}

double vector_norm(std::span<const double> v, NormKind norm) {
    if (norm == NormKind::L2) return l2_norm(v);
    double acc = 0.0;
    for (double x : v) acc += std::fabs(x);
    return acc;
}

namespace {

// d[i] = (lhs[i] + r[i]) - rhs[i], or lhs[i] - rhs[i] without a translation.
// Every scoring path funnels through here so the operation order is shared.
inline void combine(std::span<const double> lhs, const double* translation, std::span<const double> rhs,
                    std::span<double> out) {
    const std::size_t k = out.size();
    if (translation != nullptr) {
        for (std::size_t i = 0; i < k; ++i) out[i] = (lhs[i] + translation[i]) - rhs[i];
    } else {
        for (std::size_t i = 0; i < k; ++i) out[i] = lhs[i] - rhs[i];
    }
}

void check_ids(const ModelParams& p, const Triple& t) {
    if (t.head >= p.num_entities() || t.tail >= p.num_entities() || t.relation >= p.num_relations()) {
        throw std::out_of_range("triple id out of range for model parameters");
    }
}

} // namespace

void residual(const ModelParams& params, const Triple& triple, std::span<double> out) {
    check_ids(params, triple);
    const std::size_t k = params.dim();
    const ModelKind kind = params.kind();
    const double* translation = has_relation_vectors(kind) ? params.relation(triple.relation).data() : nullptr;
    if (has_relation_matrices(kind)) {
        std::vector<double> lhs(k), rhs(k);
        mat_vec(params.head_matrix(triple.relation), params.entity(triple.head), lhs);
        mat_vec(params.tail_matrix(triple.relation), params.entity(triple.tail), rhs);
        combine(lhs, translation, rhs, out);
    } else {
        combine(params.entity(triple.head), translation, params.entity(triple.tail), out);
    }
}

double score(const ModelParams& params, NormKind norm, const Triple& triple) {
    std::vector<double> d(params.dim());
    residual(params, triple, d);
    return vector_norm(d, norm);
}

void score_gradients_into(const ModelParams& params, NormKind norm, const Triple& triple, ScoreGradients& out) {
    const std::size_t k = params.dim();
    const ModelKind kind = params.kind();
    std::vector<double> d(k);
    residual(params, triple, d);
    out.score = vector_norm(d, norm);

    // s = df/dd
    std::vector<double> s(k, 0.0);
    if (norm == NormKind::L1) {
        for (std::size_t i = 0; i < k; ++i) s[i] = d[i] > 0.0 ? 1.0 : (d[i] < 0.0 ? -1.0 : 0.0);
    } else if (out.score > 0.0) {
        for (std::size_t i = 0; i < k; ++i) s[i] = d[i] / out.score;
    }

    out.head.assign(k, 0.0);
    out.tail.assign(k, 0.0);
    if (has_relation_matrices(kind)) {
        const auto w1 = params.head_matrix(triple.relation);
        const auto w2 = params.tail_matrix(triple.relation);
        mat_t_vec(w1, s, out.head);
        mat_t_vec(w2, s, out.tail);
        for (double& x : out.tail) x = -x;

        const auto h = params.entity(triple.head);
        const auto t = params.entity(triple.tail);
        out.head_matrix.assign(k * k, 0.0);
        out.tail_matrix.assign(k * k, 0.0);
        for (std::size_t i = 0; i < k; ++i) {
            for (std::size_t j = 0; j < k; ++j) {
                out.head_matrix[i * k + j] = s[i] * h[j];
                out.tail_matrix[i * k + j] = -s[i] * t[j];
            }
        }
    } else {
        for (std::size_t i = 0; i < k; ++i) {
            out.head[i] = s[i];
            out.tail[i] = -s[i];
        }
        out.head_matrix.clear();
        out.tail_matrix.clear();
    }

    if (has_relation_vectors(kind)) {
        out.relation = s;
    } else {
        out.relation.clear();
    }
}

ScoreGradients score_gradients(const ModelParams& params, NormKind norm, const Triple& triple) {
    ScoreGradients g;
    score_gradients_into(params, norm, triple, g);
    return g;
}

// ---------------------------------------------------------------------------

RelationProjection::RelationProjection(const ModelParams& params, RelationId relation)
    : relation_(relation), dim_(params.dim()) {
    const std::size_t n = params.num_entities();
    head_.resize(n * dim_);
    tail_.resize(n * dim_);
    const auto w1 = params.head_matrix(relation);
    const auto w2 = params.tail_matrix(relation);
    for (EntityId e = 0; e < n; ++e) {
        mat_vec(w1, params.entity(e), {head_.data() + e * dim_, dim_});
        mat_vec(w2, params.entity(e), {tail_.data() + e * dim_, dim_});
    }
}

void score_against_all_into(const ModelParams& params, NormKind norm, RelationId relation, EntityId fixed,
                            Side side, const RelationProjection* projection, std::span<double> out) {
    const std::size_t n = params.num_entities();
    const std::size_t k = params.dim();
    if (fixed >= n || relation >= params.num_relations()) {
        throw std::out_of_range("query id out of range for model parameters");
    }
    if (out.size() != n) throw std::invalid_argument("score buffer must hold one entry per entity");
    const ModelKind kind = params.kind();
    const bool matrices = has_relation_matrices(kind);
    if (projection != nullptr && projection->relation() != relation) {
        throw std::invalid_argument("projection computed for a different relation");
    }

    std::optional<RelationProjection> local;
    if (matrices && projection == nullptr) {
        local.emplace(params, relation);
        projection = &*local;
    }

    auto head_side = [&](EntityId e) { return matrices ? projection->head_side(e) : params.entity(e); };
    auto tail_side = [&](EntityId e) { return matrices ? projection->tail_side(e) : params.entity(e); };

    const double* translation = has_relation_vectors(kind) ? params.relation(relation).data() : nullptr;
    std::vector<double> d(k);
    if (side == Side::Tail) {
        // Shared part: W1 h + r, added in the same order as combine().
        const auto lhs = head_side(fixed);
        std::vector<double> u(k);
        for (std::size_t i = 0; i < k; ++i) u[i] = translation ? lhs[i] + translation[i] : lhs[i];
        for (EntityId e = 0; e < n; ++e) {
            const auto rhs = tail_side(e);
            for (std::size_t i = 0; i < k; ++i) d[i] = u[i] - rhs[i];
            out[e] = vector_norm(d, norm);
        }
    } else {
        const auto rhs = tail_side(fixed);
        for (EntityId e = 0; e < n; ++e) {
            combine(head_side(e), translation, rhs, d);
            out[e] = vector_norm(d, norm);
        }
    }
}

std::vector<double> score_against_all(const ModelParams& params, NormKind norm, RelationId relation,
                                      EntityId fixed, Side side, const RelationProjection* projection) {
    std::vector<double> out(params.num_entities());
    score_against_all_into(params, norm, relation, fixed, side, projection, out);
    return out;
}

} // namespace kbe
