#include "kbe/trainer.hpp"

#include <algorithm>
#include <array>
#include <chrono>
#include <cmath>
#include <exception>
#include <numeric>
#include <thread>

#include <fmt/format.h>

namespace kbe {

std::string_view to_string(SamplerKind s) { return s == SamplerKind::Uniform ? "uniform" : "bernoulli"; }

std::optional<SamplerKind> parse_sampler_kind(std::string_view s) {
    if (s == "uniform") return SamplerKind::Uniform;
    if (s == "bernoulli") return SamplerKind::Bernoulli;
    return std::nullopt;
}

void Hyperparams::validate() const {
    if (!(margin > 0.0) || !std::isfinite(margin)) throw ConfigError("margin must be positive");
    if (!(learning_rate > 0.0) || !std::isfinite(learning_rate)) throw ConfigError("learning rate must be positive");
    if (dim == 0) throw ConfigError("dimension must be positive");
    if (epochs == 0) throw ConfigError("epochs must be at least 1");
    if (negatives_per_positive == 0) throw ConfigError("negatives per positive must be at least 1");
}

NumericalError::NumericalError(const std::string& what, std::size_t epoch, std::size_t triple_index)
    : std::runtime_error(what), epoch_(epoch), triple_index_(triple_index) {}

WarmStartError::WarmStartError(const std::string& field, const std::string& detail)
    : ConfigError("warm start mismatch in " + field + ": " + detail), field_(field) {}

std::string format_epoch_line(const EpochStats& s) {
    return fmt::format("epoch={} loss={:.6f} violations={} secs={:.3f}", s.epoch, s.loss, s.violations, s.seconds);
}

namespace {

void normalize_to_unit(std::span<double> v) {
    const double n = l2_norm(v);
    if (n > 0.0) {
        for (double& x : v) x /= n;
    }
}

void clip_to_unit_ball(std::span<double> v) {
    const double n = l2_norm(v);
    if (n > 1.0) {
        for (double& x : v) x /= n;
    }
}

bool finite(std::span<const double> v) {
    return std::all_of(v.begin(), v.end(), [](double x) { return std::isfinite(x); });
}

} // namespace

ModelParams init_params(ModelKind kind, std::size_t num_entities, std::size_t num_relations, std::size_t dim,
                        std::uint64_t seed) {
    ModelParams params(kind, dim, num_entities, num_relations);
    Rng rng(seed);
    const double bound = 6.0 / std::sqrt(static_cast<double>(dim));
    for (EntityId e = 0; e < num_entities; ++e) {
        auto v = params.entity(e);
        for (double& x : v) x = rng.uniform(-bound, bound);
        normalize_to_unit(v);
    }
    if (has_relation_vectors(kind)) {
        for (RelationId r = 0; r < num_relations; ++r) {
            auto v = params.relation(r);
            for (double& x : v) x = rng.uniform(-bound, bound);
            normalize_to_unit(v);
        }
    }
    return params;
}

ModelParams warm_start(ModelParams target, const ModelParams& source) {
    if (target.dim() != source.dim()) {
        throw WarmStartError("dim", fmt::format("model has {} but checkpoint has {}", target.dim(), source.dim()));
    }
    if (target.num_entities() != source.num_entities()) {
        throw WarmStartError("entity count", fmt::format("model has {} but checkpoint has {}",
                                                         target.num_entities(), source.num_entities()));
    }
    if (target.num_relations() != source.num_relations()) {
        throw WarmStartError("relation count", fmt::format("model has {} but checkpoint has {}",
                                                           target.num_relations(), source.num_relations()));
    }
    if (has_relation_vectors(target.kind()) && !has_relation_vectors(source.kind())) {
        throw WarmStartError("relation vectors",
                             fmt::format("{} checkpoint has none", to_string(source.kind())));
    }
    std::copy(source.entity_block().begin(), source.entity_block().end(), target.entity_block().begin());
    if (has_relation_vectors(target.kind())) {
        std::copy(source.relation_block().begin(), source.relation_block().end(), target.relation_block().begin());
    }
    return target;
}

TrainingData::TrainingData(std::span<const Triple> train_triples, std::size_t entities, std::size_t relations)
    : train(train_triples),
      num_entities(entities),
      train_set(train_triples),
      corruption(compute_corruption_stats(train_triples, relations)) {}

Triple sample_negative(const Triple& positive, SamplerKind sampler, const CorruptionStats& stats,
                       const TripleSet& train_set, std::size_t num_entities, Rng& rng) {
    if (num_entities < 2) throw SamplingError("negative sampling needs at least two entities");
    const double head_prob = sampler == SamplerKind::Uniform ? 0.5 : stats.head_probability(positive.relation);
    const bool corrupt_head = rng.uniform01() < head_prob;
    for (std::size_t attempt = 0; attempt < kNegativeRetryBudget; ++attempt) {
        Triple candidate = positive;
        const auto e = static_cast<EntityId>(rng.uniform_index(num_entities));
        if (corrupt_head) {
            candidate.head = e;
        } else {
            candidate.tail = e;
        }
        if (!train_set.contains(candidate)) return candidate;
    }
    throw SamplingError(fmt::format("no negative found for ({}, {}, {}) after {} draws", positive.head,
                                    positive.relation, positive.tail, kNegativeRetryBudget));
}

double apply_pair_update(ModelParams& params, NormKind norm, double margin, double learning_rate,
                         const Triple& positive, const Triple& negative, UpdateScratch& scratch) {
    auto& gp = scratch.positive;
    auto& gn = scratch.negative;
    score_gradients_into(params, norm, positive, gp);
    score_gradients_into(params, norm, negative, gn);
    const double hinge = margin + gp.score - gn.score;
    if (!(hinge > 0.0)) return 0.0;

    const std::size_t k = params.dim();
    const ModelKind kind = params.kind();
    const RelationId rel = positive.relation;

    // Up to four entity slots; an entity playing several roles gets one summed delta.
    std::array<EntityId, 4> ids{};
    std::size_t used = 0;
    scratch.entity_delta.assign(4 * k, 0.0);
    auto accumulate = [&](EntityId e, const std::vector<double>& g, double sign) {
        std::size_t slot = 0;
        while (slot < used && ids[slot] != e) ++slot;
        if (slot == used) ids[used++] = e;
        double* delta = scratch.entity_delta.data() + slot * k;
        for (std::size_t i = 0; i < k; ++i) delta[i] += sign * g[i];
    };
    accumulate(positive.head, gp.head, 1.0);
    accumulate(positive.tail, gp.tail, 1.0);
    accumulate(negative.head, gn.head, -1.0);
    accumulate(negative.tail, gn.tail, -1.0);

    for (std::size_t slot = 0; slot < used; ++slot) {
        auto v = params.entity(ids[slot]);
        const double* delta = scratch.entity_delta.data() + slot * k;
        for (std::size_t i = 0; i < k; ++i) v[i] -= learning_rate * delta[i];
    }
    if (has_relation_vectors(kind)) {
        auto r = params.relation(rel);
        for (std::size_t i = 0; i < k; ++i) r[i] -= learning_rate * (gp.relation[i] - gn.relation[i]);
    }
    if (has_relation_matrices(kind)) {
        auto w1 = params.head_matrix(rel);
        auto w2 = params.tail_matrix(rel);
        for (std::size_t j = 0; j < k * k; ++j) {
            w1[j] -= learning_rate * (gp.head_matrix[j] - gn.head_matrix[j]);
            w2[j] -= learning_rate * (gp.tail_matrix[j] - gn.tail_matrix[j]);
        }
    }

    // Projection.
    for (std::size_t slot = 0; slot < used; ++slot) clip_to_unit_ball(params.entity(ids[slot]));
    if (has_relation_vectors(kind)) clip_to_unit_ball(params.relation(rel));
    if (has_relation_matrices(kind)) {
        scratch.projected.resize(k);
        auto rescale = [&](std::span<double> w, EntityId e) {
            mat_vec(w, params.entity(e), scratch.projected);
            const double n = l2_norm(scratch.projected);
            if (n > 1.0) {
                for (double& x : w) x /= n;
            }
        };
        rescale(params.head_matrix(rel), positive.head);
        rescale(params.head_matrix(rel), negative.head);
        rescale(params.tail_matrix(rel), positive.tail);
        rescale(params.tail_matrix(rel), negative.tail);
    }

    bool ok = true;
    for (std::size_t slot = 0; slot < used; ++slot) ok = ok && finite(params.entity(ids[slot]));
    if (has_relation_vectors(kind)) ok = ok && finite(params.relation(rel));
    if (has_relation_matrices(kind)) ok = ok && finite(params.head_matrix(rel)) && finite(params.tail_matrix(rel));
    if (!ok) throw NumericalError("non-finite parameter after SGD step", 0, 0);
    return hinge;
}

namespace {

std::vector<std::size_t> shuffled_order(std::size_t n, Rng& rng) {
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    for (std::size_t i = n; i > 1; --i) {
        const auto j = static_cast<std::size_t>(rng.uniform_index(i));
        std::swap(order[i - 1], order[j]);
    }
    return order;
}

struct ShardResult {
    double loss = 0.0;
    std::size_t violations = 0;
};

ShardResult run_shard(ModelParams& params, const TrainingData& data, const Hyperparams& hyper, Rng& rng,
                      std::span<const std::size_t> order, std::size_t epoch_index) {
    ShardResult result;
    UpdateScratch scratch;
    for (std::size_t index : order) {
        const Triple& pos = data.train[index];
        for (std::size_t n = 0; n < hyper.negatives_per_positive; ++n) {
            const Triple neg =
                sample_negative(pos, hyper.sampler, data.corruption, data.train_set, data.num_entities, rng);
            double hinge = 0.0;
            try {
                hinge = apply_pair_update(params, hyper.norm, hyper.margin, hyper.learning_rate, pos, neg, scratch);
            } catch (const NumericalError& e) {
                throw NumericalError(fmt::format("{} (epoch {}, training triple {})", e.what(), epoch_index, index),
                                     epoch_index, index);
            }
            if (hinge > 0.0) {
                result.loss += hinge;
                ++result.violations;
            }
        }
    }
    return result;
}

double seconds_since(std::chrono::steady_clock::time_point start) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

} // namespace

EpochStats train_epoch(ModelParams& params, const TrainingData& data, const Hyperparams& hyper, Rng& rng,
                       std::size_t epoch_index) {
    const auto start = std::chrono::steady_clock::now();
    const auto order = shuffled_order(data.train.size(), rng);
    const ShardResult r = run_shard(params, data, hyper, rng, order, epoch_index);
    return EpochStats{epoch_index, r.loss, r.violations, seconds_since(start)};
}

EpochStats train_epoch_hogwild(ModelParams& params, const TrainingData& data, const Hyperparams& hyper, Rng& rng,
                               std::size_t epoch_index, std::size_t threads) {
    if (threads <= 1) return train_epoch(params, data, hyper, rng, epoch_index);
    const auto start = std::chrono::steady_clock::now();
    const auto order = shuffled_order(data.train.size(), rng);
    std::vector<std::uint64_t> seeds(threads);
    for (auto& s : seeds) s = rng.next();

    std::vector<ShardResult> results(threads);
    std::vector<std::exception_ptr> errors(threads);
    std::vector<std::thread> workers;
    const std::size_t chunk = (order.size() + threads - 1) / threads;
    for (std::size_t t = 0; t < threads; ++t) {
        const std::size_t lo = std::min(order.size(), t * chunk);
        const std::size_t hi = std::min(order.size(), lo + chunk);
        workers.emplace_back([&, t, lo, hi] {
            try {
                Rng local(seeds[t]);
                results[t] = run_shard(params, data, hyper, local, std::span(order).subspan(lo, hi - lo),
                                       epoch_index);
            } catch (...) {
                errors[t] = std::current_exception();
            }
        });
    }
    for (auto& w : workers) w.join();
    for (auto& e : errors) {
        if (e) std::rethrow_exception(e);
    }
    EpochStats stats{epoch_index, 0.0, 0, 0.0};
    for (const auto& r : results) {
        stats.loss += r.loss;
        stats.violations += r.violations;
    }
    stats.seconds = seconds_since(start);
    return stats;
}

TrainResult train(const TripleStore& store, ModelKind kind, const Hyperparams& hyper, const ModelParams* warm_source,
                  const TrainOptions& options) {
    hyper.validate();
    if (store.train.empty()) throw DataError("training split is empty");

    TrainingData data(store.train, store.num_entities, store.num_relations);
    TrainResult result;
    result.params = init_params(kind, store.num_entities, store.num_relations, hyper.dim, derive_seed(hyper.seed, 0));
    if (warm_source != nullptr) result.params = warm_start(std::move(result.params), *warm_source);

    Rng rng(derive_seed(hyper.seed, 1));
    const bool parallel = options.hogwild && options.threads > 1;
    for (std::size_t epoch = 1; epoch <= hyper.epochs; ++epoch) {
        const EpochStats stats = parallel
                                     ? train_epoch_hogwild(result.params, data, hyper, rng, epoch, options.threads)
                                     : train_epoch(result.params, data, hyper, rng, epoch);
        result.report.epochs.push_back(stats);
        if (options.on_epoch) options.on_epoch(stats);
    }
    return result;
}

} // namespace kbe
