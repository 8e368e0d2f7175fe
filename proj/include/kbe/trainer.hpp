#pragma once

// Margin-based SGD with negative sampling and norm-constraint projection.

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "kbe/kb_data.hpp"
#include "kbe/model.hpp"
#include "kbe/rng.hpp"

namespace kbe {

enum class SamplerKind : std::uint8_t { Uniform = 0, Bernoulli = 1 };

std::string_view to_string(SamplerKind s);
std::optional<SamplerKind> parse_sampler_kind(std::string_view s);

struct Hyperparams {
    double margin = 5.0;
    double learning_rate = 0.0005;
    std::size_t dim = 50;
    NormKind norm = NormKind::L1;
    std::size_t epochs = 2000;
    SamplerKind sampler = SamplerKind::Bernoulli;
    std::uint64_t seed = 0;
    std::size_t negatives_per_positive = 1;

    /// Throws ConfigError on a non-positive margin, rate, dim, epoch count or
    /// negative count.
    void validate() const;

    friend bool operator==(const Hyperparams&, const Hyperparams&) = default;
};

class NumericalError : public std::runtime_error {
public:
    NumericalError(const std::string& what, std::size_t epoch, std::size_t triple_index);
    std::size_t epoch() const noexcept { return epoch_; }
    std::size_t triple_index() const noexcept { return triple_index_; }

private:
    std::size_t epoch_;
    std::size_t triple_index_;
};

class SamplingError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class WarmStartError : public ConfigError {
public:
    WarmStartError(const std::string& field, const std::string& detail);
    const std::string& field() const noexcept { return field_; }

private:
    std::string field_;
};

struct EpochStats {
    std::size_t epoch = 0;
    double loss = 0.0;
    std::size_t violations = 0;
    double seconds = 0.0;
};

struct TrainReport {
    std::vector<EpochStats> epochs;
};

/// `epoch=<n> loss=<float> violations=<int> secs=<float>`
std::string format_epoch_line(const EpochStats& stats);

/// Cold start: vectors drawn from U[-6/sqrt(k), 6/sqrt(k)] per coordinate and
/// rescaled to unit L2 norm; relation matrices set to the identity.
ModelParams init_params(ModelKind kind, std::size_t num_entities, std::size_t num_relations, std::size_t dim,
                        std::uint64_t seed);

/// Copies entity vectors, and relation vectors where both models have them,
/// from `source` into `target`. Matrices of `target` are left as they are.
ModelParams warm_start(ModelParams target, const ModelParams& source);

/// Everything an epoch needs besides the parameters.
struct TrainingData {
    TrainingData(std::span<const Triple> train, std::size_t num_entities, std::size_t num_relations);

    std::span<const Triple> train;
    std::size_t num_entities;
    TripleSet train_set;
    CorruptionStats corruption;
};

inline constexpr std::size_t kNegativeRetryBudget = 100;

/// Replaces the head or the tail with a uniformly drawn entity. The side is a
/// fair coin (Uniform) or head with probability tph / (tph + hpt) (Bernoulli).
/// Candidates present in `train_set` are redrawn, at most kNegativeRetryBudget
/// draws in total.
Triple sample_negative(const Triple& positive, SamplerKind sampler, const CorruptionStats& stats,
                       const TripleSet& train_set, std::size_t num_entities, Rng& rng);

/// Reusable buffers for apply_pair_update.
struct UpdateScratch {
    ScoreGradients positive;
    ScoreGradients negative;
    std::vector<double> entity_delta;
    std::vector<double> relation_delta;
    std::vector<double> projected;
};

/// One SGD step on a (positive, negative) pair. If the hinge
/// margin + f(pos) - f(neg) is positive, every touched block moves by
/// -lr * (df(pos)/dx - df(neg)/dx), then touched vectors with L2 norm above
/// one are rescaled to unit norm and W1 (W2) is divided by |W1 h| (|W2 t|)
/// whenever that exceeds one, for the heads (tails) of both triples.
/// Returns the hinge value, or 0 when inactive (parameters untouched).
/// Throws NumericalError (epoch and index 0) if an update is not finite.
double apply_pair_update(ModelParams& params, NormKind norm, double margin, double learning_rate,
                         const Triple& positive, const Triple& negative, UpdateScratch& scratch);

/// One pass over a fresh permutation of the training triples.
EpochStats train_epoch(ModelParams& params, const TrainingData& data, const Hyperparams& hyper, Rng& rng,
                       std::size_t epoch_index);

/// Lock-free variant: `threads` workers take disjoint shards of the permutation
/// and update the shared parameters without synchronization. Not deterministic.
EpochStats train_epoch_hogwild(ModelParams& params, const TrainingData& data, const Hyperparams& hyper, Rng& rng,
                               std::size_t epoch_index, std::size_t threads);

struct TrainOptions {
    bool hogwild = false;
    std::size_t threads = 1;
    std::function<void(const EpochStats&)> on_epoch;
};

struct TrainResult {
    ModelParams params;
    TrainReport report;
};

/// Trains `kind` on store.train. With `warm_source`, parameters start from
/// warm_start(init_params(...), *warm_source).
TrainResult train(const TripleStore& store, ModelKind kind, const Hyperparams& hyper,
                  const ModelParams* warm_source = nullptr, const TrainOptions& options = {});

} // namespace kbe
