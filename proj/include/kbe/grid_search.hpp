#pragma once

// Hyperparameter selection by filtered mean rank on the validation split.

#include <cstddef>
#include <functional>
#include <span>
#include <vector>

#include "kbe/kb_data.hpp"
#include "kbe/model.hpp"
#include "kbe/trainer.hpp"

namespace kbe {

struct GridSpec {
    std::vector<double> learning_rates;
    std::vector<double> margins;
    std::vector<std::size_t> dims;
    std::vector<NormKind> norms;

    /// lr in {0.0001, 0.0005, 0.001, 0.005, 0.01}, margin in {1, 3, 5},
    /// k in {50, 100}, norm in {L1, L2}.
    static GridSpec standard();

    std::size_t size() const noexcept {
        return learning_rates.size() * margins.size() * dims.size() * norms.size();
    }
    /// Every combination, with the remaining fields taken from `base`.
    std::vector<Hyperparams> cells(const Hyperparams& base) const;
};

struct GridCell {
    Hyperparams hyper;
    double valid_filtered_mr = 0.0;
};

struct GridResult {
    std::size_t best_index = 0;
    Hyperparams best;
    std::vector<GridCell> cells;
};

/// Lowest filtered MR; ties go to lower k, then higher margin, then lower
/// learning rate, then L1.
std::size_t best_cell_index(std::span<const GridCell> cells);

using CellTrainer = std::function<ModelParams(const Hyperparams&)>;

struct GridOptions {
    /// Epochs per cell; 0 keeps base.epochs.
    std::size_t epochs_per_cell = 0;
    std::size_t eval_threads = 1;
    /// Replaces the default per-cell training (cold start on store.train).
    CellTrainer trainer;
    std::function<void(const GridCell&)> on_cell;
};

GridResult grid_search(const TripleStore& store, ModelKind kind, const GridSpec& grid, const Hyperparams& base,
                       const GridOptions& options = {});

} // namespace kbe
