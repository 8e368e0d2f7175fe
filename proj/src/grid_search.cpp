#include "kbe/grid_search.hpp"

#include <tuple>

#include "kbe/evaluator.hpp"

namespace kbe {

GridSpec GridSpec::standard() {
    return GridSpec{{0.0001, 0.0005, 0.001, 0.005, 0.01}, {1.0, 3.0, 5.0}, {50, 100}, {NormKind::L1, NormKind::L2}};
}

std::vector<Hyperparams> GridSpec::cells(const Hyperparams& base) const {
    std::vector<Hyperparams> out;
    out.reserve(size());
    for (NormKind norm : norms) {
        for (std::size_t dim : dims) {
            for (double margin : margins) {
                for (double lr : learning_rates) {
                    Hyperparams h = base;
                    h.norm = norm;
                    h.dim = dim;
                    h.margin = margin;
                    h.learning_rate = lr;
                    out.push_back(h);
                }
            }
        }
    }
    return out;
}

std::size_t best_cell_index(std::span<const GridCell> cells) {
    if (cells.empty()) throw ConfigError("grid has no cells");
    auto key = [](const GridCell& c) {
        return std::make_tuple(c.valid_filtered_mr, c.hyper.dim, -c.hyper.margin, c.hyper.learning_rate,
                               static_cast<int>(c.hyper.norm));
    };
    std::size_t best = 0;
    for (std::size_t i = 1; i < cells.size(); ++i) {
        if (key(cells[i]) < key(cells[best])) best = i;
    }
    return best;
}

GridResult grid_search(const TripleStore& store, ModelKind kind, const GridSpec& grid, const Hyperparams& base,
                       const GridOptions& options) {
    if (grid.size() == 0) throw ConfigError("grid has no cells");
    if (store.valid.empty()) throw DataError("grid search needs a non-empty validation split");

    GridResult result;
    for (Hyperparams hyper : grid.cells(base)) {
        if (options.epochs_per_cell > 0) hyper.epochs = options.epochs_per_cell;
        hyper.validate();
        const ModelParams params =
            options.trainer ? options.trainer(hyper) : train(store, kind, hyper).params;
        const EvalReport report = evaluate(params, hyper.norm, store.valid, store.known, nullptr, options.eval_threads);
        GridCell cell{hyper, report.get(Setting::Filtered, Aggregate::Combined).mean_rank};
        if (options.on_cell) options.on_cell(cell);
        result.cells.push_back(cell);
    }
    result.best_index = best_cell_index(result.cells);
    result.best = result.cells[result.best_index].hyper;
    return result;
}

} // namespace kbe
