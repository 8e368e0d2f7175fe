#pragma once

// Link-prediction ranking: raw and filtered mean rank, MRR and Hits@k for
// head and tail prediction, plus Hits@10 per relation category.

#include <array>
#include <cstddef>
#include <functional>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "kbe/kb_data.hpp"
#include "kbe/model.hpp"

namespace kbe {

enum class Setting : std::uint8_t { Raw = 0, Filtered = 1 };

std::string_view to_string(Setting s);

struct RankResult {
    std::size_t raw_rank = 0;
    std::size_t filtered_rank = 0;
    std::size_t ties = 0; // other candidates scoring exactly as the target (raw)
};

/// Rank of `target` among `scores`: 1 + number of candidates with a strictly
/// smaller score. Filtered rank additionally skips candidates e != target for
/// which `is_known(e)` holds.
RankResult rank_from_scores(std::span<const double> scores, EntityId target,
                            const std::function<bool(EntityId)>& is_known);

/// Ranks the entity on `side` of `triple` against every substitution on that side.
RankResult rank_both(const ModelParams& params, NormKind norm, const Triple& triple, Side side,
                     const TripleSet& known, const RelationProjection* projection = nullptr);

std::size_t rank_triple(const ModelParams& params, NormKind norm, const Triple& triple, Side side,
                        Setting setting, const TripleSet& known);

struct Metrics {
    double mean_rank = 0.0;
    double mrr = 0.0;
    double hits_at_1 = 0.0;  // percent
    double hits_at_10 = 0.0; // percent
    std::size_t count = 0;
};

Metrics aggregate_ranks(std::span<const std::size_t> ranks);

struct RankRecord {
    Triple triple;
    Side side = Side::Head;
    std::size_t raw_rank = 0;
    std::size_t filtered_rank = 0;
    std::size_t ties = 0;
};

enum class Aggregate : std::uint8_t { Head = 0, Tail = 1, Combined = 2 };

struct EvalReport {
    // [setting][head, tail, combined]; combined averages head and tail.
    std::array<std::array<Metrics, 3>, 2> metrics{};
    // Hits@10 percent, [setting][category][side].
    std::array<std::array<std::array<double, 2>, 4>, 2> category_hits_at_10{};
    std::array<std::size_t, 4> category_counts{}; // query triples per category
    bool has_categories = false;
    // Two records per query triple (head, tail), in query order.
    std::vector<RankRecord> records;

    const Metrics& get(Setting s, Aggregate a) const {
        return metrics[static_cast<std::size_t>(s)][static_cast<std::size_t>(a)];
    }
};

/// Ranks every query triple on both sides. Work is split by relation across
/// `threads` workers; results do not depend on the worker count.
EvalReport evaluate(const ModelParams& params, NormKind norm, std::span<const Triple> queries,
                    const TripleSet& known, const RelationCategoryStats* categories = nullptr,
                    std::size_t threads = 1);

/// Raw/filtered MR, MRR, Hits@10 table plus the category grid when present.
std::string format_report(const EvalReport& report);

/// One line per (triple, side): `h r t side raw_rank filtered_rank ties`,
/// tab-separated. Names come from `vocab` when given, ids otherwise.
void write_rank_dump(std::ostream& out, const EvalReport& report, const Vocab* vocab = nullptr);

} // namespace kbe
