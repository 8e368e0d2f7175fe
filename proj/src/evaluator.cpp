#include "kbe/evaluator.hpp"

#include <algorithm>
#include <atomic>
#include <exception>
#include <map>
#include <optional>
#include <ostream>
#include <thread>

#include <fmt/format.h>

namespace kbe {

std::string_view to_string(Setting s) { return s == Setting::Raw ? "raw" : "filtered"; }

RankResult rank_from_scores(std::span<const double> scores, EntityId target,
                            const std::function<bool(EntityId)>& is_known) {
    const double target_score = scores[target];
    RankResult r;
    std::size_t better = 0;
    std::size_t better_known = 0;
    for (EntityId e = 0; e < scores.size(); ++e) {
        if (e == target) continue;
        if (scores[e] < target_score) {
            ++better;
            if (is_known(e)) ++better_known;
        } else if (scores[e] == target_score) {
            ++r.ties;
        }
    }
    r.raw_rank = 1 + better;
    r.filtered_rank = 1 + better - better_known;
    return r;
}

namespace {

RankResult rank_with_buffer(const ModelParams& params, NormKind norm, const Triple& triple, Side side,
                            const TripleSet& known, const RelationProjection* projection,
                            std::vector<double>& scores) {
    scores.resize(params.num_entities());
    const EntityId fixed = side == Side::Head ? triple.tail : triple.head;
    const EntityId target = side == Side::Head ? triple.head : triple.tail;
    score_against_all_into(params, norm, triple.relation, fixed, side, projection, scores);
    return rank_from_scores(scores, target, [&](EntityId e) {
        Triple candidate = triple;
        (side == Side::Head ? candidate.head : candidate.tail) = e;
        return known.contains(candidate);
    });
}

} // namespace

RankResult rank_both(const ModelParams& params, NormKind norm, const Triple& triple, Side side,
                     const TripleSet& known, const RelationProjection* projection) {
    std::vector<double> scores;
    return rank_with_buffer(params, norm, triple, side, known, projection, scores);
}

std::size_t rank_triple(const ModelParams& params, NormKind norm, const Triple& triple, Side side,
                        Setting setting, const TripleSet& known) {
    const RankResult r = rank_both(params, norm, triple, side, known);
    return setting == Setting::Raw ? r.raw_rank : r.filtered_rank;
}

Metrics aggregate_ranks(std::span<const std::size_t> ranks) {
    Metrics m;
    m.count = ranks.size();
    if (ranks.empty()) return m;
    double sum_rank = 0.0;
    double sum_rr = 0.0;
    std::size_t top1 = 0;
    std::size_t top10 = 0;
    for (std::size_t r : ranks) {
        sum_rank += static_cast<double>(r);
        sum_rr += 1.0 / static_cast<double>(r);
        if (r <= 1) ++top1;
        if (r <= 10) ++top10;
    }
    const double n = static_cast<double>(ranks.size());
    m.mean_rank = sum_rank / n;
    m.mrr = sum_rr / n;
    m.hits_at_1 = 100.0 * static_cast<double>(top1) / n;
    m.hits_at_10 = 100.0 * static_cast<double>(top10) / n;
    return m;
}

EvalReport evaluate(const ModelParams& params, NormKind norm, std::span<const Triple> queries,
                    const TripleSet& known, const RelationCategoryStats* categories, std::size_t threads) {
    if (queries.empty()) throw DataError("no triples to evaluate");
    EvalReport report;
    report.records.resize(2 * queries.size());

    // Group query indices by relation so each worker builds one projection per relation.
    std::map<RelationId, std::vector<std::size_t>> by_relation;
    for (std::size_t i = 0; i < queries.size(); ++i) by_relation[queries[i].relation].push_back(i);
    std::vector<const std::pair<const RelationId, std::vector<std::size_t>>*> work;
    for (const auto& entry : by_relation) work.push_back(&entry);

    const bool matrices = has_relation_matrices(params.kind());
    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        std::vector<double> scores;
        for (std::size_t w = next.fetch_add(1); w < work.size(); w = next.fetch_add(1)) {
            const auto& [relation, indices] = *work[w];
            std::optional<RelationProjection> projection;
            if (matrices) projection.emplace(params, relation);
            const RelationProjection* proj = projection ? &*projection : nullptr;
            for (std::size_t i : indices) {
                for (Side side : {Side::Head, Side::Tail}) {
                    const RankResult r = rank_with_buffer(params, norm, queries[i], side, known, proj, scores);
                    report.records[2 * i + static_cast<std::size_t>(side)] =
                        RankRecord{queries[i], side, r.raw_rank, r.filtered_rank, r.ties};
                }
            }
        }
    };

    threads = std::max<std::size_t>(1, std::min(threads, work.size()));
    if (threads == 1) {
        worker();
    } else {
        std::vector<std::exception_ptr> errors(threads);
        std::vector<std::thread> pool;
        for (std::size_t t = 0; t < threads; ++t) {
            pool.emplace_back([&, t] {
                try {
                    worker();
                } catch (...) {
                    errors[t] = std::current_exception();
                }
            });
        }
        for (auto& th : pool) th.join();
        for (auto& e : errors) {
            if (e) std::rethrow_exception(e);
        }
    }

    // Reduction in query order.
    for (Setting setting : {Setting::Raw, Setting::Filtered}) {
        auto& row = report.metrics[static_cast<std::size_t>(setting)];
        for (Side side : {Side::Head, Side::Tail}) {
            std::vector<std::size_t> ranks;
            ranks.reserve(queries.size());
            for (std::size_t i = 0; i < queries.size(); ++i) {
                const auto& rec = report.records[2 * i + static_cast<std::size_t>(side)];
                ranks.push_back(setting == Setting::Raw ? rec.raw_rank : rec.filtered_rank);
            }
            row[static_cast<std::size_t>(side)] = aggregate_ranks(ranks);
        }
        const Metrics& h = row[0];
        const Metrics& t = row[1];
        row[2] = Metrics{(h.mean_rank + t.mean_rank) / 2.0, (h.mrr + t.mrr) / 2.0, (h.hits_at_1 + t.hits_at_1) / 2.0,
                         (h.hits_at_10 + t.hits_at_10) / 2.0, h.count + t.count};
    }

    if (categories != nullptr) {
        report.has_categories = true;
        std::array<std::array<std::array<std::size_t, 2>, 4>, 2> hits{};
        for (std::size_t i = 0; i < queries.size(); ++i) {
            const RelationId r = queries[i].relation;
            if (r >= categories->relations.size() || !categories->has_category(r)) continue;
            const auto c = static_cast<std::size_t>(categories->category(r));
            ++report.category_counts[c];
            for (std::size_t side = 0; side < 2; ++side) {
                const auto& rec = report.records[2 * i + side];
                if (rec.raw_rank <= 10) ++hits[0][c][side];
                if (rec.filtered_rank <= 10) ++hits[1][c][side];
            }
        }
        for (std::size_t s = 0; s < 2; ++s) {
            for (std::size_t c = 0; c < 4; ++c) {
                for (std::size_t side = 0; side < 2; ++side) {
                    report.category_hits_at_10[s][c][side] =
                        report.category_counts[c] == 0
                            ? 0.0
                            : 100.0 * static_cast<double>(hits[s][c][side]) /
                                  static_cast<double>(report.category_counts[c]);
                }
            }
        }
    }
    return report;
}

std::string format_report(const EvalReport& report) {
    std::string out;
    auto line = [&out](const std::string& s) {
        out += s;
        out += '\n';
    };
    line(fmt::format("{:<10}{:>30}{:>30}", "", "Raw", "Filtered"));
    line(fmt::format("{:<10}{:>10}{:>10}{:>10}{:>10}{:>10}{:>10}", "side", "MR", "H10", "MRR", "MR", "H10", "MRR"));
    static const std::array<const char*, 3> names = {"head", "tail", "mean"};
    for (std::size_t a = 0; a < 3; ++a) {
        const Metrics& raw = report.metrics[0][a];
        const Metrics& filt = report.metrics[1][a];
        line(fmt::format("{:<10}{:>10.2f}{:>10.2f}{:>10.4f}{:>10.2f}{:>10.2f}{:>10.4f}", names[a], raw.mean_rank,
                         raw.hits_at_10, raw.mrr, filt.mean_rank, filt.hits_at_10, filt.mrr));
    }
    line(fmt::format("queries: {}", report.metrics[0][0].count));

    if (report.has_categories) {
        line("");
        line("Hits@10 (filtered) by relation category");
        line(fmt::format("{:<10}{:>10}{:>10}{:>10}{:>10}", "side", "1-1", "1-M", "M-1", "M-M"));
        for (std::size_t side = 0; side < 2; ++side) {
            std::string row = fmt::format("{:<10}", names[side]);
            for (std::size_t c = 0; c < 4; ++c) {
                row += fmt::format("{:>10.2f}", report.category_hits_at_10[1][c][side]);
            }
            line(row);
        }
        std::string counts = fmt::format("{:<10}", "triples");
        for (std::size_t c = 0; c < 4; ++c) counts += fmt::format("{:>10}", report.category_counts[c]);
        line(counts);
    }
    return out;
}

void write_rank_dump(std::ostream& out, const EvalReport& report, const Vocab* vocab) {
    for (const auto& rec : report.records) {
        if (vocab != nullptr) {
            out << vocab->entity_name(rec.triple.head) << '\t' << vocab->relation_name(rec.triple.relation) << '\t'
                << vocab->entity_name(rec.triple.tail);
        } else {
            out << rec.triple.head << '\t' << rec.triple.relation << '\t' << rec.triple.tail;
        }
        out << '\t' << to_string(rec.side) << '\t' << rec.raw_rank << '\t' << rec.filtered_rank << '\t' << rec.ties
            << '\n';
    }
}

} // namespace kbe
