#include "kbe/kb_data.hpp"

#include <fstream>
#include <set>
#include <sstream>
#include <utility>

namespace kbe {

std::size_t TripleHash::operator()(const Triple& t) const noexcept {
    std::uint64_t x = (static_cast<std::uint64_t>(t.head) << 32) ^ t.tail;
    x ^= static_cast<std::uint64_t>(t.relation) * 0x9E3779B97F4A7C15ULL;
    // splitmix64 finalizer
    x ^= x >> 30;
    x *= 0xBF58476D1CE4E5B9ULL;
    x ^= x >> 27;
    x *= 0x94D049BB133111EBULL;
    x ^= x >> 31;
    return static_cast<std::size_t>(x);
}

ParseError::ParseError(const std::string& source, std::size_t line, const std::string& what)
    : DataError(source + ":" + std::to_string(line) + ": " + what), line_(line) {}

EntityId Vocab::add_entity(std::string_view name) {
    auto [it, inserted] = entity_ids_.try_emplace(std::string(name), static_cast<EntityId>(entity_names_.size()));
    if (inserted) entity_names_.emplace_back(name);
    return it->second;
}

RelationId Vocab::add_relation(std::string_view name) {
    auto [it, inserted] =
        relation_ids_.try_emplace(std::string(name), static_cast<RelationId>(relation_names_.size()));
    if (inserted) relation_names_.emplace_back(name);
    return it->second;
}

std::optional<EntityId> Vocab::find_entity(std::string_view name) const {
    auto it = entity_ids_.find(std::string(name));
    if (it == entity_ids_.end()) return std::nullopt;
    return it->second;
}

std::optional<RelationId> Vocab::find_relation(std::string_view name) const {
    auto it = relation_ids_.find(std::string(name));
    if (it == relation_ids_.end()) return std::nullopt;
    return it->second;
}

TripleSet::TripleSet(std::span<const Triple> triples) { insert(triples); }

void TripleSet::insert(std::span<const Triple> triples) {
    set_.reserve(set_.size() + triples.size());
    for (const auto& t : triples) set_.insert(t);
}

const std::vector<Triple>& TripleStore::split(Split s) const {
    switch (s) {
    case Split::Train: return train;
    case Split::Valid: return valid;
    case Split::Test: return test;
    }
    throw std::invalid_argument("unknown split");
}

std::vector<RawTriple> parse_triples(std::string_view text, const std::string& source_name) {
    std::vector<RawTriple> out;
    std::size_t line_no = 0;
    std::size_t pos = 0;
    while (pos < text.size()) {
        std::size_t end = text.find('\n', pos);
        if (end == std::string_view::npos) end = text.size();
        std::string_view line = text.substr(pos, end - pos);
        pos = end + 1;
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
        if (line.empty()) continue;

        RawTriple fields;
        std::size_t count = 0;
        std::size_t start = 0;
        while (true) {
            std::size_t tab = line.find('\t', start);
            std::string_view field = line.substr(start, tab == std::string_view::npos ? line.npos : tab - start);
            if (count < 3) fields[count] = std::string(field);
            ++count;
            if (tab == std::string_view::npos) break;
            start = tab + 1;
        }
        if (count != 3) {
            throw ParseError(source_name, line_no,
                             "expected 3 tab-separated fields, found " + std::to_string(count));
        }
        out.push_back(std::move(fields));
    }
    return out;
}

std::vector<RawTriple> read_triples_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open " + path.string());
    std::ostringstream buf;
    buf << in.rdbuf();
    auto triples = parse_triples(buf.str(), path.string());
    if (triples.empty()) throw DataError(path.string() + ": file contains no triples");
    return triples;
}

namespace {

std::vector<Triple> encode(const std::vector<RawTriple>& raw, Vocab& vocab) {
    std::vector<Triple> out;
    out.reserve(raw.size());
    for (const auto& [h, r, t] : raw) {
        Triple triple;
        triple.head = vocab.add_entity(h);
        triple.relation = vocab.add_relation(r);
        triple.tail = vocab.add_entity(t);
        out.push_back(triple);
    }
    return out;
}

} // namespace

Dataset build_dataset(const RawSplits& splits) {
    if (splits.train.empty()) throw DataError("training split is empty");
    if (splits.valid.empty()) throw DataError("validation split is empty");
    if (splits.test.empty()) throw DataError("test split is empty");

    Dataset ds;
    ds.store.train = encode(splits.train, ds.vocab);
    const std::size_t train_entities = ds.vocab.num_entities();
    const std::size_t train_relations = ds.vocab.num_relations();
    ds.store.valid = encode(splits.valid, ds.vocab);
    ds.store.test = encode(splits.test, ds.vocab);
    ds.store.num_entities = ds.vocab.num_entities();
    ds.store.num_relations = ds.vocab.num_relations();

    ds.store.known.insert(ds.store.train);
    ds.store.known.insert(ds.store.valid);
    ds.store.known.insert(ds.store.test);

    if (ds.vocab.num_entities() > train_entities) {
        ds.warnings.push_back(std::to_string(ds.vocab.num_entities() - train_entities) +
                              " entities appear only in validation/test splits");
    }
    if (ds.vocab.num_relations() > train_relations) {
        ds.warnings.push_back(std::to_string(ds.vocab.num_relations() - train_relations) +
                              " relations appear only in validation/test splits");
    }
    return ds;
}

Dataset load_dataset(const std::filesystem::path& train_path,
                     const std::filesystem::path& valid_path,
                     const std::filesystem::path& test_path) {
    RawSplits raw;
    raw.train = read_triples_file(train_path);
    raw.valid = read_triples_file(valid_path);
    raw.test = read_triples_file(test_path);
    return build_dataset(raw);
}

std::array<std::filesystem::path, 3> find_split_files(const std::filesystem::path& dir) {
    static const std::array<std::array<const char*, 3>, 3> layouts = {{
        {"train.txt", "valid.txt", "test.txt"},
        {"wordnet-mlj12-train.txt", "wordnet-mlj12-valid.txt", "wordnet-mlj12-test.txt"},
        {"freebase_mtr100_mte100-train.txt", "freebase_mtr100_mte100-valid.txt",
         "freebase_mtr100_mte100-test.txt"},
    }};
    for (const auto& names : layouts) {
        std::array<std::filesystem::path, 3> paths = {dir / names[0], dir / names[1], dir / names[2]};
        if (std::filesystem::exists(paths[0]) && std::filesystem::exists(paths[1]) &&
            std::filesystem::exists(paths[2])) {
            return paths;
        }
    }
    throw DataError("no train/valid/test files found in " + dir.string());
}

// ---------------------------------------------------------------------------

std::string_view category_name(RelationCategory c) {
    switch (c) {
    case RelationCategory::OneToOne: return "1-1";
    case RelationCategory::OneToMany: return "1-M";
    case RelationCategory::ManyToOne: return "M-1";
    case RelationCategory::ManyToMany: return "M-M";
    }
    return "?";
}

RelationCategory categorize(double heads_per_tail, double tails_per_head) {
    const bool many_heads = heads_per_tail >= 1.5;
    const bool many_tails = tails_per_head >= 1.5;
    if (!many_heads && !many_tails) return RelationCategory::OneToOne;
    if (many_heads && !many_tails) return RelationCategory::ManyToOne;
    if (!many_heads) return RelationCategory::OneToMany;
    return RelationCategory::ManyToMany;
}

RelationCategoryStats compute_relation_categories(std::span<const Triple> triples, std::size_t num_relations) {
    // Triples are counted with multiplicity; pairs are distinct.
    std::vector<std::size_t> count(num_relations, 0);
    std::set<std::pair<RelationId, EntityId>> rel_tail;
    std::set<std::pair<EntityId, RelationId>> head_rel;
    for (const auto& t : triples) {
        ++count.at(t.relation);
        rel_tail.emplace(t.relation, t.tail);
        head_rel.emplace(t.head, t.relation);
    }
    std::vector<std::size_t> distinct_rel_tail(num_relations, 0);
    std::vector<std::size_t> distinct_head_rel(num_relations, 0);
    for (const auto& [r, t] : rel_tail) ++distinct_rel_tail[r];
    for (const auto& [h, r] : head_rel) ++distinct_head_rel[r];

    RelationCategoryStats stats;
    stats.relations.resize(num_relations);
    for (RelationId r = 0; r < num_relations; ++r) {
        auto& e = stats.relations[r];
        e.triple_count = count[r];
        if (count[r] == 0) {
            stats.empty_relations.push_back(r);
            continue;
        }
        e.heads_per_tail = static_cast<double>(count[r]) / static_cast<double>(distinct_rel_tail[r]);
        e.tails_per_head = static_cast<double>(count[r]) / static_cast<double>(distinct_head_rel[r]);
        e.category = categorize(e.heads_per_tail, e.tails_per_head);
    }
    return stats;
}

RelationCategoryStats compute_relation_categories(const TripleStore& store, CategoryScope scope) {
    if (store.train.empty()) throw DataError("cannot compute relation categories of an empty store");
    if (scope == CategoryScope::TrainOnly) {
        return compute_relation_categories(store.train, store.num_relations);
    }
    std::vector<Triple> all;
    all.reserve(store.train.size() + store.valid.size() + store.test.size());
    all.insert(all.end(), store.train.begin(), store.train.end());
    all.insert(all.end(), store.valid.begin(), store.valid.end());
    all.insert(all.end(), store.test.begin(), store.test.end());
    return compute_relation_categories(all, store.num_relations);
}

std::array<double, 4> category_shares(const RelationCategoryStats& stats, std::span<const Triple> triples) {
    std::array<std::size_t, 4> counts{};
    std::size_t total = 0;
    for (const auto& t : triples) {
        if (!stats.has_category(t.relation)) continue;
        ++counts[static_cast<std::size_t>(stats.category(t.relation))];
        ++total;
    }
    std::array<double, 4> shares{};
    if (total == 0) return shares;
    for (std::size_t i = 0; i < 4; ++i) shares[i] = 100.0 * static_cast<double>(counts[i]) / static_cast<double>(total);
    return shares;
}

// ---------------------------------------------------------------------------

CorruptionStats compute_corruption_stats(std::span<const Triple> train, std::size_t num_relations) {
    if (train.empty()) throw DataError("cannot compute corruption statistics without training triples");
    std::vector<std::size_t> count(num_relations, 0);
    std::set<std::pair<RelationId, EntityId>> heads;
    std::set<std::pair<RelationId, EntityId>> tails;
    for (const auto& t : train) {
        ++count.at(t.relation);
        heads.emplace(t.relation, t.head);
        tails.emplace(t.relation, t.tail);
    }
    std::vector<std::size_t> distinct_heads(num_relations, 0);
    std::vector<std::size_t> distinct_tails(num_relations, 0);
    for (const auto& [r, h] : heads) ++distinct_heads[r];
    for (const auto& [r, t] : tails) ++distinct_tails[r];

    CorruptionStats stats;
    stats.relations.resize(num_relations);
    for (RelationId r = 0; r < num_relations; ++r) {
        if (count[r] == 0) continue;
        auto& e = stats.relations[r];
        e.observed = true;
        e.tails_per_head = static_cast<double>(count[r]) / static_cast<double>(distinct_heads[r]);
        e.heads_per_tail = static_cast<double>(count[r]) / static_cast<double>(distinct_tails[r]);
        e.head_corruption_prob = e.tails_per_head / (e.tails_per_head + e.heads_per_tail);
    }
    return stats;
}

} // namespace kbe
