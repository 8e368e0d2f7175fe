#pragma once

// Triple datasets: vocabulary encoding, split storage, membership queries and
// the per-relation statistics used by the sampler and the evaluator.

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <unordered_map>
#include <unordered_set>
#include <vector>

namespace kbe {

using EntityId = std::uint32_t;
using RelationId = std::uint32_t;

struct Triple {
    EntityId head = 0;
    RelationId relation = 0;
    EntityId tail = 0;

    friend bool operator==(const Triple&, const Triple&) = default;
    friend auto operator<=>(const Triple&, const Triple&) = default;
};

struct TripleHash {
    std::size_t operator()(const Triple& t) const noexcept;
};

class DataError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class ParseError : public DataError {
public:
    ParseError(const std::string& source, std::size_t line, const std::string& what);
    std::size_t line() const noexcept { return line_; }

private:
    std::size_t line_;
};

/// Bidirectional name <-> dense id mapping for entities and relations.
/// Ids are assigned in first-insertion order starting at 0.
class Vocab {
public:
    EntityId add_entity(std::string_view name);
    RelationId add_relation(std::string_view name);

    std::optional<EntityId> find_entity(std::string_view name) const;
    std::optional<RelationId> find_relation(std::string_view name) const;

    const std::string& entity_name(EntityId id) const { return entity_names_.at(id); }
    const std::string& relation_name(RelationId id) const { return relation_names_.at(id); }

    std::size_t num_entities() const noexcept { return entity_names_.size(); }
    std::size_t num_relations() const noexcept { return relation_names_.size(); }

    std::span<const std::string> entity_names() const noexcept { return entity_names_; }
    std::span<const std::string> relation_names() const noexcept { return relation_names_; }

private:
    std::vector<std::string> entity_names_;
    std::vector<std::string> relation_names_;
    std::unordered_map<std::string, EntityId> entity_ids_;
    std::unordered_map<std::string, RelationId> relation_ids_;
};

/// Exact membership set over triples.
class TripleSet {
public:
    TripleSet() = default;
    explicit TripleSet(std::span<const Triple> triples);

    void insert(const Triple& t) { set_.insert(t); }
    void insert(std::span<const Triple> triples);
    bool contains(const Triple& t) const { return set_.contains(t); }
    std::size_t size() const noexcept { return set_.size(); }

private:
    std::unordered_set<Triple, TripleHash> set_;
};

enum class Split { Train, Valid, Test };

struct TripleStore {
    std::size_t num_entities = 0;
    std::size_t num_relations = 0;
    std::vector<Triple> train;
    std::vector<Triple> valid;
    std::vector<Triple> test;
    TripleSet known; // train + valid + test

    const std::vector<Triple>& split(Split s) const;
};

struct Dataset {
    Vocab vocab;
    TripleStore store;
    // Human-readable notes, e.g. entities that never occur in training.
    std::vector<std::string> warnings;
};

/// One split as surface-string triples, before encoding.
using RawTriple = std::array<std::string, 3>;

struct RawSplits {
    std::vector<RawTriple> train;
    std::vector<RawTriple> valid;
    std::vector<RawTriple> test;
};

/// Parses `head<TAB>relation<TAB>tail` lines. LF and CRLF endings are
/// accepted and empty lines are skipped; fields are kept byte-for-byte.
std::vector<RawTriple> parse_triples(std::string_view text, const std::string& source_name);
std::vector<RawTriple> read_triples_file(const std::filesystem::path& path);

/// Encodes the splits (vocabulary in first-appearance order over train, valid,
/// test) and builds the membership set. Any empty split is an error.
Dataset build_dataset(const RawSplits& splits);

Dataset load_dataset(const std::filesystem::path& train_path,
                     const std::filesystem::path& valid_path,
                     const std::filesystem::path& test_path);

/// Locates train/valid/test files in a directory. Accepts `train.txt`,
/// `valid.txt`, `test.txt` as well as the original WN18/FB15k release names.
std::array<std::filesystem::path, 3> find_split_files(const std::filesystem::path& dir);

// ---------------------------------------------------------------------------
// Relation categories

enum class RelationCategory : std::uint8_t { OneToOne = 0, OneToMany = 1, ManyToOne = 2, ManyToMany = 3 };

inline constexpr std::array<RelationCategory, 4> kAllCategories = {
    RelationCategory::OneToOne, RelationCategory::OneToMany, RelationCategory::ManyToOne,
    RelationCategory::ManyToMany};

std::string_view category_name(RelationCategory c);

/// Threshold rule on mean heads per (r, t) and mean tails per (h, r).
RelationCategory categorize(double heads_per_tail, double tails_per_head);

struct RelationCategoryEntry {
    std::size_t triple_count = 0;
    double heads_per_tail = 0.0; // a_h
    double tails_per_head = 0.0; // a_t
    RelationCategory category = RelationCategory::OneToOne;
};

struct RelationCategoryStats {
    std::vector<RelationCategoryEntry> relations; // indexed by relation id
    std::vector<RelationId> empty_relations;      // no triples; excluded

    bool has_category(RelationId r) const { return relations.at(r).triple_count > 0; }
    RelationCategory category(RelationId r) const { return relations.at(r).category; }
};

enum class CategoryScope { AllSplits, TrainOnly };

RelationCategoryStats compute_relation_categories(const TripleStore& store,
                                                  CategoryScope scope = CategoryScope::AllSplits);
RelationCategoryStats compute_relation_categories(std::span<const Triple> triples, std::size_t num_relations);

/// Percentage of `triples` falling in each category (1-1, 1-M, M-1, M-M).
/// Triples whose relation has no category are not counted.
std::array<double, 4> category_shares(const RelationCategoryStats& stats, std::span<const Triple> triples);

// ---------------------------------------------------------------------------
// Corruption side statistics

struct CorruptionEntry {
    double tails_per_head = 0.0; // tph
    double heads_per_tail = 0.0; // hpt
    double head_corruption_prob = 0.5;
    bool observed = false;
};

struct CorruptionStats {
    std::vector<CorruptionEntry> relations; // indexed by relation id
    double head_probability(RelationId r) const { return relations.at(r).head_corruption_prob; }
};

/// Relations with no training triple fall back to probability 0.5.
CorruptionStats compute_corruption_stats(std::span<const Triple> train, std::size_t num_relations);

} // namespace kbe
