#pragma once

// A small deterministic knowledge base for smoke tests: 20 entities in a chain
// of 4 groups of 5. `same` links every ordered pair inside a group (self pairs
// included) and `next` links every member of group g to every member of group
// g + 1. A fixed stride of the enumerated triples is held out for valid/test;
// each held-out fact is implied by the group structure of the training facts.

#include <cstddef>
#include <filesystem>

#include "kbe/kb_data.hpp"

namespace kbe {

inline constexpr std::size_t kToyGroups = 4;
inline constexpr std::size_t kToyGroupSize = 5;
inline constexpr std::size_t kToyEntities = kToyGroups * kToyGroupSize;

RawSplits make_toy_kb();

/// Writes train.txt, valid.txt and test.txt into `dir` (created if needed).
void write_toy_kb(const std::filesystem::path& dir);

} // namespace kbe
