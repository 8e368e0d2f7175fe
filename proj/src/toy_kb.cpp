#include "kbe/toy_kb.hpp"

#include <fstream>

#include <fmt/format.h>

namespace kbe {

namespace {

std::string entity(std::size_t group, std::size_t member) {
    return fmt::format("e{:02}", group * kToyGroupSize + member);
}

} // namespace

RawSplits make_toy_kb() {
    std::vector<RawTriple> all;
    for (std::size_t g = 0; g < kToyGroups; ++g) {
        for (std::size_t a = 0; a < kToyGroupSize; ++a) {
            for (std::size_t b = 0; b < kToyGroupSize; ++b) all.push_back({entity(g, a), "same", entity(g, b)});
        }
    }
    for (std::size_t g = 0; g + 1 < kToyGroups; ++g) {
        for (std::size_t a = 0; a < kToyGroupSize; ++a) {
            for (std::size_t b = 0; b < kToyGroupSize; ++b) all.push_back({entity(g, a), "next", entity(g + 1, b)});
        }
    }
    RawSplits splits;
    for (std::size_t i = 0; i < all.size(); ++i) {
        if (i % 9 == 3) {
            splits.test.push_back(std::move(all[i]));
        } else if (i % 17 == 5) {
            splits.valid.push_back(std::move(all[i]));
        } else {
            splits.train.push_back(std::move(all[i]));
        }
    }
    return splits;
}

void write_toy_kb(const std::filesystem::path& dir) {
    std::filesystem::create_directories(dir);
    const RawSplits splits = make_toy_kb();
    auto write = [&](const char* name, const std::vector<RawTriple>& triples) {
        std::ofstream out(dir / name, std::ios::binary | std::ios::trunc);
        if (!out) throw DataError("cannot write " + (dir / name).string());
        for (const auto& [h, r, t] : triples) out << h << '\t' << r << '\t' << t << '\n';
    };
    write("train.txt", splits.train);
    write("valid.txt", splits.valid);
    write("test.txt", splits.test);
}

} // namespace kbe
