#pragma once

// Binary model checkpoints. Layout (all integers little-endian, floats IEEE-754
// binary64 little-endian) is documented in docs/checkpoint_format.md.

#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "kbe/kb_data.hpp"
#include "kbe/model.hpp"
#include "kbe/trainer.hpp"

namespace kbe {

inline constexpr std::uint32_t kCheckpointVersion = 1;

enum class CheckpointErrorKind {
    Io,
    BadMagic,
    UnsupportedVersion,
    Truncated,
    LengthMismatch,
    ChecksumMismatch,
    InvalidField,
    FingerprintMismatch,
};

std::string_view to_string(CheckpointErrorKind k);

class CheckpointError : public std::runtime_error {
public:
    CheckpointError(CheckpointErrorKind kind, const std::string& what);
    CheckpointErrorKind kind() const noexcept { return kind_; }

private:
    CheckpointErrorKind kind_;
};

/// Content hash (FNV-1a 64) of the ordered entity and relation name lists.
std::uint64_t vocab_fingerprint(const Vocab& vocab);

struct Checkpoint {
    ModelParams params;
    Hyperparams hyper; // norm and training provenance
    std::uint64_t vocab_fingerprint = 0;
};

std::vector<std::uint8_t> encode_checkpoint(const ModelParams& params, const Hyperparams& hyper,
                                            std::uint64_t fingerprint);
Checkpoint decode_checkpoint(std::span<const std::uint8_t> bytes, const std::string& source = "<memory>");

/// Writes to `<path>.tmp` and renames over `path`.
void save_checkpoint(const std::filesystem::path& path, const ModelParams& params, const Hyperparams& hyper,
                     const Vocab& vocab);
void save_checkpoint(const std::filesystem::path& path, const ModelParams& params, const Hyperparams& hyper,
                     std::uint64_t fingerprint);

Checkpoint load_checkpoint(const std::filesystem::path& path);

/// Throws CheckpointError(FingerprintMismatch) unless the checkpoint was
/// written against this vocabulary.
void require_vocab(const Checkpoint& checkpoint, const Vocab& vocab);

} // namespace kbe
