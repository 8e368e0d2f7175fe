#include "kbe/checkpoint.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>
#include <system_error>

#include <fmt/format.h>

namespace kbe {

namespace {

constexpr std::array<std::uint8_t, 8> kMagic = {'K', 'B', 'E', 'C', 'K', 'P', 'T', 0};
constexpr std::size_t kHeaderSize = 96;
constexpr std::size_t kChecksumSize = 8;

constexpr std::uint64_t kFnvOffset = 0xCBF29CE484222325ULL;
constexpr std::uint64_t kFnvPrime = 0x100000001B3ULL;

std::uint64_t fnv1a(std::span<const std::uint8_t> bytes, std::uint64_t h = kFnvOffset) {
    for (std::uint8_t b : bytes) {
        h ^= b;
        h *= kFnvPrime;
    }
    return h;
}

class Writer {
public:
    void u8(std::uint8_t v) { buf_.push_back(v); }
    void u32(std::uint32_t v) {
        for (int i = 0; i < 4; ++i) buf_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
    }
    void u64(std::uint64_t v) {
        for (int i = 0; i < 8; ++i) buf_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
    }
    void f64(double v) { u64(std::bit_cast<std::uint64_t>(v)); }
    void bytes(std::span<const std::uint8_t> b) { buf_.insert(buf_.end(), b.begin(), b.end()); }
    void doubles(std::span<const double> v) {
        for (double x : v) f64(x);
    }
    std::vector<std::uint8_t>& buffer() { return buf_; }

private:
    std::vector<std::uint8_t> buf_;
};

class Reader {
public:
    explicit Reader(std::span<const std::uint8_t> b) : buf_(b) {}
    std::uint8_t u8() { return buf_[pos_++]; }
    std::uint32_t u32() {
        std::uint32_t v = 0;
        for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(buf_[pos_++]) << (8 * i);
        return v;
    }
    std::uint64_t u64() {
        std::uint64_t v = 0;
        for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(buf_[pos_++]) << (8 * i);
        return v;
    }
    double f64() { return std::bit_cast<double>(u64()); }
    void doubles(std::span<double> out) {
        for (double& x : out) x = f64();
    }
    std::size_t pos() const { return pos_; }

private:
    std::span<const std::uint8_t> buf_;
    std::size_t pos_ = 0;
};

std::size_t payload_count(ModelKind kind, std::uint64_t dim, std::uint64_t entities, std::uint64_t relations) {
    std::size_t n = entities * dim;
    if (has_relation_vectors(kind)) n += relations * dim;
    if (has_relation_matrices(kind)) n += 2 * relations * dim * dim;
    return n;
}

void hash_names(std::uint64_t& h, std::span<const std::string> names) {
    for (const auto& name : names) {
        std::array<std::uint8_t, 8> len{};
        const std::uint64_t n = name.size();
        for (int i = 0; i < 8; ++i) len[i] = static_cast<std::uint8_t>(n >> (8 * i));
        h = fnv1a(len, h);
        h = fnv1a({reinterpret_cast<const std::uint8_t*>(name.data()), name.size()}, h);
    }
}

} // namespace

std::string_view to_string(CheckpointErrorKind k) {
    switch (k) {
    case CheckpointErrorKind::Io: return "io";
    case CheckpointErrorKind::BadMagic: return "bad magic";
    case CheckpointErrorKind::UnsupportedVersion: return "unsupported version";
    case CheckpointErrorKind::Truncated: return "truncated";
    case CheckpointErrorKind::LengthMismatch: return "length mismatch";
    case CheckpointErrorKind::ChecksumMismatch: return "checksum mismatch";
    case CheckpointErrorKind::InvalidField: return "invalid field";
    case CheckpointErrorKind::FingerprintMismatch: return "vocabulary fingerprint mismatch";
    }
    return "?";
}

CheckpointError::CheckpointError(CheckpointErrorKind kind, const std::string& what)
    : std::runtime_error(what), kind_(kind) {}

std::uint64_t vocab_fingerprint(const Vocab& vocab) {
    std::uint64_t h = kFnvOffset;
    const std::uint8_t e_tag = 'E';
    const std::uint8_t r_tag = 'R';
    h = fnv1a({&e_tag, 1}, h);
    hash_names(h, vocab.entity_names());
    h = fnv1a({&r_tag, 1}, h);
    hash_names(h, vocab.relation_names());
    return h;
}

std::vector<std::uint8_t> encode_checkpoint(const ModelParams& params, const Hyperparams& hyper,
                                            std::uint64_t fingerprint) {
    if (!params.all_finite()) {
        throw CheckpointError(CheckpointErrorKind::InvalidField, "refusing to save non-finite parameters");
    }
    Writer w;
    w.bytes(kMagic);
    w.u32(kCheckpointVersion);
    w.u8(static_cast<std::uint8_t>(params.kind()));
    w.u8(static_cast<std::uint8_t>(hyper.norm));
    w.u8(static_cast<std::uint8_t>(hyper.sampler));
    w.u8(0);
    w.u64(params.dim());
    w.u64(params.num_entities());
    w.u64(params.num_relations());
    w.u64(fingerprint);
    w.u64(hyper.seed);
    w.u64(hyper.epochs);
    w.u64(hyper.negatives_per_positive);
    w.f64(hyper.margin);
    w.f64(hyper.learning_rate);
    w.u64(payload_count(params.kind(), params.dim(), params.num_entities(), params.num_relations()));
    w.doubles(params.entity_block());
    w.doubles(params.relation_block());
    w.doubles(params.head_matrix_block());
    w.doubles(params.tail_matrix_block());
    const std::uint64_t checksum = fnv1a(w.buffer());
    w.u64(checksum);
    return std::move(w.buffer());
}

Checkpoint decode_checkpoint(std::span<const std::uint8_t> bytes, const std::string& source) {
    auto fail = [&](CheckpointErrorKind kind, const std::string& detail) {
        return CheckpointError(kind, fmt::format("{}: {} ({})", source, to_string(kind), detail));
    };
    if (bytes.size() < kMagic.size() || !std::equal(kMagic.begin(), kMagic.end(), bytes.begin())) {
        throw fail(CheckpointErrorKind::BadMagic, "not a checkpoint file");
    }
    if (bytes.size() < kHeaderSize + kChecksumSize) {
        throw fail(CheckpointErrorKind::Truncated, fmt::format("{} bytes is shorter than the header", bytes.size()));
    }
    Reader r(bytes.subspan(kMagic.size()));
    const std::uint32_t version = r.u32();
    if (version != kCheckpointVersion) {
        throw fail(CheckpointErrorKind::UnsupportedVersion, fmt::format("format version {}", version));
    }
    const std::uint8_t kind_byte = r.u8();
    const std::uint8_t norm_byte = r.u8();
    const std::uint8_t sampler_byte = r.u8();
    r.u8();
    const std::uint64_t dim = r.u64();
    const std::uint64_t entities = r.u64();
    const std::uint64_t relations = r.u64();
    const std::uint64_t fingerprint = r.u64();
    Hyperparams hyper;
    hyper.seed = r.u64();
    hyper.epochs = r.u64();
    hyper.negatives_per_positive = r.u64();
    hyper.margin = r.f64();
    hyper.learning_rate = r.f64();
    const std::uint64_t count = r.u64();

    const std::size_t available = (bytes.size() - kHeaderSize - kChecksumSize) / sizeof(double);
    if (count > available || bytes.size() < kHeaderSize + count * sizeof(double) + kChecksumSize) {
        throw fail(CheckpointErrorKind::Truncated,
                   fmt::format("header declares {} parameters, file holds at most {}", count, available));
    }
    if (bytes.size() != kHeaderSize + count * sizeof(double) + kChecksumSize) {
        throw fail(CheckpointErrorKind::LengthMismatch, "trailing bytes after checksum");
    }
    const std::size_t body = kHeaderSize + count * sizeof(double);
    Reader tail(bytes.subspan(body));
    const std::uint64_t stored = tail.u64();
    if (stored != fnv1a(bytes.first(body))) throw fail(CheckpointErrorKind::ChecksumMismatch, "payload corrupted");

    if (kind_byte > static_cast<std::uint8_t>(ModelKind::STransE)) {
        throw fail(CheckpointErrorKind::InvalidField, fmt::format("model kind {}", kind_byte));
    }
    if (norm_byte > 1 || sampler_byte > 1) {
        throw fail(CheckpointErrorKind::InvalidField, "norm or sampler out of range");
    }
    const auto kind = static_cast<ModelKind>(kind_byte);
    hyper.norm = static_cast<NormKind>(norm_byte);
    hyper.sampler = static_cast<SamplerKind>(sampler_byte);
    hyper.dim = dim;
    if (dim == 0 || payload_count(kind, dim, entities, relations) != count) {
        throw fail(CheckpointErrorKind::LengthMismatch, "parameter count does not match the declared shape");
    }

    Checkpoint ckpt{ModelParams(kind, dim, entities, relations), hyper, fingerprint};
    Reader payload(bytes.subspan(kHeaderSize, count * sizeof(double)));
    payload.doubles(ckpt.params.entity_block());
    payload.doubles(ckpt.params.relation_block());
    payload.doubles(ckpt.params.head_matrix_block());
    payload.doubles(ckpt.params.tail_matrix_block());
    return ckpt;
}

void save_checkpoint(const std::filesystem::path& path, const ModelParams& params, const Hyperparams& hyper,
                     std::uint64_t fingerprint) {
    const auto bytes = encode_checkpoint(params, hyper, fingerprint);
    std::filesystem::path tmp = path;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw CheckpointError(CheckpointErrorKind::Io, "cannot open " + tmp.string() + " for writing");
        out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
        out.flush();
        if (!out) throw CheckpointError(CheckpointErrorKind::Io, "write failed for " + tmp.string());
    }
    std::error_code ec;
    std::filesystem::rename(tmp, path, ec);
    if (ec) {
        std::filesystem::remove(tmp, ec);
        throw CheckpointError(CheckpointErrorKind::Io, "cannot rename checkpoint into " + path.string());
    }
}

void save_checkpoint(const std::filesystem::path& path, const ModelParams& params, const Hyperparams& hyper,
                     const Vocab& vocab) {
    save_checkpoint(path, params, hyper, vocab_fingerprint(vocab));
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw CheckpointError(CheckpointErrorKind::Io, "cannot open " + path.string());
    std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    if (in.bad()) throw CheckpointError(CheckpointErrorKind::Io, "read failed for " + path.string());
    return decode_checkpoint(bytes, path.string());
}

void require_vocab(const Checkpoint& checkpoint, const Vocab& vocab) {
    const std::uint64_t expected = vocab_fingerprint(vocab);
    if (checkpoint.vocab_fingerprint != expected) {
        throw CheckpointError(CheckpointErrorKind::FingerprintMismatch,
                              fmt::format("checkpoint vocabulary {:016x} does not match dataset vocabulary {:016x}",
                                          checkpoint.vocab_fingerprint, expected));
    }
    if (checkpoint.params.num_entities() != vocab.num_entities() ||
        checkpoint.params.num_relations() != vocab.num_relations()) {
        throw CheckpointError(CheckpointErrorKind::FingerprintMismatch, "checkpoint shape does not match dataset");
    }
}

} // namespace kbe
