#include "ffnet/checkpoint.hpp"

#include <cstring>
#include <fstream>
#include <vector>

namespace ffnet {

// ---------------------------------------------------------------------------
// compact sha-256 (FIPS 180-4), enough for the 32-byte spec fingerprint
// ---------------------------------------------------------------------------
namespace {

constexpr std::uint32_t kSha256K[64] = {
    0x428a2f98, 0x71374491, 0xb5c0fbcf, 0xe9b5dba5, 0x3956c25b, 0x59f111f1,
    0x923f82a4, 0xab1c5ed5, 0xd807aa98, 0x12835b01, 0x243185be, 0x550c7dc3,
    0x72be5d74, 0x80deb1fe, 0x9bdc06a7, 0xc19bf174, 0xe49b69c1, 0xefbe4786,
    0x0fc19dc6, 0x240ca1cc, 0x2de92c6f, 0x4a7484aa, 0x5cb0a9dc, 0x76f988da,
    0x983e5152, 0xa831c66d, 0xb00327c8, 0xbf597fc7, 0xc6e00bf3, 0xd5a79147,
    0x06ca6351, 0x14292967, 0x27b70a85, 0x2e1b2138, 0x4d2c6dfc, 0x53380d13,
    0x650a7354, 0x766a0abb, 0x81c2c92e, 0x92722c85, 0xa2bfe8a1, 0xa81a664b,
    0xc24b8b70, 0xc76c51a3, 0xd192e819, 0xd6990624, 0xf40e3585, 0x106aa070,
    0x19a4c116, 0x1e376c08, 0x2748774c, 0x34b0bcb5, 0x391c0cb3, 0x4ed8aa4a,
    0x5b9cca4f, 0x682e6ff3, 0x748f82ee, 0x78a5636f, 0x84c87814, 0x8cc70208,
    0x90befffa, 0xa4506ceb, 0xbef9a3f7, 0xc67178f2};

inline std::uint32_t rotr(std::uint32_t x, int n) { return (x >> n) | (x << (32 - n)); }

void sha256_block(std::uint32_t h[8], const std::uint8_t* p) {
    std::uint32_t w[64];
    for (int i = 0; i < 16; ++i) {
        w[i] = (std::uint32_t(p[4 * i]) << 24) | (std::uint32_t(p[4 * i + 1]) << 16) |
               (std::uint32_t(p[4 * i + 2]) << 8) | std::uint32_t(p[4 * i + 3]);
    }
    for (int i = 16; i < 64; ++i) {
        const std::uint32_t s0 = rotr(w[i - 15], 7) ^ rotr(w[i - 15], 18) ^ (w[i - 15] >> 3);
        const std::uint32_t s1 = rotr(w[i - 2], 17) ^ rotr(w[i - 2], 19) ^ (w[i - 2] >> 10);
        w[i] = w[i - 16] + s0 + w[i - 7] + s1;
    }
    std::uint32_t a = h[0], b = h[1], c = h[2], d = h[3], e = h[4], f = h[5],
                  g = h[6], hh = h[7];
    for (int i = 0; i < 64; ++i) {
        const std::uint32_t s1 = rotr(e, 6) ^ rotr(e, 11) ^ rotr(e, 25);
        const std::uint32_t ch = (e & f) ^ (~e & g);
        const std::uint32_t t1 = hh + s1 + ch + kSha256K[i] + w[i];
        const std::uint32_t s0 = rotr(a, 2) ^ rotr(a, 13) ^ rotr(a, 22);
        const std::uint32_t maj = (a & b) ^ (a & c) ^ (b & c);
        const std::uint32_t t2 = s0 + maj;
        hh = g; g = f; f = e; e = d + t1; d = c; c = b; b = a; a = t1 + t2;
    }
    h[0] += a; h[1] += b; h[2] += c; h[3] += d;
    h[4] += e; h[5] += f; h[6] += g; h[7] += hh;
}

}  // namespace

std::array<std::uint8_t, 32> sha256(const void* data, std::size_t len) {
    std::uint32_t h[8] = {0x6a09e667, 0xbb67ae85, 0x3c6ef372, 0xa54ff53a,
                          0x510e527f, 0x9b05688c, 0x1f83d9ab, 0x5be0cd19};
    const auto* p = static_cast<const std::uint8_t*>(data);
    std::size_t full = len / 64;
    for (std::size_t i = 0; i < full; ++i) sha256_block(h, p + 64 * i);

    std::uint8_t tail[128] = {0};
    const std::size_t rem = len - full * 64;
    std::memcpy(tail, p + full * 64, rem);
    tail[rem] = 0x80;
    const std::size_t tail_len = (rem + 9 <= 64) ? 64 : 128;
    const std::uint64_t bits = static_cast<std::uint64_t>(len) * 8;
    for (int i = 0; i < 8; ++i) {
        tail[tail_len - 1 - i] = static_cast<std::uint8_t>(bits >> (8 * i));
    }
    sha256_block(h, tail);
    if (tail_len == 128) sha256_block(h, tail + 64);

    std::array<std::uint8_t, 32> out{};
    for (int i = 0; i < 8; ++i) {
        out[4 * i] = static_cast<std::uint8_t>(h[i] >> 24);
        out[4 * i + 1] = static_cast<std::uint8_t>(h[i] >> 16);
        out[4 * i + 2] = static_cast<std::uint8_t>(h[i] >> 8);
        out[4 * i + 3] = static_cast<std::uint8_t>(h[i]);
    }
    return out;
}

std::array<std::uint8_t, 32> spec_fingerprint(const NetworkSpec& spec) {
    const std::string text = spec.canonical_text();
    return sha256(text.data(), text.size());
}

// ---------------------------------------------------------------------------
// checkpoint I/O (little-endian throughout)
// ---------------------------------------------------------------------------
namespace {

constexpr char kMagic[4] = {'F', 'F', 'N', 'T'};
constexpr std::uint32_t kVersion = 1;

void put_u16(std::ostream& os, std::uint16_t v) {
    const std::uint8_t b[2] = {std::uint8_t(v), std::uint8_t(v >> 8)};
    os.write(reinterpret_cast<const char*>(b), 2);
}
void put_u32(std::ostream& os, std::uint32_t v) {
    const std::uint8_t b[4] = {std::uint8_t(v), std::uint8_t(v >> 8),
                               std::uint8_t(v >> 16), std::uint8_t(v >> 24)};
    os.write(reinterpret_cast<const char*>(b), 4);
}
void put_u64(std::ostream& os, std::uint64_t v) {
    std::uint8_t b[8];
    for (int i = 0; i < 8; ++i) b[i] = std::uint8_t(v >> (8 * i));
    os.write(reinterpret_cast<const char*>(b), 8);
}

void need(std::istream& is, void* dst, std::size_t len, const char* what) {
    is.read(static_cast<char*>(dst), static_cast<std::streamsize>(len));
    if (static_cast<std::size_t>(is.gcount()) != len) {
        throw io_error(std::string("checkpoint truncated while reading ") + what);
    }
}
std::uint16_t get_u16(std::istream& is, const char* what) {
    std::uint8_t b[2];
    need(is, b, 2, what);
    return std::uint16_t(b[0]) | (std::uint16_t(b[1]) << 8);
}
std::uint32_t get_u32(std::istream& is, const char* what) {
    std::uint8_t b[4];
    need(is, b, 4, what);
    return std::uint32_t(b[0]) | (std::uint32_t(b[1]) << 8) |
           (std::uint32_t(b[2]) << 16) | (std::uint32_t(b[3]) << 24);
}
std::uint64_t get_u64(std::istream& is, const char* what) {
    std::uint8_t b[8];
    need(is, b, 8, what);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= std::uint64_t(b[i]) << (8 * i);
    return v;
}

void put_tensor(std::ostream& os, const std::string& name, const Tensor& t) {
    put_u16(os, static_cast<std::uint16_t>(name.size()));
    os.write(name.data(), static_cast<std::streamsize>(name.size()));
    os.put(char(4));  // rank
    put_u32(os, static_cast<std::uint32_t>(t.shape.n));
    put_u32(os, static_cast<std::uint32_t>(t.shape.c));
    put_u32(os, static_cast<std::uint32_t>(t.shape.h));
    put_u32(os, static_cast<std::uint32_t>(t.shape.w));
    for (const float v : t.data) {
        std::uint32_t bits;
        std::memcpy(&bits, &v, 4);
        put_u32(os, bits);
    }
}

void get_tensor_into(std::istream& is, const std::string& want_name, Tensor& t) {
    const std::uint16_t len = get_u16(is, "tensor name length");
    std::string name(len, '\0');
    need(is, name.data(), len, "tensor name");
    if (name != want_name) {
        throw format_error("checkpoint: expected tensor '" + want_name + "', found '" +
                           name + "'");
    }
    std::uint8_t rank;
    need(is, &rank, 1, "tensor rank");
    if (rank != 4) {
        throw format_error("checkpoint: tensor '" + name + "' has rank " +
                           std::to_string(int(rank)) + ", expected 4");
    }
    Shape s;
    s.n = get_u32(is, "dim");
    s.c = get_u32(is, "dim");
    s.h = get_u32(is, "dim");
    s.w = get_u32(is, "dim");
    if (!(s == t.shape)) {
        throw format_error("checkpoint: tensor '" + name + "' has shape " + s.str() +
                           ", expected " + t.shape.str());
    }
    for (auto& v : t.data) {
        const std::uint32_t bits = get_u32(is, "tensor payload");
        std::memcpy(&v, &bits, 4);
    }
}

}  // namespace

void save_checkpoint(const std::string& path, const NetworkSpec& spec,
                     const ParamStore& params, std::uint64_t iteration) {
    std::ofstream os(path, std::ios::binary | std::ios::trunc);
    if (!os) throw io_error("cannot open '" + path + "' for writing");

    os.write(kMagic, 4);
    put_u32(os, kVersion);
    put_u64(os, iteration);
    const auto fp = spec_fingerprint(spec);
    os.write(reinterpret_cast<const char*>(fp.data()), 32);

    const auto& entries = params.entries();
    put_u32(os, static_cast<std::uint32_t>(entries.size() * 4));
    for (const auto& e : entries) {
        put_tensor(os, e.name + ".w", e.p.w);
        put_tensor(os, e.name + ".b", e.p.b);
    }
    for (const auto& e : entries) {
        put_tensor(os, e.name + ".w.m", e.m.w);
        put_tensor(os, e.name + ".b.m", e.m.b);
    }
    if (!os) throw io_error("write failed for '" + path + "'");
}

std::uint64_t load_checkpoint(const std::string& path, const NetworkSpec& spec,
                              ParamStore& params) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw io_error("cannot open '" + path + "' for reading");

    char magic[4];
    need(is, magic, 4, "magic");
    if (std::memcmp(magic, kMagic, 4) != 0) {
        throw format_error("not a checkpoint file (bad magic)");
    }
    const std::uint32_t version = get_u32(is, "version");
    if (version != kVersion) {
        throw format_error("unsupported checkpoint version " + std::to_string(version));
    }
    const std::uint64_t iteration = get_u64(is, "iteration");

    std::array<std::uint8_t, 32> fp;
    need(is, fp.data(), 32, "fingerprint");
    if (fp != spec_fingerprint(spec)) {
        throw spec_mismatch_error("checkpoint was written for a different architecture");
    }

    auto& entries = params.entries();
    const std::uint32_t count = get_u32(is, "tensor count");
    if (count != entries.size() * 4) {
        throw format_error("checkpoint: tensor count " + std::to_string(count) +
                           " does not match architecture (" +
                           std::to_string(entries.size() * 4) + ")");
    }
    for (auto& e : entries) {
        get_tensor_into(is, e.name + ".w", e.p.w);
        get_tensor_into(is, e.name + ".b", e.p.b);
    }
    for (auto& e : entries) {
        get_tensor_into(is, e.name + ".w.m", e.m.w);
        get_tensor_into(is, e.name + ".b.m", e.m.b);
    }
    return iteration;
}

}  // namespace ffnet
