#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "obda/encoder.hpp"

namespace obda {

using ConfigHash = std::array<std::uint8_t, 8>;

std::string to_hex(const ConfigHash& hash);
ConfigHash config_hash_from_hex(const std::string& hex);

// CRC-32 (IEEE, as in zlib/PNG).
std::uint32_t crc32_of(std::span<const std::uint8_t> bytes);

// Latent width of a level with `channels` channels under ratio r (0 = none).
// Requires r | C; when r exceeds C and C | r the level collapses to a single
// channel (small desk-scale profiles under aggressive ratios).
int latent_channels(int channels, int ratio);

struct QuantizedMap {
    std::vector<std::int8_t> payload;
    float scale = 1.0f;
};

// Symmetric per-map int8 quantization: scale = max|v| / 127 (1 for an
// all-zero map), q = clamp(round(v / scale), -127, 127).
QuantizedMap quantize(std::span<const float> values);
std::vector<float> dequantize(const QuantizedMap& q);

// Forward: quantize-dequantize round trip. Backward: identity (straight-through).
template <typename T>
Tensor<T> quantize_ste(const Tensor<T>& x);

struct PacketLevel {
    Level level = Level::D3;
    int channels = 0;
    int height = 0;
    int width = 0;
    QuantizedMap map;
};

// The uplinked artifact: one quantized latent pyramid for one tile.
struct LatentPacket {
    std::string tile_id;
    std::int32_t x_origin = 0;
    std::int32_t y_origin = 0;
    std::vector<PacketLevel> levels;
    ConfigHash config_hash{};

    static constexpr std::uint8_t kVersion = 1;

    void validate() const;
    bool operator==(const LatentPacket& other) const;
};

// Little-endian wire format:
//   "OBDA" | version u8 | config_hash 8B | tile_id (u16 length + UTF-8 bytes) |
//   x_origin i32 | y_origin i32 | level count u8 |
//   per level: tag u8, channels u16, height u16, width u16, scale f32, C*H*W int8 |
//   CRC32 (u32) of all preceding bytes.
std::vector<std::uint8_t> serialize(const LatentPacket& packet);
LatentPacket deserialize(std::span<const std::uint8_t> bytes);

void write_packet_file(const std::string& path, const LatentPacket& packet);
LatentPacket read_packet_file(const std::string& path);

LatentPacket make_packet(const Pyramid<float>& latent, const std::string& tile_id, std::int32_t x_origin,
                         std::int32_t y_origin, const ConfigHash& hash);

// Dequantized latent pyramid; rejects packets produced for another model.
template <typename T>
Pyramid<T> unpack_latent(const LatentPacket& packet, const ConfigHash& expected);

// Exact int8 footprint (bytes) of the latent pyramid for a square tile.
std::uint64_t latent_size_bytes(const EncoderConfig& profile, int tile_size, int ratio, bool drop_d3);

// Ground-side channel compressor and on-board expander, one 1x1 conv pair per
// retained level.
template <typename T>
class LatentCodec {
public:
    LatentCodec(const EncoderConfig& encoder, int ratio, bool drop_d3, ParamStore<T>& store, Rng& rng,
                const std::string& prefix = "codec", Init init = Init::fan_in_uniform);

    Pyramid<T> compress(const Pyramid<T>& pyramid) const;
    Pyramid<T> expand(const Pyramid<T>& latent) const;

    int ratio() const { return ratio_; }
    int latent_width(Level level) const { return latent_channels(encoder_.channels_at(level), ratio_); }

private:
    EncoderConfig encoder_;
    int ratio_;
    bool drop_d3_;
    std::array<Conv<T>, 3> compressors_;
    std::array<Conv<T>, 3> expanders_;
};

extern template class LatentCodec<float>;
extern template class LatentCodec<double>;

}  // namespace obda
