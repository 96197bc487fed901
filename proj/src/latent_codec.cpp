#include "obda/latent_codec.hpp"

#include <zlib.h>

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>

namespace obda {

namespace {

constexpr char kMagic[4] = {'O', 'B', 'D', 'A'};

class ByteWriter {
public:
    void u8(std::uint8_t v) { bytes_.push_back(v); }
    void u16(std::uint16_t v)
    {
        for (int i = 0; i < 2; ++i) bytes_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
    }
    void u32(std::uint32_t v)
    {
        for (int i = 0; i < 4; ++i) bytes_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
    }
    void i32(std::int32_t v) { u32(static_cast<std::uint32_t>(v)); }
    void f32(float v) { u32(std::bit_cast<std::uint32_t>(v)); }
    void raw(const void* data, std::size_t n)
    {
        const auto* p = static_cast<const std::uint8_t*>(data);
        bytes_.insert(bytes_.end(), p, p + n);
    }
    std::vector<std::uint8_t>& bytes() { return bytes_; }

private:
    std::vector<std::uint8_t> bytes_;
};

class ByteReader {
public:
    explicit ByteReader(std::span<const std::uint8_t> bytes) : bytes_(bytes) {}

    std::uint8_t u8() { return take(1)[0]; }
    std::uint16_t u16()
    {
        auto b = take(2);
        return static_cast<std::uint16_t>(b[0] | (b[1] << 8));
    }
    std::uint32_t u32()
    {
        auto b = take(4);
        return static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
               (static_cast<std::uint32_t>(b[2]) << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
    }
    std::int32_t i32() { return static_cast<std::int32_t>(u32()); }
    float f32() { return std::bit_cast<float>(u32()); }
    std::span<const std::uint8_t> take(std::size_t n)
    {
        require(pos_ + n <= bytes_.size(), ErrorKind::integrity, "latent packet truncated");
        auto out = bytes_.subspan(pos_, n);
        pos_ += n;
        return out;
    }
    std::size_t remaining() const { return bytes_.size() - pos_; }

private:
    std::span<const std::uint8_t> bytes_;
    std::size_t pos_ = 0;
};

}  // namespace

std::uint32_t crc32_of(std::span<const std::uint8_t> bytes)
{
    uLong crc = crc32(0L, Z_NULL, 0);
    return static_cast<std::uint32_t>(crc32(crc, bytes.data(), static_cast<uInt>(bytes.size())));
}

std::string to_hex(const ConfigHash& hash)
{
    static const char* digits = "0123456789abcdef";
    std::string out;
    for (auto b : hash) {
        out.push_back(digits[b >> 4]);
        out.push_back(digits[b & 0xF]);
    }
    return out;
}

ConfigHash config_hash_from_hex(const std::string& hex)
{
    require(hex.size() == 16, ErrorKind::integrity, "config hash must be 16 hex digits");
    ConfigHash hash{};
    for (std::size_t i = 0; i < 8; ++i) {
        hash[i] = static_cast<std::uint8_t>(std::stoul(hex.substr(2 * i, 2), nullptr, 16));
    }
    return hash;
}

int latent_channels(int channels, int ratio)
{
    if (ratio == 0) {
        return channels;
    }
    require(ratio >= 1 && channels >= 1, ErrorKind::config, "invalid compression ratio");
    if (channels % ratio == 0) {
        return channels / ratio;
    }
    require(ratio > channels && ratio % channels == 0, ErrorKind::config,
            std::to_string(channels) + " channels not divisible by compression ratio " + std::to_string(ratio));
    return 1;
}

QuantizedMap quantize(std::span<const float> values)
{
    float max_abs = 0.0f;
    for (float v : values) {
        require(std::isfinite(v), ErrorKind::numeric, "quantize: non-finite input");
        max_abs = std::max(max_abs, std::abs(v));
    }
    QuantizedMap q;
    q.scale = max_abs > 0.0f ? max_abs / 127.0f : 1.0f;
    q.payload.resize(values.size());
    for (std::size_t i = 0; i < values.size(); ++i) {
        const float r = std::round(values[i] / q.scale);
        q.payload[i] = static_cast<std::int8_t>(std::clamp(r, -127.0f, 127.0f));
    }
    return q;
}

std::vector<float> dequantize(const QuantizedMap& q)
{
    std::vector<float> out(q.payload.size());
    for (std::size_t i = 0; i < out.size(); ++i) {
        out[i] = static_cast<float>(q.payload[i]) * q.scale;
    }
    return out;
}

template <typename T>
Tensor<T> quantize_ste(const Tensor<T>& x)
{
    T max_abs = 0;
    for (T v : x.values()) {
        max_abs = std::max(max_abs, std::abs(v));
    }
    const T scale = max_abs > T(0) ? max_abs / T(127) : T(1);
    std::vector<T> out(x.numel());
    for (std::size_t i = 0; i < out.size(); ++i) {
        out[i] = std::clamp(std::round(x[i] / scale), T(-127), T(127)) * scale;
    }
    return Tensor<T>::from_op(x.shape(), std::move(out), {x}, [](detail::Node<T>& self) {
        auto& g = self.inputs[0]->grad_buffer();
        for (std::size_t i = 0; i < g.size(); ++i) {
            g[i] += self.grad[i];
        }
    }, "quantize_ste");
}

void LatentPacket::validate() const
{
    require(tile_id.size() <= 0xFFFF, ErrorKind::config, "tile id too long");
    require(!levels.empty() && levels.size() <= 3, ErrorKind::config, "packet must carry 1 to 3 levels");
    for (const auto& l : levels) {
        require(l.channels > 0 && l.height > 0 && l.width > 0 && l.channels <= 0xFFFF && l.height <= 0xFFFF &&
                    l.width <= 0xFFFF,
                ErrorKind::config, "packet level extents out of range");
        require(l.map.payload.size() == static_cast<std::size_t>(l.channels) * l.height * l.width,
                ErrorKind::config, "packet payload length does not match C*H*W");
        require(l.map.scale > 0.0f && std::isfinite(l.map.scale), ErrorKind::config, "quant scale must be positive");
    }
}

bool LatentPacket::operator==(const LatentPacket& other) const
{
    if (tile_id != other.tile_id || x_origin != other.x_origin || y_origin != other.y_origin ||
        config_hash != other.config_hash || levels.size() != other.levels.size()) {
        return false;
    }
    for (std::size_t i = 0; i < levels.size(); ++i) {
        const auto& a = levels[i];
        const auto& b = other.levels[i];
        if (a.level != b.level || a.channels != b.channels || a.height != b.height || a.width != b.width ||
            std::bit_cast<std::uint32_t>(a.map.scale) != std::bit_cast<std::uint32_t>(b.map.scale) ||
            a.map.payload != b.map.payload) {
            return false;
        }
    }
    return true;
}

std::vector<std::uint8_t> serialize(const LatentPacket& packet)
{
    packet.validate();
    ByteWriter w;
    w.raw(kMagic, 4);
    w.u8(LatentPacket::kVersion);
    w.raw(packet.config_hash.data(), packet.config_hash.size());
    w.u16(static_cast<std::uint16_t>(packet.tile_id.size()));
    w.raw(packet.tile_id.data(), packet.tile_id.size());
    w.i32(packet.x_origin);
    w.i32(packet.y_origin);
    w.u8(static_cast<std::uint8_t>(packet.levels.size()));
    for (const auto& l : packet.levels) {
        w.u8(static_cast<std::uint8_t>(l.level));
        w.u16(static_cast<std::uint16_t>(l.channels));
        w.u16(static_cast<std::uint16_t>(l.height));
        w.u16(static_cast<std::uint16_t>(l.width));
        w.f32(l.map.scale);
        w.raw(l.map.payload.data(), l.map.payload.size());
    }
    w.u32(crc32_of(w.bytes()));
    return std::move(w.bytes());
}

LatentPacket deserialize(std::span<const std::uint8_t> bytes)
{
    require(bytes.size() >= 4 + 1 + 8 + 2 + 8 + 1 + 4, ErrorKind::integrity, "latent packet too short");
    const auto body = bytes.first(bytes.size() - 4);
    ByteReader tail(bytes.last(4));
    require(tail.u32() == crc32_of(body), ErrorKind::integrity, "latent packet CRC mismatch");

    ByteReader r(body);
    const auto magic = r.take(4);
    require(std::equal(magic.begin(), magic.end(), kMagic), ErrorKind::integrity, "bad latent packet magic");
    const std::uint8_t version = r.u8();
    require(version == LatentPacket::kVersion, ErrorKind::integrity,
            "unsupported latent packet version " + std::to_string(version));
    LatentPacket packet;
    const auto hash = r.take(8);
    std::copy(hash.begin(), hash.end(), packet.config_hash.begin());
    const auto id = r.take(r.u16());
    packet.tile_id.assign(id.begin(), id.end());
    packet.x_origin = r.i32();
    packet.y_origin = r.i32();
    const int count = r.u8();
    for (int i = 0; i < count; ++i) {
        PacketLevel l;
        l.level = level_from_tag(r.u8());
        l.channels = r.u16();
        l.height = r.u16();
        l.width = r.u16();
        l.map.scale = r.f32();
        const auto payload = r.take(static_cast<std::size_t>(l.channels) * l.height * l.width);
        l.map.payload.resize(payload.size());
        std::memcpy(l.map.payload.data(), payload.data(), payload.size());
        packet.levels.push_back(std::move(l));
    }
    require(r.remaining() == 0, ErrorKind::integrity, "trailing bytes in latent packet");
    try {
        packet.validate();
    } catch (const Error& e) {
        fail(ErrorKind::integrity, std::string("invalid latent packet: ") + e.what());
    }
    return packet;
}

void write_packet_file(const std::string& path, const LatentPacket& packet)
{
    const auto bytes = serialize(packet);
    std::ofstream out(path, std::ios::binary);
    require(static_cast<bool>(out), ErrorKind::input, "cannot write " + path);
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    require(static_cast<bool>(out), ErrorKind::input, "failed writing " + path);
}

LatentPacket read_packet_file(const std::string& path)
{
    std::ifstream in(path, std::ios::binary);
    require(static_cast<bool>(in), ErrorKind::input, "cannot read " + path);
    std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return deserialize(bytes);
}

LatentPacket make_packet(const Pyramid<float>& latent, const std::string& tile_id, std::int32_t x_origin,
                         std::int32_t y_origin, const ConfigHash& hash)
{
    LatentPacket packet;
    packet.tile_id = tile_id;
    packet.x_origin = x_origin;
    packet.y_origin = y_origin;
    packet.config_hash = hash;
    for (const auto& m : latent.levels) {
        packet.levels.push_back({m.level, m.channels(), m.height(), m.width(), quantize(m.data.values())});
    }
    packet.validate();
    return packet;
}

template <typename T>
Pyramid<T> unpack_latent(const LatentPacket& packet, const ConfigHash& expected)
{
    require(packet.config_hash == expected, ErrorKind::integrity,
            "latent packet was produced by model " + to_hex(packet.config_hash) + ", expected " + to_hex(expected));
    Pyramid<T> out;
    for (const auto& l : packet.levels) {
        const auto values = dequantize(l.map);
        out.levels.push_back(
            {l.level, Tensor<T>({l.channels, l.height, l.width}, std::vector<T>(values.begin(), values.end()))});
    }
    return out;
}

std::uint64_t latent_size_bytes(const EncoderConfig& profile, int tile_size, int ratio, bool drop_d3)
{
    require(tile_size > 0 && tile_size % 32 == 0, ErrorKind::config, "tile size must be a positive multiple of 32");
    std::uint64_t total = 0;
    for (Level level : kAllLevels) {
        if (drop_d3 && level == Level::D3) {
            continue;
        }
        const std::uint64_t side = static_cast<std::uint64_t>(tile_size / stride_of(level));
        total += static_cast<std::uint64_t>(latent_channels(profile.channels_at(level), ratio)) * side * side;
    }
    return total;
}

template <typename T>
LatentCodec<T>::LatentCodec(const EncoderConfig& encoder, int ratio, bool drop_d3, ParamStore<T>& store, Rng& rng,
                            const std::string& prefix, Init init)
    : encoder_(encoder), ratio_(ratio), drop_d3_(drop_d3)
{
    for (Level level : kAllLevels) {
        if (drop_d3 && level == Level::D3) {
            continue;
        }
        const int c = encoder.channels_at(level);
        const int lc = latent_channels(c, ratio);
        const std::string name = prefix + "." + to_string(level);
        compressors_[level_index(level)] = Conv<T>::create(store, name + ".compress", c, lc, 1, 1, rng, init);
        expanders_[level_index(level)] = Conv<T>::create(store, name + ".expand", lc, c, 1, 1, rng, init);
    }
}

template <typename T>
Pyramid<T> LatentCodec<T>::compress(const Pyramid<T>& pyramid) const
{
    Pyramid<T> out;
    for (const auto& m : pyramid.levels) {
        if (drop_d3_ && m.level == Level::D3) {
            continue;
        }
        require(m.channels() == encoder_.channels_at(m.level), ErrorKind::config, "compress: unexpected channels");
        out.levels.push_back({m.level, compressors_[level_index(m.level)](m.data)});
    }
    return out;
}

template <typename T>
Pyramid<T> LatentCodec<T>::expand(const Pyramid<T>& latent) const
{
    Pyramid<T> out;
    for (const auto& m : latent.levels) {
        require(!(drop_d3_ && m.level == Level::D3), ErrorKind::config, "expand: D3 present although dropped");
        require(m.channels() == latent_width(m.level), ErrorKind::integrity,
                "expand: latent " + to_string(m.level) + " has " + std::to_string(m.channels()) +
                    " channels, codec expects " + std::to_string(latent_width(m.level)));
        out.levels.push_back({m.level, expanders_[level_index(m.level)](m.data)});
    }
    return out;
}

template Tensor<float> quantize_ste(const Tensor<float>&);
template Tensor<double> quantize_ste(const Tensor<double>&);
template Pyramid<float> unpack_latent(const LatentPacket&, const ConfigHash&);
template Pyramid<double> unpack_latent(const LatentPacket&, const ConfigHash&);
template class LatentCodec<float>;
template class LatentCodec<double>;

}  // namespace obda
