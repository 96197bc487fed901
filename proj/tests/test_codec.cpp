#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <cstdio>
#include <filesystem>

#include "obda/latent_codec.hpp"
#include "test_support.hpp"

using namespace obda;
using obda::testing::bit_equal;
using obda::testing::random_tensor;

namespace {

LatentPacket random_packet(Rng& rng, int levels)
{
    LatentPacket p;
    p.tile_id = "tile-" + std::to_string(rng() % 1000) + "-\xc3\xa9";
    p.x_origin = static_cast<std::int32_t>(rng() % 100000) - 50000;
    p.y_origin = static_cast<std::int32_t>(rng() % 100000);
    for (auto& b : p.config_hash) {
        b = static_cast<std::uint8_t>(rng());
    }
    for (int i = 0; i < levels; ++i) {
        const Level level = kAllLevels[3 - levels + i];
        const int c = 1 + static_cast<int>(rng() % 5), h = 1 + static_cast<int>(rng() % 6),
                  w = 1 + static_cast<int>(rng() % 6);
        auto t = random_tensor<float>({c, h, w}, rng, -5, 5);
        p.levels.push_back({level, c, h, w, quantize(t.values())});
    }
    return p;
}

}  // namespace

TEST_CASE("latent byte counts for the reference profile at 1024x1024")
{
    const auto ref = EncoderConfig::reference();
    CHECK(latent_size_bytes(ref, 1024, 0, false) == 3'670'016);
    CHECK(latent_size_bytes(ref, 1024, 8, false) == 458'752);
    CHECK(latent_size_bytes(ref, 1024, 64, false) == 57'344);
    CHECK(latent_size_bytes(ref, 1024, 64, true) == 24'576);
    CHECK(latent_channels(128, 8) == 16);
    CHECK(latent_channels(256, 8) == 32);
    CHECK(latent_channels(512, 8) == 64);
    CHECK(latent_channels(128, 64) == 2);
    CHECK(latent_channels(256, 64) == 4);
    CHECK(latent_channels(512, 64) == 8);
    CHECK(latent_channels(16, 64) == 1);
    CHECK_THROWS_AS(latent_channels(24, 64), Error);
    CHECK_THROWS_AS(latent_channels(24, 16), Error);
}

TEST_CASE("compressed shapes follow the ratio")
{
    Rng rng(1);
    const auto ref = EncoderConfig::reference();
    ParamStore<float> store;
    LatentCodec<float> c8(ref, 8, false, store, rng, "c8");
    LatentCodec<float> c64(ref, 64, false, store, rng, "c64");
    LatentCodec<float> c64d(ref, 64, true, store, rng, "c64d");
    Pyramid<float> p;
    for (Level level : kAllLevels) {
        p.levels.push_back({level, random_tensor<float>({ref.channels_at(level), 4, 4}, rng)});
    }
    auto l8 = c8.compress(p);
    CHECK(l8.at(Level::D3).channels() == 16);
    CHECK(l8.at(Level::D4).channels() == 32);
    CHECK(l8.at(Level::D5).channels() == 64);
    auto l64 = c64.compress(p);
    CHECK(l64.at(Level::D3).channels() == 2);
    CHECK(l64.at(Level::D4).channels() == 4);
    CHECK(l64.at(Level::D5).channels() == 8);
    auto l64d = c64d.compress(p);
    REQUIRE(l64d.size() == 2);
    CHECK_FALSE(l64d.has(Level::D3));
    CHECK(l64d.at(Level::D4).channels() == 4);
    CHECK(l64d.at(Level::D5).channels() == 8);

    const ConfigHash hash{1, 2, 3, 4, 5, 6, 7, 8};
    NoGradGuard guard;
    auto packet = make_packet(l64, "t", 0, 0, hash);
    auto expanded = c64.expand(unpack_latent<float>(packet, hash));
    for (std::size_t i = 0; i < p.size(); ++i) {
        CHECK(expanded.levels[i].data.shape() == p.levels[i].data.shape());
    }
}

TEST_CASE("quantization examples")
{
    std::vector<float> zeros(10, 0.0f);
    auto qz = quantize(zeros);
    CHECK(qz.scale == 1.0f);
    for (auto v : qz.payload) {
        CHECK(v == 0);
    }
    CHECK(dequantize(qz) == zeros);

    std::vector<float> three{-1.27f, 0.0f, 1.27f};
    auto q = quantize(three);
    CHECK(q.payload == std::vector<std::int8_t>{-127, 0, 127});
    CHECK(q.scale == doctest::Approx(0.01).epsilon(1e-6));
    auto back = dequantize(q);
    for (std::size_t i = 0; i < 3; ++i) {
        CHECK(back[i] == doctest::Approx(three[i]).epsilon(1e-7));
    }

    std::vector<float> bad{1.0f, std::nanf("")};
    CHECK_THROWS_AS(quantize(bad), Error);
}

TEST_CASE("quantization error is bounded by half a step on every element")
{
    Rng rng(2);
    for (int trial = 0; trial < 200; ++trial) {
        const double range = std::pow(10.0, std::uniform_real_distribution<double>(-4, 4)(rng));
        auto t = random_tensor<float>({3, 7, 5}, rng, -range, range);
        auto q = quantize(t.values());
        auto back = dequantize(q);
        CHECK(q.scale > 0.0f);
        for (std::size_t i = 0; i < back.size(); ++i) {
            REQUIRE(std::abs(back[i] - t[i]) <= q.scale / 2 + 1e-7 * std::max(1.0, range));
        }
    }
}

TEST_CASE("quantize_ste forward equals the int8 round trip, backward is identity")
{
    Rng rng(3);
    auto t = random_tensor<float>({2, 3, 3}, rng, -2, 2);
    t.set_requires_grad(true);
    auto y = quantize_ste(t);
    auto expected = dequantize(quantize(t.values()));
    for (std::size_t i = 0; i < expected.size(); ++i) {
        CHECK(y[i] == expected[i]);
    }
    sum(y).backward();
    for (float g : t.grad()) {
        CHECK(g == 1.0f);
    }
}

TEST_CASE("wire format round trip is bit-exact")
{
    Rng rng(4);
    for (int trial = 0; trial < 100; ++trial) {
        const auto p = random_packet(rng, 1 + trial % 3);
        const auto bytes = serialize(p);
        const auto q = deserialize(bytes);
        CHECK(q == p);
        CHECK(serialize(q) == bytes);
    }
}

TEST_CASE("wire layout of a minimal packet")
{
    LatentPacket p;
    p.tile_id = "ab";
    p.x_origin = -2;
    p.y_origin = 258;
    p.config_hash = {0x10, 0x11, 0x12, 0x13, 0x14, 0x15, 0x16, 0x17};
    p.levels.push_back({Level::D5, 1, 1, 2, {{-1, 5}, 0.5f}});
    const auto b = serialize(p);
    const std::vector<std::uint8_t> head{'O', 'B', 'D', 'A', 1, 0x10, 0x11, 0x12, 0x13, 0x14, 0x15, 0x16, 0x17,
                                         2, 0, 'a', 'b', 0xFE, 0xFF, 0xFF, 0xFF, 0x02, 0x01, 0, 0, 1,
                                         5, 1, 0, 1, 0, 2, 0, 0x00, 0x00, 0x00, 0x3F, 0xFF, 5};
    REQUIRE(b.size() == head.size() + 4);
    CHECK(std::vector<std::uint8_t>(b.begin(), b.end() - 4) == head);
}

TEST_CASE("corruption is rejected")
{
    Rng rng(5);
    const auto p = random_packet(rng, 3);
    const auto bytes = serialize(p);
    for (std::size_t i = 0; i < bytes.size(); i += 7) {
        auto bad = bytes;
        bad[i] ^= 0x01;
        try {
            deserialize(bad);
            FAIL("corruption at byte " << i << " not detected");
        } catch (const Error& e) {
            CHECK(e.kind() == ErrorKind::integrity);
        }
    }
    auto truncated = bytes;
    truncated.resize(bytes.size() - 1);
    CHECK_THROWS_AS(deserialize(truncated), Error);
}

TEST_CASE("packet files round trip and hash mismatches are rejected")
{
    Rng rng(6);
    const auto p = random_packet(rng, 2);
    const auto path = (std::filesystem::temp_directory_path() / "obda_codec_test.pkt").string();
    write_packet_file(path, p);
    CHECK(read_packet_file(path) == p);
    std::filesystem::remove(path);

    ConfigHash other = p.config_hash;
    other[3] ^= 0xFF;
    try {
        unpack_latent<float>(p, other);
        FAIL("expected error");
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::integrity);
    }
    CHECK_NOTHROW(unpack_latent<float>(p, p.config_hash));
}

TEST_CASE("identity codec without compression is the identity")
{
    Rng rng(7);
    const auto cfg = EncoderConfig::toy();
    ParamStore<double> store;
    LatentCodec<double> codec(cfg, 0, false, store, rng, "codec", Init::identity);
    Pyramid<double> p;
    for (Level level : kAllLevels) {
        p.levels.push_back({level, random_tensor({cfg.channels_at(level), 4, 4}, rng, -9, 9)});
    }
    auto r = codec.expand(codec.compress(p));
    for (std::size_t i = 0; i < p.size(); ++i) {
        CHECK(bit_equal(r.levels[i].data, p.levels[i].data));
    }
}

TEST_CASE("training through the straight-through quantizer reduces the loss")
{
    Rng rng(8);
    const auto cfg = EncoderConfig::toy();
    ParamStore<float> store;
    LatentCodec<float> codec(cfg, 8, false, store, rng);
    // Correlated channels so a rank-limited bottleneck can do well.
    auto make_pyramid = [&](Rng& r) {
        Pyramid<float> p;
        for (Level level : kAllLevels) {
            const int c = cfg.channels_at(level);
            const int k = c / 8;
            auto basis = random_tensor<float>({c, k, 1, 1}, r);
            auto codes = random_tensor<float>({k, 8, 8}, r);
            p.levels.push_back({level, conv2d(codes, basis, Tensor<float>(), 1, 0)});
        }
        return p;
    };
    Rng data_rng(9);
    const auto data = make_pyramid(data_rng);
    auto loss_of = [&]() {
        auto latent = codec.compress(data);
        for (auto& m : latent.levels) {
            m.data = quantize_ste(m.data);
        }
        auto rec = codec.expand(latent);
        Tensor<float> total({1}, 0.0f);
        for (std::size_t i = 0; i < rec.size(); ++i) {
            auto d = sub(rec.levels[i].data, data.levels[i].data);
            total = add(total, mean(mul(d, d)));
        }
        return total;
    };
    const float initial = loss_of().item();
    float last = initial;
    for (int step = 0; step < 200; ++step) {
        store.zero_grad();
        auto loss = loss_of();
        last = loss.item();
        loss.backward();
        for (auto& p : store.params()) {
            if (!p.tensor.has_grad()) continue;
            auto v = p.tensor.values_mut();
            auto g = p.tensor.grad();
            for (std::size_t i = 0; i < v.size(); ++i) {
                v[i] -= 0.05f * g[i];
            }
        }
    }
    MESSAGE("initial " << initial << " final " << last);
    CHECK(last < 0.5f * initial);
}
