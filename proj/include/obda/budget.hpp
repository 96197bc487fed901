#pragma once

#include <cstdint>
#include <string>

#include "json.hpp"
#include "obda/encoder.hpp"

namespace obda {

// Exact non-negative rational with 128-bit intermediates.
class Rational {
public:
    Rational(std::int64_t num = 0, std::int64_t den = 1);
    // Exact value of the shortest decimal that round-trips `v` ("0.8" -> 4/5).
    static Rational from_decimal(double v);

    std::int64_t num() const { return num_; }
    std::int64_t den() const { return den_; }
    bool is_integer() const { return den_ == 1; }
    std::int64_t ceil() const;
    double to_double() const { return static_cast<double>(num_) / static_cast<double>(den_); }

    friend Rational operator+(const Rational& a, const Rational& b);
    friend Rational operator*(const Rational& a, const Rational& b);
    friend Rational operator/(const Rational& a, const Rational& b);
    bool operator==(const Rational& other) const = default;

private:
    struct RawTag {};
    explicit Rational(RawTag) {}
    static Rational reduce(__int128 num, __int128 den);
    std::int64_t num_ = 0;
    std::int64_t den_ = 1;
};

std::string to_string(const Rational& r);

inline constexpr int kDetectionRecordBytes = 25;  // tile hash 8 + 4 x f32 box + class u8

struct BudgetScenario {
    double area_km2 = 100;
    double gsd_m_per_px = 0.8;
    int tile_size = 1024;
    int bytes_per_px = 3;
    double throughput_mpx_per_s = 100;
    int compression_ratio = 0;
    bool drop_d3 = false;
    std::int64_t detections = 0;
    EncoderConfig profile = EncoderConfig::reference();

    void validate() const;
};

struct BudgetReport {
    Rational pixels;
    Rational raw_uplink_bytes;
    std::int64_t tiles = 0;
    std::uint64_t latent_bytes_per_tile = 0;
    std::uint64_t latent_uplink_bytes = 0;
    Rational inference_seconds;
    std::int64_t downlink_bytes = 0;
};

BudgetReport compute_budget(const BudgetScenario& s);
BudgetScenario budget_scenario_from_json(const nlohmann::json& j);
nlohmann::json to_json(const BudgetScenario& s);
nlohmann::json to_json(const BudgetReport& r);

}  // namespace obda
