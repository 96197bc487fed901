#include "obda/budget.hpp"

#include <charconv>
#include <cmath>
#include <limits>
#include <numeric>

#include "obda/error.hpp"
#include "obda/latent_codec.hpp"

namespace obda {

namespace {

__int128 gcd128(__int128 a, __int128 b)
{
    if (a < 0) a = -a;
    while (b != 0) {
        const __int128 t = a % b;
        a = b;
        b = t;
    }
    return a;
}

}  // namespace

Rational::Rational(std::int64_t num, std::int64_t den)
{
    *this = reduce(num, den);
}

Rational Rational::reduce(__int128 num, __int128 den)
{
    require(den != 0, ErrorKind::numeric, "rational with zero denominator");
    if (den < 0) {
        num = -num;
        den = -den;
    }
    const __int128 g = gcd128(num, den);
    if (g > 1) {
        num /= g;
        den /= g;
    }
    constexpr __int128 lim = std::numeric_limits<std::int64_t>::max();
    require(num <= lim && -num <= lim && den <= lim, ErrorKind::numeric, "rational overflow");
    Rational r(RawTag{});
    r.num_ = static_cast<std::int64_t>(num);
    r.den_ = static_cast<std::int64_t>(den);
    return r;
}

Rational Rational::from_decimal(double v)
{
    require(std::isfinite(v), ErrorKind::config, "non-finite budget quantity");
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof buf, v, std::chars_format::fixed);
    require(res.ec == std::errc(), ErrorKind::config, "cannot represent budget quantity");
    const std::string text(buf, res.ptr);
    const auto dot = text.find('.');
    const std::string digits = dot == std::string::npos ? text : text.substr(0, dot) + text.substr(dot + 1);
    const int decimals = dot == std::string::npos ? 0 : static_cast<int>(text.size() - dot - 1);
    require(decimals <= 18 && digits.size() <= 19, ErrorKind::config, "budget quantity has too many digits: " + text);
    __int128 den = 1;
    for (int i = 0; i < decimals; ++i) den *= 10;
    return reduce(static_cast<__int128>(std::stoll(digits)), den);
}

std::int64_t Rational::ceil() const
{
    const std::int64_t q = num_ / den_;
    return (num_ % den_ != 0 && num_ > 0) ? q + 1 : q;
}

Rational operator+(const Rational& a, const Rational& b)
{
    return Rational::reduce(static_cast<__int128>(a.num_) * b.den_ + static_cast<__int128>(b.num_) * a.den_,
                            static_cast<__int128>(a.den_) * b.den_);
}

Rational operator*(const Rational& a, const Rational& b)
{
    return Rational::reduce(static_cast<__int128>(a.num_) * b.num_, static_cast<__int128>(a.den_) * b.den_);
}

Rational operator/(const Rational& a, const Rational& b)
{
    return Rational::reduce(static_cast<__int128>(a.num_) * b.den_, static_cast<__int128>(a.den_) * b.num_);
}

std::string to_string(const Rational& r)
{
    return r.is_integer() ? std::to_string(r.num()) : std::to_string(r.num()) + "/" + std::to_string(r.den());
}

void BudgetScenario::validate() const
{
    require(area_km2 > 0 && gsd_m_per_px > 0 && tile_size > 0 && bytes_per_px > 0 && throughput_mpx_per_s > 0,
            ErrorKind::config, "budget quantities must be positive");
    require(compression_ratio >= 0 && detections >= 0, ErrorKind::config,
            "compression ratio and detection count must be non-negative");
    require(tile_size % 32 == 0, ErrorKind::config, "tile size must be divisible by 32");
    profile.validate();
}

BudgetReport compute_budget(const BudgetScenario& s)
{
    s.validate();
    BudgetReport r;
    const Rational gsd = Rational::from_decimal(s.gsd_m_per_px);
    r.pixels = Rational::from_decimal(s.area_km2) * Rational(1000000) / (gsd * gsd);
    r.raw_uplink_bytes = r.pixels * Rational(s.bytes_per_px);
    r.tiles = (r.pixels / Rational(static_cast<std::int64_t>(s.tile_size) * s.tile_size)).ceil();
    r.latent_bytes_per_tile = latent_size_bytes(s.profile, s.tile_size, s.compression_ratio, s.drop_d3);
    r.latent_uplink_bytes = static_cast<std::uint64_t>(r.tiles) * r.latent_bytes_per_tile;
    r.inference_seconds = r.pixels / (Rational::from_decimal(s.throughput_mpx_per_s) * Rational(1000000));
    r.downlink_bytes = s.detections * kDetectionRecordBytes;
    return r;
}

BudgetScenario budget_scenario_from_json(const nlohmann::json& j)
{
    BudgetScenario s;
    try {
        s.area_km2 = j.value("area_km2", s.area_km2);
        s.gsd_m_per_px = j.value("gsd_m_per_px", s.gsd_m_per_px);
        s.tile_size = j.value("tile_size", s.tile_size);
        s.bytes_per_px = j.value("bytes_per_px", s.bytes_per_px);
        s.throughput_mpx_per_s = j.value("throughput_mpx_per_s", s.throughput_mpx_per_s);
        s.compression_ratio = j.value("compression_ratio", s.compression_ratio);
        s.drop_d3 = j.value("drop_d3", s.drop_d3);
        s.detections = j.value("detections", s.detections);
        const std::string profile = j.value("profile", std::string("reference"));
        if (profile == "toy") {
            s.profile = EncoderConfig::toy();
        } else {
            require(profile == "reference", ErrorKind::config, "budget profile must be toy or reference");
        }
    } catch (const nlohmann::json::exception& e) {
        fail(ErrorKind::config, std::string("bad budget scenario: ") + e.what());
    }
    s.validate();
    return s;
}

nlohmann::json to_json(const BudgetScenario& s)
{
    return {{"area_km2", s.area_km2},
            {"gsd_m_per_px", s.gsd_m_per_px},
            {"tile_size", s.tile_size},
            {"bytes_per_px", s.bytes_per_px},
            {"throughput_mpx_per_s", s.throughput_mpx_per_s},
            {"compression_ratio", s.compression_ratio},
            {"drop_d3", s.drop_d3},
            {"detections", s.detections}};
}

nlohmann::json to_json(const BudgetReport& r)
{
    return {{"pixels", to_string(r.pixels)},
            {"raw_uplink_bytes", to_string(r.raw_uplink_bytes)},
            {"raw_uplink_mb", r.raw_uplink_bytes.to_double() / 1e6},
            {"tiles", r.tiles},
            {"latent_bytes_per_tile", r.latent_bytes_per_tile},
            {"latent_uplink_bytes", r.latent_uplink_bytes},
            {"latent_uplink_mb", static_cast<double>(r.latent_uplink_bytes) / 1e6},
            {"inference_seconds", to_string(r.inference_seconds)},
            {"inference_seconds_decimal", r.inference_seconds.to_double()},
            {"downlink_bytes", r.downlink_bytes}};
}

}  // namespace obda
