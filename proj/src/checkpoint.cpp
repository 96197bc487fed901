#include "obda/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iterator>

namespace obda {

namespace {

constexpr char kMagic[4] = {'O', 'B', 'D', 'C'};
constexpr std::uint8_t kVersion = 1;

void put_le(std::vector<std::uint8_t>& out, std::uint64_t v, int bytes)
{
    for (int i = 0; i < bytes; ++i) {
        out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
    }
}

std::uint64_t get_le(const std::uint8_t* p, int bytes)
{
    std::uint64_t v = 0;
    for (int i = 0; i < bytes; ++i) {
        v |= static_cast<std::uint64_t>(p[i]) << (8 * i);
    }
    return v;
}

}  // namespace

void save_checkpoint(const std::string& path, const ExperimentConfig& config, const ParamStore<float>& params,
                     int steps_trained)
{
    const ConfigHash hash = config_hash(config);
    const std::vector<float> flat = params.flatten();
    std::vector<std::uint8_t> bytes(kMagic, kMagic + 4);
    bytes.push_back(kVersion);
    bytes.insert(bytes.end(), hash.begin(), hash.end());
    put_le(bytes, flat.size(), 8);
    bytes.reserve(bytes.size() + 4 * flat.size() + 4);
    for (float v : flat) {
        put_le(bytes, std::bit_cast<std::uint32_t>(v), 4);
    }
    put_le(bytes, crc32_of(bytes), 4);

    const auto parent = std::filesystem::path(path).parent_path();
    if (!parent.empty()) {
        std::filesystem::create_directories(parent);
    }
    std::ofstream out(path, std::ios::binary);
    require(static_cast<bool>(out), ErrorKind::input, "cannot write " + path);
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));

    nlohmann::json shapes = nlohmann::json::array();
    for (const auto& p : params.params()) {
        shapes.push_back({{"name", p.name}, {"shape", p.tensor.shape()}});
    }
    nlohmann::json side{{"config", to_json(config)},
                        {"config_hash", to_hex(hash)},
                        {"steps_trained", steps_trained},
                        {"parameters", shapes}};
    write_text_file(path + ".json", side.dump(2) + "\n");
}

Checkpoint read_checkpoint(const std::string& path)
{
    std::ifstream in(path, std::ios::binary);
    require(static_cast<bool>(in), ErrorKind::input, "cannot open checkpoint " + path);
    const std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    constexpr std::size_t header = 4 + 1 + 8 + 8;
    require(bytes.size() >= header + 4 && std::memcmp(bytes.data(), kMagic, 4) == 0, ErrorKind::integrity,
            path + ": not a checkpoint");
    require(bytes[4] == kVersion, ErrorKind::integrity, path + ": unsupported checkpoint version");
    const std::size_t body = bytes.size() - 4;
    require(get_le(bytes.data() + body, 4) == crc32_of({bytes.data(), body}), ErrorKind::integrity,
            path + ": checkpoint CRC mismatch");
    const std::uint64_t count = get_le(bytes.data() + 13, 8);
    require(body == header + 4 * count, ErrorKind::integrity, path + ": checkpoint length mismatch");

    Checkpoint ckpt;
    std::copy(bytes.begin() + 5, bytes.begin() + 13, ckpt.hash.begin());
    ckpt.parameters.resize(count);
    for (std::uint64_t i = 0; i < count; ++i) {
        ckpt.parameters[i] = std::bit_cast<float>(static_cast<std::uint32_t>(get_le(bytes.data() + header + 4 * i, 4)));
    }

    nlohmann::json side;
    try {
        side = nlohmann::json::parse(read_text_file(path + ".json"));
        ckpt.config = experiment_from_json(side.at("config"));
        ckpt.steps_trained = side.value("steps_trained", 0);
    } catch (const nlohmann::json::exception& e) {
        fail(ErrorKind::integrity, path + ".json: " + e.what());
    }
    require(config_hash(ckpt.config) == ckpt.hash, ErrorKind::integrity,
            path + ": parameters were saved under a different config (hash " + to_hex(ckpt.hash) + " vs " +
                to_hex(config_hash(ckpt.config)) + ")");
    return ckpt;
}

std::unique_ptr<DamageModel<float>> load_model(const Checkpoint& ckpt)
{
    auto model = std::make_unique<DamageModel<float>>(ModelSpec::from(ckpt.config), ckpt.config.seed);
    model->params().load_flat(ckpt.parameters);
    return model;
}

}  // namespace obda
