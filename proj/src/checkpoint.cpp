#include "hdre/checkpoint.hpp"

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <unordered_map>
#include <vector>

#include <nlohmann/json.hpp>

#include "hdre/errors.hpp"

static_assert(std::endian::native == std::endian::little,
              "checkpoint serialization assumes a little-endian host");

namespace hdre::nn {
namespace {

constexpr char kMagic[5] = {'N', 'N', 'C', 'P', '1'};

struct NamedTensor {
    std::string name;
    Tensor* tensor;
};

std::vector<NamedTensor> all_tensors(Network& net) {
    std::vector<NamedTensor> out;
    for (const Param& p : net.parameters()) out.push_back({p.name, p.value});
    for (const BufferRef& b : net.buffers()) out.push_back({b.name, b.value});
    return out;
}

} // namespace

void save_checkpoint(Network& net, const std::string& path) {
    auto tensors = all_tensors(net);

    nlohmann::json manifest;
    manifest["format"] = "nncp";
    manifest["version"] = 1;
    manifest["arch"] = {{"use_global_encoder", net.config().use_global_encoder},
                        {"width_scale", net.config().width_scale}};
    std::uint64_t offset = 0;
    nlohmann::json list = nlohmann::json::array();
    for (const NamedTensor& t : tensors) {
        const std::uint64_t nbytes = t.tensor->size() * sizeof(float);
        list.push_back({{"name", t.name},
                        {"shape", t.tensor->shape},
                        {"dtype", "f32"},
                        {"offset", offset},
                        {"nbytes", nbytes}});
        offset += nbytes;
    }
    manifest["tensors"] = std::move(list);

    const std::string text = manifest.dump();
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw InputError("cannot open checkpoint for writing: " + path);
    out.write(kMagic, sizeof(kMagic));
    const std::uint32_t len = static_cast<std::uint32_t>(text.size());
    out.write(reinterpret_cast<const char*>(&len), sizeof(len));
    out.write(text.data(), static_cast<std::streamsize>(text.size()));
    for (const NamedTensor& t : tensors)
        out.write(reinterpret_cast<const char*>(t.tensor->data.data()),
                  static_cast<std::streamsize>(t.tensor->size() * sizeof(float)));
    if (!out) throw InputError("failed writing checkpoint: " + path);
}

Network load_checkpoint(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw InputError("cannot open checkpoint: " + path);
    std::vector<char> raw((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());

    if (raw.size() < sizeof(kMagic) + sizeof(std::uint32_t) ||
        std::memcmp(raw.data(), kMagic, sizeof(kMagic)) != 0)
        throw IntegrityError("not a checkpoint file: " + path);

    std::uint32_t len = 0;
    std::memcpy(&len, raw.data() + sizeof(kMagic), sizeof(len));
    const std::size_t header = sizeof(kMagic) + sizeof(std::uint32_t);
    if (raw.size() < header + len) throw IntegrityError("truncated checkpoint manifest");

    nlohmann::json manifest;
    try {
        manifest = nlohmann::json::parse(raw.begin() + static_cast<std::ptrdiff_t>(header),
                                         raw.begin() + static_cast<std::ptrdiff_t>(header + len));
    } catch (const nlohmann::json::exception&) {
        throw IntegrityError("checkpoint manifest is not valid JSON");
    }

    try {
        if (manifest.at("format") != "nncp" || manifest.at("version") != 1)
            throw IntegrityError("unsupported checkpoint version");

        ArchitectureConfig cfg;
        cfg.use_global_encoder = manifest.at("arch").at("use_global_encoder").get<bool>();
        cfg.width_scale = manifest.at("arch").at("width_scale").get<float>();
        Network net(cfg, 0);

        std::unordered_map<std::string, Tensor*> lookup;
        for (const NamedTensor& t : all_tensors(net)) lookup[t.name] = t.tensor;

        const char* payload = raw.data() + header + len;
        const std::size_t payload_size = raw.size() - header - len;

        std::size_t seen = 0;
        for (const auto& entry : manifest.at("tensors")) {
            const std::string name = entry.at("name").get<std::string>();
            auto it = lookup.find(name);
            if (it == lookup.end()) throw IntegrityError("unknown tensor in checkpoint: " + name);
            Tensor* dst = it->second;

            const auto shape = entry.at("shape").get<std::vector<std::int64_t>>();
            if (shape.size() != 4 || shape[0] != dst->shape[0] || shape[1] != dst->shape[1] ||
                shape[2] != dst->shape[2] || shape[3] != dst->shape[3])
                throw IntegrityError("shape mismatch for tensor: " + name);
            if (entry.at("dtype") != "f32") throw IntegrityError("unsupported dtype for: " + name);

            const std::uint64_t off = entry.at("offset").get<std::uint64_t>();
            const std::uint64_t nbytes = entry.at("nbytes").get<std::uint64_t>();
            if (nbytes != dst->size() * sizeof(float) || off + nbytes > payload_size)
                throw IntegrityError("payload bounds error for tensor: " + name);
            std::memcpy(dst->data.data(), payload + off, nbytes);
            ++seen;
        }
        if (seen != lookup.size()) throw IntegrityError("checkpoint is missing tensors");
        return net;
    } catch (const nlohmann::json::exception&) {
        throw IntegrityError("malformed checkpoint manifest");
    }
}

} // namespace hdre::nn
