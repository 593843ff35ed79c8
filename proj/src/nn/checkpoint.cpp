#include "fedstyle/nn/checkpoint.hpp"

#include "json.hpp"

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <stdexcept>

namespace fedstyle::nn {

namespace fs = std::filesystem;
using json = nlohmann::json;

namespace {

fs::path with_ext(const fs::path& stem, const char* ext) {
    fs::path p = stem;
    p += ext;
    return p;
}

std::uint64_t to_le(std::uint64_t v) {
    if constexpr (std::endian::native == std::endian::little) return v;
    std::uint64_t r = 0;
    for (int i = 0; i < 8; ++i) r |= ((v >> (8 * i)) & 0xffu) << (8 * (7 - i));
    return r;
}

}  // namespace

void write_f64_le(const fs::path& path, std::span<const double> values) {
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
    for (double v : values) {
        std::uint64_t bits = to_le(std::bit_cast<std::uint64_t>(v));
        out.write(reinterpret_cast<const char*>(&bits), sizeof bits);
    }
    if (!out) throw std::runtime_error("write failed: " + path.string());
}

std::vector<double> read_f64_le(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open " + path.string());
    std::vector<char> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    if (bytes.size() % 8 != 0)
        throw std::runtime_error(path.string() + ": size " + std::to_string(bytes.size()) +
                                 " is not a multiple of 8 bytes");
    std::vector<double> out(bytes.size() / 8);
    for (std::size_t i = 0; i < out.size(); ++i) {
        std::uint64_t bits;
        std::memcpy(&bits, bytes.data() + 8 * i, 8);
        out[i] = std::bit_cast<double>(to_le(bits));
    }
    return out;
}

void save_checkpoint(const fs::path& stem, const ad::ParamSet& params) {
    json manifest;
    manifest["format"] = "fedstyle-paramset";
    manifest["version"] = 1;
    manifest["tag"] = params.tag();
    manifest["entries"] = json::array();
    std::vector<double> blob;
    blob.reserve(params.numel());
    for (const auto& e : params.entries()) {
        manifest["entries"].push_back({{"name", e.name},
                                       {"shape", e.tensor.shape()},
                                       {"trainable", e.trainable},
                                       {"offset", blob.size()}});
        blob.insert(blob.end(), e.tensor.values().begin(), e.tensor.values().end());
    }
    manifest["count"] = blob.size();
    manifest["blob"] = with_ext(stem, ".bin").filename().string();
    write_f64_le(with_ext(stem, ".bin"), blob);
    std::ofstream out(with_ext(stem, ".json"));
    if (!out) throw std::runtime_error("cannot write " + with_ext(stem, ".json").string());
    out << manifest.dump(2) << '\n';
}

ad::ParamSet load_checkpoint(const fs::path& stem) {
    std::ifstream in(with_ext(stem, ".json"));
    if (!in) throw std::runtime_error("cannot open " + with_ext(stem, ".json").string());
    const json manifest = json::parse(in);
    const std::vector<double> blob = read_f64_le(with_ext(stem, ".bin"));
    if (blob.size() != manifest.at("count").get<std::size_t>())
        throw std::runtime_error(stem.string() + ": blob holds " + std::to_string(blob.size()) +
                                 " values, manifest declares " + manifest.at("count").dump());
    ad::ParamSet p(manifest.at("tag").get<std::string>());
    for (const auto& e : manifest.at("entries")) {
        const auto shape = e.at("shape").get<ad::Shape>();
        const auto off = e.at("offset").get<std::size_t>();
        const std::size_t n = ad::shape_numel(shape);
        if (off + n > blob.size()) throw std::runtime_error(stem.string() + ": entry exceeds blob");
        p.add(e.at("name").get<std::string>(),
              ad::Tensor(shape, std::vector<double>(blob.begin() + off, blob.begin() + off + n)),
              e.at("trainable").get<bool>());
    }
    return p;
}

}  // namespace fedstyle::nn
