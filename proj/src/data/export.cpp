#include "fedstyle/data/dataset.hpp"
#include "fedstyle/nn/checkpoint.hpp"

#include "json.hpp"

#include <fstream>

namespace fedstyle::data {

using json = nlohmann::json;
namespace fs = std::filesystem;

void export_datasets(const fs::path& dir, std::span<const StyleDataset> datasets, std::uint64_t seed) {
    fs::create_directories(dir);
    json manifest;
    manifest["format"] = "fedstyle-dataset";
    manifest["version"] = 1;
    manifest["seed"] = seed;
    manifest["styles"] = json::array();
    for (const auto& ds : datasets) {
        if (ds.samples.empty()) throw std::invalid_argument("export_datasets: empty style dataset");
        const Image& first = ds.samples.front().image;
        std::vector<double> blob;
        blob.reserve(ds.samples.size() * first.size());
        std::vector<int> labels;
        for (const auto& s : ds.samples) {
            if (s.image.height != first.height || s.image.width != first.width || s.image.channels != first.channels)
                throw std::invalid_argument("export_datasets: images of one style differ in shape");
            blob.insert(blob.end(), s.image.pixels.begin(), s.image.pixels.end());
            labels.push_back(s.content_label);
        }
        const std::string file = "style_" + std::to_string(ds.style_id) + ".bin";
        nn::write_f64_le(dir / file, blob);
        manifest["styles"].push_back({{"style_id", ds.style_id},
                                      {"file", file},
                                      {"shape", {ds.samples.size(), first.height, first.width, first.channels}},
                                      {"labels", labels}});
    }
    std::ofstream out(dir / "manifest.json");
    if (!out) throw std::runtime_error("cannot write " + (dir / "manifest.json").string());
    out << manifest.dump(2) << '\n';
}

std::vector<StyleDataset> import_datasets(const fs::path& dir) {
    std::ifstream in(dir / "manifest.json");
    if (!in) throw std::runtime_error("cannot open " + (dir / "manifest.json").string());
    const json manifest = json::parse(in);
    std::vector<StyleDataset> out;
    for (const auto& st : manifest.at("styles")) {
        const auto shape = st.at("shape").get<std::vector<std::size_t>>();
        if (shape.size() != 4) throw std::runtime_error("dataset manifest: shape must be [N, H, W, C]");
        const auto labels = st.at("labels").get<std::vector<int>>();
        const auto blob = nn::read_f64_le(dir / st.at("file").get<std::string>());
        const std::size_t per = shape[1] * shape[2] * shape[3];
        if (labels.size() != shape[0] || blob.size() != shape[0] * per)
            throw std::runtime_error("dataset manifest: sizes of " + st.at("file").get<std::string>() + " disagree");
        StyleDataset ds;
        ds.style_id = st.at("style_id").get<int>();
        for (std::size_t i = 0; i < shape[0]; ++i) {
            ImageSample s;
            s.image = Image(shape[1], shape[2], shape[3]);
            std::copy(blob.begin() + static_cast<std::ptrdiff_t>(i * per),
                      blob.begin() + static_cast<std::ptrdiff_t>((i + 1) * per), s.image.pixels.begin());
            s.content_label = labels[i];
            s.style_id = ds.style_id;
            ds.samples.push_back(std::move(s));
        }
        out.push_back(std::move(ds));
    }
    return out;
}

}  // namespace fedstyle::data
