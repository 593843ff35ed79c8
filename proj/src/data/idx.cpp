#include "fedstyle/data/dataset.hpp"

#include <fstream>
#include <iterator>

namespace fedstyle::data {

namespace {

constexpr std::uint8_t kUnsignedByte = 0x08;

std::uint32_t read_be32(const std::vector<std::uint8_t>& b, std::size_t off, const std::string& file) {
    if (off + 4 > b.size())
        throw IdxError(file + ": truncated header at byte offset " + std::to_string(b.size()) +
                       " (need 4 bytes at offset " + std::to_string(off) + ")");
    return (std::uint32_t{b[off]} << 24) | (std::uint32_t{b[off + 1]} << 16) | (std::uint32_t{b[off + 2]} << 8) |
           std::uint32_t{b[off + 3]};
}

}  // namespace

IdxArray read_idx(const std::filesystem::path& path) {
    const std::string file = path.string();
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IdxError("cannot open IDX file " + file);
    const std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());

    const std::uint32_t magic = read_be32(bytes, 0, file);
    if ((magic >> 16) != 0 || ((magic >> 8) & 0xff) != kUnsignedByte)
        throw IdxError(file + ": bad magic 0x" + [&] {
            char buf[9];
            std::snprintf(buf, sizeof buf, "%08x", magic);
            return std::string(buf);
        }() + " (expected 0x000008NN, unsigned byte data)");
    const std::size_t rank = magic & 0xff;
    if (rank == 0) throw IdxError(file + ": IDX array of rank 0");

    IdxArray arr;
    std::size_t count = 1;
    for (std::size_t i = 0; i < rank; ++i) {
        arr.dims.push_back(read_be32(bytes, 4 + 4 * i, file));
        count *= arr.dims.back();
    }
    const std::size_t data_off = 4 + 4 * rank;
    if (bytes.size() < data_off + count)
        throw IdxError(file + ": truncated data at byte offset " + std::to_string(bytes.size()) + " (expected " +
                       std::to_string(data_off + count) + " bytes)");
    arr.values.assign(bytes.begin() + static_cast<std::ptrdiff_t>(data_off),
                      bytes.begin() + static_cast<std::ptrdiff_t>(data_off + count));
    return arr;
}

StyleDataset load_idx_dataset(const std::filesystem::path& images, const std::filesystem::path& labels,
                              int style_id) {
    const IdxArray img = read_idx(images);
    const IdxArray lab = read_idx(labels);
    if (img.dims.size() != 3) throw IdxError(images.string() + ": expected a rank-3 image array (magic 0x00000803)");
    if (lab.dims.size() != 1) throw IdxError(labels.string() + ": expected a rank-1 label array (magic 0x00000801)");
    if (lab.dims[0] != img.dims[0])
        throw IdxError("label count " + std::to_string(lab.dims[0]) + " differs from image count " +
                       std::to_string(img.dims[0]));
    const std::size_t n = img.dims[0], h = img.dims[1], w = img.dims[2];
    StyleDataset ds;
    ds.style_id = style_id;
    ds.samples.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
        ImageSample s;
        s.image = Image(h, w, 1);
        for (std::size_t p = 0; p < h * w; ++p) s.image.pixels[p] = img.values[i * h * w + p] / 255.0;
        s.content_label = lab.values[i];
        s.style_id = style_id;
        ds.samples.push_back(std::move(s));
    }
    return ds;
}

}  // namespace fedstyle::data
