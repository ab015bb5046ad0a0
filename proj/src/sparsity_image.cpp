#include <algorithm>
#include <fstream>

#include "lpreform/errors.hpp"
#include "lpreform/lp_core.hpp"

namespace lpreform {

GrayImage sparsity_pattern(const LpInstance& lp, std::size_t max_dim) {
    if (max_dim < 1) throw DimensionMismatch("max_dim must be at least 1");
    const std::size_t m = lp.num_rows();
    const std::size_t n = lp.num_cols();
    GrayImage img;
    img.height = std::min(m, max_dim);
    img.width = std::min(n, max_dim);
    img.pixels.assign(img.width * img.height, 255);
    if (img.width == 0 || img.height == 0) return img;
    // Cell r covers rows [r*m/height, (r+1)*m/height); a cell is dark if any entry lands in it.
    for (std::size_t j = 0; j < n; ++j) {
        std::size_t c = j * img.width / n;
        for (std::size_t i : lp.matrix.column_rows(j)) {
            std::size_t r = i * img.height / m;
            img.pixels[r * img.width + c] = 0;
        }
    }
    return img;
}

void write_pgm(const GrayImage& image, const std::filesystem::path& path, bool binary) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write " + path.string());
    out << (binary ? "P5" : "P2") << '\n' << image.width << ' ' << image.height << "\n255\n";
    if (binary) {
        out.write(reinterpret_cast<const char*>(image.pixels.data()), static_cast<std::streamsize>(image.pixels.size()));
    } else {
        for (std::size_t r = 0; r < image.height; ++r) {
            for (std::size_t c = 0; c < image.width; ++c) {
                out << (c ? " " : "") << static_cast<int>(image.at(r, c));
            }
            out << '\n';
        }
    }
    if (!out) throw IoError("write failed for " + path.string());
}

void emit_sparsity_image(const LpInstance& lp, const std::filesystem::path& path, std::size_t max_dim) {
    write_pgm(sparsity_pattern(lp, max_dim), path);
}

}  // namespace lpreform
