#include "amp/backbone.hpp"

#include <cmath>
#include <cstring>
#include <fstream>

#include "amp/kernels.hpp"
#include "amp/rng.hpp"

namespace amp {

namespace {
constexpr char kMagic[6] = {'A', 'M', 'P', 'B', 'K', '1'};

void check_spec(const BackboneSpec& spec) {
    if (spec.kernel_size <= 0 || spec.kernel_size % 2 == 0)
        throw std::invalid_argument("BackboneSpec: kernel_size must be positive odd");
    if (spec.input_channels <= 0)
        throw std::invalid_argument("BackboneSpec: input_channels must be positive");
    if (!(spec.stage_channels[0] < spec.stage_channels[1] &&
          spec.stage_channels[1] < spec.stage_channels[2]) ||
        spec.stage_channels[0] <= 0)
        throw std::invalid_argument("BackboneSpec: stage channels must be strictly increasing");
}
}  // namespace

Backbone init_backbone(const BackboneSpec& spec) {
    check_spec(spec);
    Backbone b;
    b.spec = spec;
    Rng rng(spec.seed);
    const int k = spec.kernel_size;
    for (int r = 0; r < 3; ++r) {
        const int cin = r == 0 ? spec.input_channels : spec.stage_channels[r - 1];
        const int cout = spec.stage_channels[r];
        const int fan_in = cin * k * k;
        const int fan_out = cout * k * k;
        const Real a = std::sqrt(6.0 / (fan_in + fan_out));
        Kernel4 kern(cout, cin, k, k);
        for (auto& v : kern.data) v = rng.uniform(-a, a);
        b.stage_kernels[r] = std::move(kern);
    }
    return b;
}

FeaturePyramid extract(const Backbone& b, const Tensor3& image) {
    if (image.channels != b.spec.input_channels)
        throw std::invalid_argument("extract: image channel count mismatch");
    if (image.height % 8 != 0 || image.width % 8 != 0 ||
        image.height < 16 || image.width < 16)
        throw std::invalid_argument("extract: dims must be divisible by 8 and >= 16");

    FeaturePyramid pyr;
    pyr.source_height = image.height;
    pyr.source_width = image.width;
    const int pad = b.spec.kernel_size / 2;
    const Tensor3* x = &image;
    for (int r = 0; r < 3; ++r) {
        pyr.levels[r] = relu(conv2d(*x, b.stage_kernels[r], 2, pad));
        x = &pyr.levels[r];
    }
    return pyr;
}

namespace {
template <class T>
void put(std::ostream& os, T v) {
    os.write(reinterpret_cast<const char*>(&v), sizeof(v));
}
template <class T>
T get(std::istream& is) {
    T v;
    is.read(reinterpret_cast<char*>(&v), sizeof(v));
    return v;
}
}  // namespace

void save_backbone(const Backbone& b, const std::string& path) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("save_backbone: cannot open " + path);
    f.write(kMagic, sizeof(kMagic));
    put<uint64_t>(f, b.spec.seed);
    for (int c : b.spec.stage_channels) put<uint32_t>(f, static_cast<uint32_t>(c));
    put<uint32_t>(f, static_cast<uint32_t>(b.spec.kernel_size));
    put<uint32_t>(f, static_cast<uint32_t>(b.spec.input_channels));
    for (const auto& k : b.stage_kernels)
        f.write(reinterpret_cast<const char*>(k.data.data()),
                static_cast<std::streamsize>(k.data.size() * sizeof(Real)));
    if (!f) throw std::runtime_error("save_backbone: write failed for " + path);
}

Backbone load_backbone(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("load_backbone: cannot open " + path);
    char magic[6];
    f.read(magic, sizeof(magic));
    if (!f || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0)
        throw std::runtime_error("load_backbone: bad magic in " + path);
    BackboneSpec spec;
    spec.seed = get<uint64_t>(f);
    for (auto& c : spec.stage_channels) c = static_cast<int>(get<uint32_t>(f));
    spec.kernel_size = static_cast<int>(get<uint32_t>(f));
    spec.input_channels = static_cast<int>(get<uint32_t>(f));
    check_spec(spec);

    Backbone b;
    b.spec = spec;
    const int k = spec.kernel_size;
    for (int r = 0; r < 3; ++r) {
        const int cin = r == 0 ? spec.input_channels : spec.stage_channels[r - 1];
        Kernel4 kern(spec.stage_channels[r], cin, k, k);
        f.read(reinterpret_cast<char*>(kern.data.data()),
               static_cast<std::streamsize>(kern.data.size() * sizeof(Real)));
        b.stage_kernels[r] = std::move(kern);
    }
    if (!f) throw std::runtime_error("load_backbone: truncated file " + path);
    return b;
}

}  // namespace amp
