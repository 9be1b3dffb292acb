#include "amp/synthdata.hpp"

#include <array>
#include <cmath>
#include <filesystem>
#include <stdexcept>

#include "amp/image_io.hpp"
#include "amp/rng.hpp"

namespace fs = std::filesystem;

namespace amp {

namespace {

constexpr Real kPi = 3.14159265358979323846;

std::array<Real, 3> hsv_to_rgb(Real h, Real s, Real v) {
    h = std::fmod(std::fmod(h, 360.0) + 360.0, 360.0) / 60.0;
    const int i = static_cast<int>(h) % 6;
    const Real f = h - std::floor(h);
    const Real p = v * (1 - s), q = v * (1 - s * f), t = v * (1 - s * (1 - f));
    switch (i) {
        case 0: return {v, t, p};
        case 1: return {q, v, p};
        case 2: return {p, v, t};
        case 3: return {p, q, v};
        case 4: return {t, p, v};
        default: return {v, p, q};
    }
}

// Unit-square inside test; (u, v) in [-1, 1] after rotation and scaling.
bool shape_inside(int shape_id, Real u, Real v) {
    const Real r2 = u * u + v * v;
    switch (shape_id % 10) {
        case 0: return r2 <= 1.0;                                    // disk
        case 1: return std::max(std::abs(u), std::abs(v)) <= 1.0;    // square
        case 2: return v >= -1.0 && v <= 1.0 && std::abs(u) <= (1.0 - v) / 2.0;  // triangle
        case 3: return r2 <= 1.0 && r2 >= 0.45 * 0.45;               // ring
        case 4: return (std::abs(u) <= 0.33 || std::abs(v) <= 0.33) &&
                       std::max(std::abs(u), std::abs(v)) <= 1.0;    // cross
        case 5: return std::abs(v) <= 0.4 && std::abs(u) <= 1.0;     // bar
        case 6: return std::abs(u) + std::abs(v) <= 1.0;             // diamond
        case 7: return u * u + (v / 0.55) * (v / 0.55) <= 1.0;       // ellipse
        case 8: {                                                    // frame
            const Real m = std::max(std::abs(u), std::abs(v));
            return m <= 1.0 && m >= 0.55;
        }
        default: return r2 <= 1.0 && v <= 0.0;                       // half-disk
    }
}

struct ShapeParams {
    int shape_id = 0;
    Real cx = 0, cy = 0, scale = 1, rot = 0;
    Real aspect = 1.0;
};

bool inside(const ShapeParams& sp, Real x, Real y) {
    const Real dx = x - sp.cx, dy = y - sp.cy;
    const Real c = std::cos(sp.rot), s = std::sin(sp.rot);
    const Real u = (c * dx + s * dy) / sp.scale;
    const Real v = (-s * dx + c * dy) / (sp.scale * sp.aspect);
    return shape_inside(sp.shape_id, u, v);
}

Real class_hue(int class_id) { return 360.0 * (class_id - 1) / 20.0; }

void fill_background(Tensor3& img, int class_id, int styles, Rng& rng) {
    const int size = img.height;
    const Real hue = class_hue(class_id);
    // Backgrounds stay dim relative to foreground shapes so their features
    // carry less energy, but keep a class-tied hue so held-out classes come
    // with background appearance unseen during pretraining.
    const auto primary = hsv_to_rgb(hue + 150.0, 0.60, 0.16);
    const auto secondary = hsv_to_rgb(hue + 210.0, 0.55, 0.32);
    const int style = (class_id - 1) % std::max(1, styles);
    const Real phase = rng.uniform(0.0, 16.0);
    const Real bright = rng.uniform(-0.04, 0.04);
    const Real fx = rng.uniform(0.15, 0.35), fy = rng.uniform(0.15, 0.35);

    for (int y = 0; y < size; ++y) {
        for (int x = 0; x < size; ++x) {
            Real t;
            switch (style) {
                case 0: t = (x + phase) / (size + 16.0); break;
                case 1: t = (static_cast<int>(x + y + phase) / 8) % 2 ? 1.0 : 0.0; break;
                case 2: t = ((static_cast<int>(x + phase) / 8 +
                              static_cast<int>(y + phase) / 8) % 2) ? 1.0 : 0.0; break;
                default: t = 0.5 * (1.0 + std::sin(fx * x + fy * y + phase)); break;
            }
            for (int c = 0; c < 3; ++c) {
                const Real v = primary[c] + t * (secondary[c] - primary[c]) + bright +
                               rng.uniform(-0.02, 0.02);
                img.at(c, y, x) = std::min(1.0, std::max(0.0, v));
            }
        }
    }
}

// Fine oriented stripes carried by foreground shapes. The wavelength is a few
// pixels, so the finest feature levels resolve the pattern while the coarsest
// level aliases it away; class identity sets orientation and wavelength.
struct ShapeTexture {
    Real freq = 0;   // radians per pixel along the stripe normal; 0 disables
    Real angle = 0;  // stripe normal orientation
    Real depth = 0;  // modulation depth in [0, 1]
};

ShapeTexture class_texture(int class_id) {
    ShapeTexture tex;
    const Real wavelength = 6.0 + 2.0 * (class_id % 3);  // pixels
    tex.freq = 2.0 * kPi / wavelength;
    tex.angle = (class_id % 4) * (kPi / 4.0);
    tex.depth = 0.5;
    return tex;
}

void paint_shape(Tensor3& img, const ShapeParams& sp, const std::array<Real, 3>& color,
                 Rng& rng, LabelMap* labels = nullptr, uint8_t label = 0,
                 const ShapeTexture& tex = {}) {
    const Real kx = tex.freq * std::cos(tex.angle), ky = tex.freq * std::sin(tex.angle);
    for (int y = 0; y < img.height; ++y) {
        for (int x = 0; x < img.width; ++x) {
            if (!inside(sp, x + 0.5, y + 0.5)) continue;
            Real shade = 1.0;
            if (tex.freq > 0) {
                const Real t = 0.5 * (1.0 + std::sin(kx * x + ky * y));
                shade = 1.0 - tex.depth * t;
            }
            for (int c = 0; c < 3; ++c) {
                const Real v = color[c] * shade + rng.uniform(-0.02, 0.02);
                img.at(c, y, x) = std::min(1.0, std::max(0.0, v));
            }
            if (labels) labels->at(y, x) = label;
        }
    }
}

ShapeParams sample_shape(int class_id, int size, Rng& rng) {
    ShapeParams sp;
    sp.shape_id = (class_id - 1) % 10;
    sp.aspect = class_id > 10 ? 0.6 : 1.0;
    sp.cx = rng.uniform(0.32, 0.68) * size;
    sp.cy = rng.uniform(0.32, 0.68) * size;
    sp.scale = rng.uniform(0.28, 0.42) * size;
    sp.rot = rng.uniform(0.0, 2.0 * kPi);
    return sp;
}

constexpr int kMinForegroundPixels = 40;

// One image + exact label map. The foreground shape is painted last so it is
// never occluded by distractors.
void render_item(const GenSpec& spec, int class_id, Rng rng, Tensor3& img,
                 LabelMap& labels) {
    const int size = spec.image_size;
    img = Tensor3(3, size, size);
    labels = LabelMap(size, size, kBackgroundId);
    fill_background(img, class_id, spec.background_styles, rng);

    const int distractors = spec.max_distractors > 0
                                ? rng.uniform_int(0, spec.max_distractors)
                                : 0;
    for (int d = 0; d < distractors; ++d) {
        ShapeParams sp;
        sp.shape_id = rng.uniform_int(0, 9);
        sp.cx = rng.uniform(0.1, 0.9) * size;
        sp.cy = rng.uniform(0.1, 0.9) * size;
        sp.scale = rng.uniform(0.06, 0.12) * size;
        sp.rot = rng.uniform(0.0, 2.0 * kPi);
        const Real g = rng.uniform(0.25, 0.40);
        paint_shape(img, sp, {g, g, g}, rng);
    }

    const auto fg_color = hsv_to_rgb(class_hue(class_id) + rng.uniform(-6.0, 6.0),
                                     0.85, rng.uniform(0.82, 0.95));
    for (;;) {
        const ShapeParams sp = sample_shape(class_id, size, rng);
        int count = 0;
        for (int y = 0; y < size && count < kMinForegroundPixels; ++y)
            for (int x = 0; x < size; ++x)
                count += inside(sp, x + 0.5, y + 0.5);
        if (count < kMinForegroundPixels) continue;
        paint_shape(img, sp, fg_color, rng, &labels, static_cast<uint8_t>(class_id),
                    class_texture(class_id));
        break;
    }
}

}  // namespace

Dataset gen_dataset(const GenSpec& spec, const std::string& out_dir) {
    if (spec.image_size % 8 != 0 || spec.image_size < 16)
        throw std::invalid_argument("gen_dataset: image_size must be divisible by 8 and >= 16");
    if (spec.num_classes != 20)
        throw std::invalid_argument("gen_dataset: class universe is fixed at 20");

    std::error_code ec;
    fs::create_directories(out_dir, ec);
    if (ec) throw std::runtime_error("gen_dataset: cannot create " + out_dir + ": " + ec.message());

    const Rng root(spec.seed);
    Dataset ds;
    for (int c = 1; c <= spec.num_classes; ++c) {
        for (int i = 0; i < spec.items_per_class; ++i) {
            Tensor3 img;
            LabelMap labels;
            render_item(spec, c, root.fork(static_cast<uint64_t>(c) * 1000 + i), img, labels);

            DatasetItem item;
            item.image_path =
                (fs::path(out_dir) / ("img_" + std::to_string(c) + "_" + std::to_string(i) + ".ppm")).string();
            item.label_path =
                (fs::path(out_dir) / ("lbl_" + std::to_string(c) + "_" + std::to_string(i) + ".pgm")).string();
            item.classes = {c};
            write_ppm(item.image_path, img);
            write_pgm(item.label_path, labels);
            ds.items.push_back(std::move(item));
        }
    }
    write_manifest(ds, (fs::path(out_dir) / "manifest.tsv").string());
    return ds;
}

VideoSequence gen_video(const VideoSpec& spec, int class_id) {
    if (spec.frames < 1) throw std::invalid_argument("gen_video: frames must be positive");
    const int size = spec.image_size;
    Rng rng = Rng(spec.seed).fork(static_cast<uint64_t>(class_id));

    // Static background and a frame-0 shape mask; later frames shift the mask
    // by t * motion (toroidal wrap) and drift the foreground color.
    Tensor3 background(3, size, size);
    fill_background(background, class_id, 4, rng);

    ShapeParams sp = sample_shape(class_id, size, rng);
    sp.cx = size * 0.5;
    sp.cy = size * 0.5;
    // keep the shape away from the frame border so early-frame motion is a
    // pure translation of the mask (no toroidal wrap)
    sp.scale = std::min(sp.scale, 0.26 * size);
    LabelMap base_mask(size, size, kBackgroundId);
    for (int y = 0; y < size; ++y)
        for (int x = 0; x < size; ++x)
            if (inside(sp, x + 0.5, y + 0.5))
                base_mask.at(y, x) = static_cast<uint8_t>(class_id);

    const auto fg0 = hsv_to_rgb(class_hue(class_id), 0.85, 0.9);
    // appearance drifts toward the mean background color, the case where a
    // frozen model degrades and online adaptation has something to track
    Real bg_mean[3] = {0, 0, 0};
    for (int c = 0; c < 3; ++c) {
        for (int y = 0; y < size; ++y)
            for (int x = 0; x < size; ++x) bg_mean[c] += background.at(c, y, x);
        bg_mean[c] /= static_cast<Real>(size) * size;
    }
    const Real dir[3] = {bg_mean[0] - fg0[0], bg_mean[1] - fg0[1], bg_mean[2] - fg0[2]};
    Real dn = std::sqrt(dir[0] * dir[0] + dir[1] * dir[1] + dir[2] * dir[2]);
    if (dn < 1e-9) dn = 1.0;

    const ShapeTexture tex = class_texture(class_id);
    const Real kx = tex.freq * std::cos(tex.angle), ky = tex.freq * std::sin(tex.angle);

    // Per-pixel texture noise fixed across frames so only drift and motion
    // change appearance.
    std::vector<Real> noise(static_cast<size_t>(size) * size * 3);
    for (auto& n : noise) n = rng.uniform(-0.02, 0.02);

    VideoSequence seq;
    for (int t = 0; t < spec.frames; ++t) {
        const int ox = ((t * spec.motion_x) % size + size) % size;
        const int oy = ((t * spec.motion_y) % size + size) % size;
        Tensor3 frame = background;
        LabelMap mask(size, size, kBackgroundId);
        for (int y = 0; y < size; ++y) {
            for (int x = 0; x < size; ++x) {
                const int sx = ((x - ox) % size + size) % size;
                const int sy = ((y - oy) % size + size) % size;
                if (base_mask.at(sy, sx) == kBackgroundId) continue;
                mask.at(y, x) = base_mask.at(sy, sx);
                // stripes indexed by source coordinates so they move with the shape
                const Real shade =
                    1.0 - tex.depth * 0.5 * (1.0 + std::sin(kx * sx + ky * sy));
                for (int c = 0; c < 3; ++c) {
                    const Real v = fg0[c] * shade + t * spec.drift * dir[c] / dn +
                                   noise[(static_cast<size_t>(c) * size + sy) * size + sx];
                    frame.at(c, y, x) = std::min(1.0, std::max(0.0, v));
                }
            }
        }
        seq.frames.push_back(std::move(frame));
        seq.ground_truth.push_back(std::move(mask));
    }
    return seq;
}

}  // namespace amp
