#include "amp/image_io.hpp"

#include <cmath>
#include <fstream>
#include <sstream>
#include <vector>

namespace amp {

ImageParseError::ImageParseError(const std::string& what, size_t offset)
    : std::runtime_error(what + " (byte offset " + std::to_string(offset) + ")"),
      byte_offset(offset) {}

namespace {

std::vector<char> slurp(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot open " + path);
    return std::vector<char>(std::istreambuf_iterator<char>(f),
                             std::istreambuf_iterator<char>());
}

struct Cursor {
    const std::vector<char>& buf;
    size_t pos = 0;

    void skip_space() {
        while (pos < buf.size()) {
            const char c = buf[pos];
            if (c == '#') {
                while (pos < buf.size() && buf[pos] != '\n') ++pos;
            } else if (c == ' ' || c == '\t' || c == '\r' || c == '\n') {
                ++pos;
            } else {
                break;
            }
        }
    }

    int read_int() {
        skip_space();
        const size_t start = pos;
        int v = 0;
        while (pos < buf.size() && buf[pos] >= '0' && buf[pos] <= '9') {
            v = v * 10 + (buf[pos] - '0');
            ++pos;
        }
        if (pos == start) throw ImageParseError("expected integer", pos);
        return v;
    }
};

// Returns payload start after parsing "Pn w h maxval" + one whitespace byte.
size_t parse_header(const std::vector<char>& buf, char kind, int& w, int& h) {
    if (buf.size() < 2 || buf[0] != 'P' || buf[1] != kind)
        throw ImageParseError(std::string("bad magic, expected P") + kind, 0);
    Cursor cur{buf, 2};
    w = cur.read_int();
    h = cur.read_int();
    const int maxval = cur.read_int();
    if (w <= 0 || h <= 0) throw ImageParseError("non-positive dimensions", cur.pos);
    if (maxval != 255) throw ImageParseError("unsupported maxval (must be 255)", cur.pos);
    if (cur.pos >= buf.size()) throw ImageParseError("truncated header", cur.pos);
    return cur.pos + 1;  // single whitespace between header and payload
}

uint8_t to_byte(Real v) {
    const Real c = std::min(1.0, std::max(0.0, v));
    return static_cast<uint8_t>(std::lround(c * 255.0));
}

}  // namespace

void write_ppm(const std::string& path, const Tensor3& image) {
    if (image.channels != 3)
        throw std::invalid_argument("write_ppm: image must have 3 channels");
    std::ofstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("write_ppm: cannot open " + path);
    f << "P6\n" << image.width << " " << image.height << "\n255\n";
    for (int y = 0; y < image.height; ++y)
        for (int x = 0; x < image.width; ++x)
            for (int c = 0; c < 3; ++c)
                f.put(static_cast<char>(to_byte(image.at(c, y, x))));
    if (!f) throw std::runtime_error("write_ppm: write failed for " + path);
}

Tensor3 read_ppm(const std::string& path) {
    const auto buf = slurp(path);
    int w = 0, h = 0;
    const size_t start = parse_header(buf, '6', w, h);
    const size_t need = static_cast<size_t>(w) * h * 3;
    if (buf.size() - start < need)
        throw ImageParseError("truncated pixel payload", buf.size());
    Tensor3 img(3, h, w);
    size_t p = start;
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x)
            for (int c = 0; c < 3; ++c)
                img.at(c, y, x) = static_cast<uint8_t>(buf[p++]) / 255.0;
    return img;
}

void write_pgm(const std::string& path, const LabelMap& labels) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("write_pgm: cannot open " + path);
    f << "P5\n" << labels.width << " " << labels.height << "\n255\n";
    f.write(reinterpret_cast<const char*>(labels.labels.data()),
            static_cast<std::streamsize>(labels.labels.size()));
    if (!f) throw std::runtime_error("write_pgm: write failed for " + path);
}

LabelMap read_pgm(const std::string& path) {
    const auto buf = slurp(path);
    int w = 0, h = 0;
    const size_t start = parse_header(buf, '5', w, h);
    const size_t need = static_cast<size_t>(w) * h;
    if (buf.size() - start < need)
        throw ImageParseError("truncated pixel payload", buf.size());
    LabelMap lm(h, w);
    for (size_t p = 0; p < need; ++p)
        lm.labels[p] = static_cast<uint8_t>(buf[start + p]);
    return lm;
}

}  // namespace amp
