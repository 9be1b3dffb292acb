#pragma once

#include <string>

#include "amp/label_map.hpp"
#include "amp/tensor.hpp"

namespace amp {

// Binary PPM (P6) / PGM (P5), maxval 255 only. Images map to Tensor3[3,H,W]
// with values in [0, 1]; label maps store raw bytes.

struct ImageParseError : std::runtime_error {
    ImageParseError(const std::string& what, size_t offset);
    size_t byte_offset;
};

void write_ppm(const std::string& path, const Tensor3& image);
Tensor3 read_ppm(const std::string& path);

void write_pgm(const std::string& path, const LabelMap& labels);
LabelMap read_pgm(const std::string& path);

}  // namespace amp
