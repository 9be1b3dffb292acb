#include "amp/proxy.hpp"

#include <algorithm>
#include <cstring>
#include <fstream>

#include "amp/kernels.hpp"

namespace amp {

Proxy nmap(const std::vector<const FeaturePyramid*>& pyramids,
           const std::vector<const SoftMask*>& masks, int class_id) {
    if (pyramids.empty() || pyramids.size() != masks.size())
        throw std::invalid_argument("nmap: need k >= 1 pyramid/mask pairs");
    const size_t k = pyramids.size();
    for (size_t i = 0; i < k; ++i) {
        if (masks[i]->height != pyramids[i]->source_height ||
            masks[i]->width != pyramids[i]->source_width)
            throw std::invalid_argument("nmap: mask must be at source image resolution");
        if (masks[i]->total() <= 0.0) throw EmptyMaskError();
    }

    Proxy proxy;
    proxy.class_id = class_id;
    for (int r = 0; r < 3; ++r) {
        const int channels = pyramids[0]->levels[r].channels;
        Vector pooled(channels, 0.0);
        for (size_t i = 0; i < k; ++i) {
            const SoftMask& m = *masks[i];
            const Tensor3 up = bilinear_resize(pyramids[i]->levels[r], m.height, m.width);
            const Real n_i = m.total();
            const int plane = m.height * m.width;
            for (int c = 0; c < channels; ++c) {
                Real s = 0.0;
                const Real* f = &up.data[static_cast<size_t>(c) * plane];
                for (int p = 0; p < plane; ++p) s += f[p] * m.weights[p];
                pooled[c] += s / n_i;
            }
        }
        for (Real& v : pooled) v /= static_cast<Real>(k);
        proxy.vectors[r] = l2_normalize(pooled);
    }
    return proxy;
}

Proxy nmap(const std::vector<FeaturePyramid>& pyramids,
           const std::vector<SoftMask>& masks, int class_id) {
    std::vector<const FeaturePyramid*> ps;
    std::vector<const SoftMask*> ms;
    for (const auto& p : pyramids) ps.push_back(&p);
    for (const auto& m : masks) ms.push_back(&m);
    return nmap(ps, ms, class_id);
}

ClassifierBank imprint(const ClassifierBank& bank, const Proxy& proxy) {
    if (bank.has(proxy.class_id))
        throw std::invalid_argument("imprint: class already present");
    ClassifierBank out = bank;
    out.class_ids.push_back(proxy.class_id);
    for (int r = 0; r < 3; ++r) {
        if (out.filters[r].rows == 0) {
            out.filters[r] = Matrix(1, static_cast<int>(proxy.vectors[r].size()));
            std::copy(proxy.vectors[r].begin(), proxy.vectors[r].end(),
                      out.filters[r].data.begin());
        } else {
            out.filters[r].append_row(proxy.vectors[r]);
        }
    }
    return out;
}

ClassifierBank adapt(const ClassifierBank& bank, const Proxy& proxy, Real alpha) {
    if (alpha < 0.0 || alpha > 1.0)
        throw std::invalid_argument("adapt: alpha must be in [0, 1]");
    const int row = bank.row_of(proxy.class_id);
    if (row < 0) throw std::invalid_argument("adapt: unknown class id");
    ClassifierBank out = bank;
    if (alpha == 0.0) return out;
    for (int r = 0; r < 3; ++r) {
        Matrix& m = out.filters[r];
        if (static_cast<int>(proxy.vectors[r].size()) != m.cols)
            throw std::invalid_argument("adapt: proxy dimension mismatch");
        for (int c = 0; c < m.cols; ++c) {
            if (alpha == 1.0)
                m.at(row, c) = proxy.vectors[r][c];
            else
                m.at(row, c) = alpha * proxy.vectors[r][c] + (1.0 - alpha) * m.at(row, c);
        }
    }
    return out;
}

ClassifierBank adapt_or_imprint(const ClassifierBank& bank, const Proxy& proxy, Real alpha) {
    return bank.has(proxy.class_id) ? adapt(bank, proxy, alpha) : imprint(bank, proxy);
}

namespace {
constexpr char kMagic[6] = {'A', 'M', 'P', 'C', 'B', '1'};
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

void save_bank(const ClassifierBank& bank, const std::string& path) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("save_bank: cannot open " + path);
    f.write(kMagic, sizeof(kMagic));
    put<uint32_t>(f, static_cast<uint32_t>(bank.class_ids.size()));
    for (int id : bank.class_ids) put<uint32_t>(f, static_cast<uint32_t>(id));
    for (int r = 0; r < 3; ++r) {
        put<uint32_t>(f, static_cast<uint32_t>(bank.filters[r].cols));
        f.write(reinterpret_cast<const char*>(bank.filters[r].data.data()),
                static_cast<std::streamsize>(bank.filters[r].data.size() * sizeof(Real)));
    }
    if (!f) throw std::runtime_error("save_bank: write failed for " + path);
}

ClassifierBank load_bank(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("load_bank: cannot open " + path);
    char magic[6];
    f.read(magic, sizeof(magic));
    if (!f || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0)
        throw std::runtime_error("load_bank: bad magic in " + path);
    ClassifierBank bank;
    const uint32_t n = get<uint32_t>(f);
    for (uint32_t i = 0; i < n; ++i)
        bank.class_ids.push_back(static_cast<int>(get<uint32_t>(f)));
    for (int r = 0; r < 3; ++r) {
        const int cols = static_cast<int>(get<uint32_t>(f));
        Matrix m(static_cast<int>(n), cols);
        f.read(reinterpret_cast<char*>(m.data.data()),
               static_cast<std::streamsize>(m.data.size() * sizeof(Real)));
        bank.filters[r] = std::move(m);
    }
    if (!f) throw std::runtime_error("load_bank: truncated file " + path);
    return bank;
}

}  // namespace amp
