#include <cstdio>
#include <filesystem>
#include <fstream>

#include "amp/image_io.hpp"
#include "amp/synthdata.hpp"
#include "doctest.h"

using namespace amp;
namespace fs = std::filesystem;

namespace {

std::string slurp_file(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    return std::string(std::istreambuf_iterator<char>(f), std::istreambuf_iterator<char>());
}

}  // namespace

TEST_CASE("ppm/pgm round trip and error paths") {
    Tensor3 img(3, 2, 2);
    for (size_t i = 0; i < img.data.size(); ++i) img.data[i] = (i * 17 % 256) / 255.0;
    write_ppm("io_test.ppm", img);
    const Tensor3 back = read_ppm("io_test.ppm");
    CHECK(back.data == img.data);
    write_ppm("io_test2.ppm", back);
    CHECK(slurp_file("io_test.ppm") == slurp_file("io_test2.ppm"));

    LabelMap lm(3, 2);
    lm.labels = {0, 1, 7, 255, 20, 3};
    write_pgm("io_test.pgm", lm);
    CHECK(read_pgm("io_test.pgm") == lm);

    {
        std::ofstream f("io_bad.ppm", std::ios::binary);
        f << "P6\n2 2\n65535\n";
        f.write("xxxxxxxxxxxx", 12);
    }
    CHECK_THROWS_AS(read_ppm("io_bad.ppm"), ImageParseError);

    {
        std::ofstream f("io_trunc.ppm", std::ios::binary);
        f << "P6\n2 2\n255\n";
        f.write("xxxx", 4);
    }
    CHECK_THROWS_AS(read_ppm("io_trunc.ppm"), ImageParseError);

    {
        // header "P6 2 2 255" + 12 payload bytes is a valid 2x2 image
        std::ofstream f("io_min.ppm", std::ios::binary);
        f << "P6 2 2 255 ";
        for (int i = 0; i < 12; ++i) f.put(static_cast<char>(i * 20));
        f.close();
        const Tensor3 t = read_ppm("io_min.ppm");
        CHECK(t.height == 2);
        CHECK(t.width == 2);
        CHECK(t.at(0, 0, 0) == 0.0);
    }

    for (const char* p : {"io_test.ppm", "io_test2.ppm", "io_test.pgm", "io_bad.ppm",
                          "io_trunc.ppm", "io_min.ppm"})
        std::remove(p);
}

TEST_CASE("gen_dataset shape, determinism, foreground floor") {
    GenSpec spec;
    spec.seed = 5;
    spec.items_per_class = 3;
    const std::string dir_a = "synth_a", dir_b = "synth_b";
    const Dataset ds = gen_dataset(spec, dir_a);
    CHECK(ds.items.size() == 60);

    const Dataset ds2 = gen_dataset(spec, dir_b);
    for (size_t i = 0; i < ds.items.size(); ++i) {
        CHECK(slurp_file(ds.items[i].image_path) == slurp_file(ds2.items[i].image_path));
        CHECK(slurp_file(ds.items[i].label_path) == slurp_file(ds2.items[i].label_path));
    }

    for (const auto& item : ds.items) {
        const LabelMap lm = read_pgm(item.label_path);
        REQUIRE(item.classes.size() == 1);
        int fg = 0;
        for (uint8_t v : lm.labels) {
            CHECK((v == 0 || v == item.classes[0]));
            fg += v == item.classes[0];
        }
        CHECK(fg >= 40);
        const Tensor3 img = read_ppm(item.image_path);
        CHECK(img.height == lm.height);
        CHECK(img.width == lm.width);
    }

    const Dataset via_manifest = read_manifest((fs::path(dir_a) / "manifest.tsv").string());
    CHECK(via_manifest.items.size() == ds.items.size());
    CHECK(via_manifest.items[7].classes == ds.items[7].classes);
    CHECK(read_pgm(via_manifest.items[7].label_path) == read_pgm(ds.items[7].label_path));

    fs::remove_all(dir_a);
    fs::remove_all(dir_b);
}

TEST_CASE("gen_video static and moving cases") {
    VideoSpec spec;
    spec.seed = 9;
    spec.frames = 5;
    const VideoSequence still = gen_video(spec, 4);
    REQUIRE(still.frames.size() == 5);
    for (int t = 1; t < 5; ++t) {
        CHECK(still.frames[t].data == still.frames[0].data);
        CHECK(still.ground_truth[t] == still.ground_truth[0]);
    }

    VideoSpec moving = spec;
    moving.motion_x = 2;
    moving.motion_y = 1;
    const VideoSequence seq = gen_video(moving, 4);
    // centroid displacement per frame equals the motion vector (no wrap here)
    auto centroid = [](const LabelMap& m) {
        double sx = 0, sy = 0, n = 0;
        for (int y = 0; y < m.height; ++y)
            for (int x = 0; x < m.width; ++x)
                if (m.at(y, x) != 0) {
                    sx += x;
                    sy += y;
                    n += 1;
                }
        return std::pair<double, double>{sx / n, sy / n};
    };
    for (int t = 1; t < 5; ++t) {
        const auto [ax, ay] = centroid(seq.ground_truth[t - 1]);
        const auto [bx, by] = centroid(seq.ground_truth[t]);
        CHECK(bx - ax == doctest::Approx(2.0).epsilon(1e-9));
        CHECK(by - ay == doctest::Approx(1.0).epsilon(1e-9));
    }

    VideoSpec single = spec;
    single.frames = 1;
    const VideoSequence one = gen_video(single, 17);
    CHECK(one.frames.size() == 1);
    int fg = 0;
    for (uint8_t v : one.ground_truth[0].labels) fg += v == 17;
    CHECK(fg > 0);
}
