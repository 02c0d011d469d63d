// Generates a small corpus of synthetic grayscale PNGs so the toolkit can
// be exercised without an external dataset.
//
//   make_sample_data <out_dir> [count=6] [side=96] [seed=1]

#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <string>

#include "mdrn/image_io.hpp"
#include "mdrn/synthetic.hpp"

int main(int argc, char** argv) {
    if (argc < 2) {
        std::cerr << "usage: make_sample_data <out_dir> [count] [side] [seed]\n";
        return 2;
    }
    const std::string out_dir = argv[1];
    const int count = argc > 2 ? std::atoi(argv[2]) : 6;
    const std::int64_t side = argc > 3 ? std::atoll(argv[3]) : 96;
    const std::uint64_t seed = argc > 4 ? std::strtoull(argv[4], nullptr, 10) : 1;
    if (count < 1 || side < 16) {
        std::cerr << "count must be >= 1 and side >= 16\n";
        return 2;
    }

    std::filesystem::create_directories(out_dir);
    for (int i = 0; i < count; ++i) {
        const auto img = mdrn::synthetic_natural_image(side, side, seed + static_cast<std::uint64_t>(i));
        char name[32];
        std::snprintf(name, sizeof(name), "sample_%02d.png", i);
        const auto path = (std::filesystem::path(out_dir) / name).string();
        mdrn::write_png(path, img);
        std::cout << path << "\n";
    }
    return 0;
}
