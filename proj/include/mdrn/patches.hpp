#pragma once

#include <cstdint>
#include <cstring>
#include <fstream>
#include <string>
#include <vector>

#include "mdrn/corpus.hpp"
#include "mdrn/dihedral.hpp"
#include "mdrn/errors.hpp"
#include "mdrn/noise.hpp"
#include "mdrn/rng.hpp"

namespace mdrn {

/// Aligned clean/noisy training crops, both (B, C, P, P).
/// noisy - clean is exactly the sampled noise realization.
struct PatchBatch {
    Tensor<double> clean;
    Tensor<double> noisy;
};

/// Indices of corpus images large enough to crop a patch from.
inline std::vector<std::size_t> eligible_images(const LoadedCorpus& corpus, std::int64_t patch) {
    std::vector<std::size_t> idx;
    for (std::size_t i = 0; i < corpus.images.size(); ++i) {
        if (corpus.images[i].h() >= patch && corpus.images[i].w() >= patch) idx.push_back(i);
    }
    return idx;
}

/// Uniform random crops with fresh per-patch noise. If augment is set, each
/// crop goes through one of the 8 square symmetries before noise is added.
/// Images smaller than the patch are ignored (callers may warn once).
inline PatchBatch sample_patches(const LoadedCorpus& corpus, std::int64_t batch, std::int64_t patch,
                                 const NoiseSpec& spec, bool augment, RngStream& rng) {
    if (batch < 1) throw std::invalid_argument("batch must be >= 1");
    if (patch < 1) throw std::invalid_argument("patch size must be >= 1");
    if (corpus.images.empty()) throw DataError("empty corpus");
    const auto pool = eligible_images(corpus, patch);
    if (pool.empty()) {
        throw DataError("no corpus image is at least " + std::to_string(patch) + "x" + std::to_string(patch));
    }
    const std::int64_t C = corpus.channels;
    PatchBatch out{Tensor<double>(batch, C, patch, patch), Tensor<double>(batch, C, patch, patch)};
    for (std::int64_t b = 0; b < batch; ++b) {
        const auto& img = corpus.images[pool[static_cast<std::size_t>(
            rng.uniform_int(0, static_cast<std::int64_t>(pool.size()) - 1))]];
        const std::int64_t y0 = rng.uniform_int(0, img.h() - patch);
        const std::int64_t x0 = rng.uniform_int(0, img.w() - patch);
        Tensor<double> crop(1, C, patch, patch);
        for (std::int64_t c = 0; c < C; ++c)
            for (std::int64_t y = 0; y < patch; ++y)
                for (std::int64_t x = 0; x < patch; ++x) crop.at(0, c, y, x) = img.at(0, c, y0 + y, x0 + x);
        if (augment) crop = apply_dihedral(crop, static_cast<int>(rng.uniform_int(0, 7)));
        const Tensor<double> noisy = add_awgn(crop, spec, rng);
        for (std::int64_t c = 0; c < C; ++c)
            for (std::int64_t y = 0; y < patch; ++y)
                for (std::int64_t x = 0; x < patch; ++x) {
                    out.clean.at(b, c, y, x) = crop.at(0, c, y, x);
                    out.noisy.at(b, c, y, x) = noisy.at(0, c, y, x);
                }
    }
    return out;
}

// Patch archive: "MDRNPAT1", then u32 version, i64 dims b/c/h/w, u8 dtype
// tag (8 = float64), then the clean and noisy payloads row-major
// little-endian. Layout documented in docs/formats.md.
inline constexpr char kPatchMagic[8] = {'M', 'D', 'R', 'N', 'P', 'A', 'T', '1'};

inline void write_patch_archive(const std::string& path, const PatchBatch& batch) {
    if (!batch.clean.same_shape(batch.noisy)) throw std::invalid_argument("patch archive: shape mismatch");
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot write patch archive: " + path);
    out.write(kPatchMagic, 8);
    const std::uint32_t version = 1;
    out.write(reinterpret_cast<const char*>(&version), 4);
    const Shape s = batch.clean.shape();
    for (std::int64_t d : {s.b, s.c, s.h, s.w}) out.write(reinterpret_cast<const char*>(&d), 8);
    const std::uint8_t dtype = 8;
    out.write(reinterpret_cast<const char*>(&dtype), 1);
    out.write(reinterpret_cast<const char*>(batch.clean.data()), batch.clean.size() * 8);
    out.write(reinterpret_cast<const char*>(batch.noisy.data()), batch.noisy.size() * 8);
    if (!out) throw DataError("short write on patch archive: " + path);
}

inline PatchBatch read_patch_archive(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open patch archive: " + path);
    char magic[8];
    in.read(magic, 8);
    if (!in || std::memcmp(magic, kPatchMagic, 8) != 0) throw DataError("not a patch archive: " + path);
    std::uint32_t version = 0;
    in.read(reinterpret_cast<char*>(&version), 4);
    if (version != 1) throw DataError("unsupported patch archive version " + std::to_string(version));
    std::int64_t dims[4];
    for (auto& d : dims) in.read(reinterpret_cast<char*>(&d), 8);
    std::uint8_t dtype = 0;
    in.read(reinterpret_cast<char*>(&dtype), 1);
    if (!in || dtype != 8) throw DataError("unsupported patch archive dtype");
    PatchBatch batch{Tensor<double>(dims[0], dims[1], dims[2], dims[3]),
                     Tensor<double>(dims[0], dims[1], dims[2], dims[3])};
    in.read(reinterpret_cast<char*>(batch.clean.data()), batch.clean.size() * 8);
    in.read(reinterpret_cast<char*>(batch.noisy.data()), batch.noisy.size() * 8);
    if (!in) throw DataError("truncated patch archive: " + path);
    return batch;
}

}  // namespace mdrn
