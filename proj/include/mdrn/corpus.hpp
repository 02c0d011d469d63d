#pragma once

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "mdrn/errors.hpp"
#include "mdrn/image_io.hpp"
#include "mdrn/tensor.hpp"

namespace mdrn {

/// Listing of dataset images: stable ids plus resolved file paths.
struct CorpusManifest {
    std::vector<std::string> ids;
    std::vector<std::string> paths;

    std::size_t size() const { return paths.size(); }
};

/// All PNGs in a directory, ordered by filename.
inline CorpusManifest scan_directory(const std::string& dir) {
    namespace fs = std::filesystem;
    if (!fs::is_directory(dir)) throw DataError("corpus directory not found: " + dir);
    std::vector<fs::path> files;
    for (const auto& e : fs::directory_iterator(dir)) {
        if (e.is_regular_file() && e.path().extension() == ".png") files.push_back(e.path());
    }
    std::sort(files.begin(), files.end());
    if (files.empty()) throw DataError("no PNG images in " + dir);
    CorpusManifest m;
    for (const auto& f : files) {
        m.ids.push_back(f.stem().string());
        m.paths.push_back(f.string());
    }
    return m;
}

/// Manifest file: JSON (array of paths, or {"images": [...]}) or plain text
/// with one path per line ('#' starts a comment). Relative paths resolve
/// against the manifest's own directory.
inline CorpusManifest load_manifest(const std::string& path) {
    namespace fs = std::filesystem;
    std::ifstream in(path);
    if (!in) throw DataError("cannot open manifest: " + path);
    const fs::path base = fs::path(path).parent_path();
    std::vector<std::string> entries;
    if (fs::path(path).extension() == ".json") {
        nlohmann::json j;
        try {
            in >> j;
        } catch (const nlohmann::json::exception& e) {
            throw DataError("manifest parse error in " + path + ": " + e.what());
        }
        const auto& arr = j.is_array() ? j : j.at("images");
        for (const auto& item : arr) entries.push_back(item.get<std::string>());
    } else {
        std::string line;
        while (std::getline(in, line)) {
            const auto hash = line.find('#');
            if (hash != std::string::npos) line.erase(hash);
            while (!line.empty() && (line.back() == ' ' || line.back() == '\t' || line.back() == '\r')) line.pop_back();
            std::size_t start = 0;
            while (start < line.size() && (line[start] == ' ' || line[start] == '\t')) ++start;
            if (start < line.size()) entries.push_back(line.substr(start));
        }
    }
    if (entries.empty()) throw DataError("manifest lists no images: " + path);
    CorpusManifest m;
    for (const auto& e : entries) {
        fs::path p(e);
        if (p.is_relative()) p = base / p;
        m.ids.push_back(p.stem().string());
        m.paths.push_back(p.string());
    }
    return m;
}

/// Accepts either a directory of PNGs or a manifest file.
inline CorpusManifest resolve_corpus(const std::string& path) {
    if (std::filesystem::is_directory(path)) return scan_directory(path);
    return load_manifest(path);
}

/// Manifest realized in memory, converted to a single color mode.
struct LoadedCorpus {
    std::vector<std::string> ids;
    std::vector<Tensor<double>> images;  // each (1, channels, H, W)
    std::int64_t channels = 1;
};

/// Load every manifest entry. channels=1 converts RGB to luma; channels=3
/// rejects grayscale sources. With `skipped`, unreadable or mismatched
/// images are recorded and skipped instead of aborting the load.
inline LoadedCorpus load_corpus(const CorpusManifest& m, std::int64_t channels,
                                std::vector<std::string>* skipped = nullptr) {
    if (channels != 1 && channels != 3) throw ConfigError("corpus channels must be 1 or 3");
    if (m.size() == 0) throw DataError("empty manifest");
    LoadedCorpus out;
    out.channels = channels;
    for (std::size_t i = 0; i < m.paths.size(); ++i) {
        try {
            Tensor<double> img = read_png(m.paths[i]);
            if (channels == 1) {
                img = to_grayscale(img);
            } else if (img.c() != 3) {
                throw DataError("expected a color image: " + m.paths[i]);
            }
            out.ids.push_back(m.ids[i]);
            out.images.push_back(std::move(img));
        } catch (const DataError& e) {
            if (!skipped) throw;
            skipped->push_back(m.ids[i] + ": " + e.what());
        }
    }
    if (out.images.empty()) throw DataError("no usable images in corpus");
    return out;
}

}  // namespace mdrn
