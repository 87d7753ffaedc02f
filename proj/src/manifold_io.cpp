/*
 Copyright 2026 The touchmap Authors
 Licensed under the Apache License, Version 2.0 (the "License");
 you may not use this file except in compliance with the License.
 You may obtain a copy of the License at

      http://www.apache.org/licenses/LICENSE-2.0

 Unless required by applicable law or agreed to in writing, software
 distributed under the License is distributed on an "AS IS" BASIS,
 WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 See the License for the specific language governing permissions and
 limitations under the License.
*/

#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <iterator>
#include <sstream>

#include "json_util.hpp"
#include "touchmap/error.hpp"
#include "touchmap/manifold.hpp"
#include "touchmap/util.hpp"

namespace touchmap {

namespace {

std::vector<std::string> read_lines(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw FormatError("cannot open " + path.string());
    std::vector<std::string> lines;
    std::string line;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.find_first_not_of(" \t") == std::string::npos) continue;
        lines.push_back(line);
    }
    return lines;
}

} // namespace

EmbeddingMatrix read_embedding_csv(const std::filesystem::path& path) {
    const auto lines = read_lines(path);
    if (lines.empty()) throw FormatError(path.string() + ": empty embedding CSV");
    const auto header = split(lines[0], ',');
    if (header.size() < 2 || header[0] != "id") throw FormatError(path.string() + ": header must start with 'id'");
    for (std::size_t j = 1; j < header.size(); ++j)
        if (header[j] != "v" + std::to_string(j - 1))
            throw FormatError(path.string() + ": expected column v" + std::to_string(j - 1) + ", got '" + header[j] + "'");
    EmbeddingMatrix emb;
    emb.d = header.size() - 1;
    for (std::size_t r = 1; r < lines.size(); ++r) {
        const auto cells = split(lines[r], ',');
        if (cells.size() != emb.d + 1)
            throw FormatError(path.string() + ":" + std::to_string(r + 1) + ": expected " +
                              std::to_string(emb.d + 1) + " fields, got " + std::to_string(cells.size()));
        emb.ids.push_back(cells[0]);
        for (std::size_t j = 1; j < cells.size(); ++j) {
            double v = 0.0;
            if (!parse_double(cells[j], v) || !std::isfinite(v))
                throw FormatError(path.string() + ":" + std::to_string(r + 1) + ": bad value '" + cells[j] + "'");
            emb.data.push_back(v);
        }
    }
    emb.n = emb.ids.size();
    return emb;
}

void write_embedding_csv(const std::filesystem::path& path, const EmbeddingMatrix& emb) {
    std::ofstream out(path);
    if (!out) throw FormatError("cannot write " + path.string());
    out << "id";
    for (std::size_t j = 0; j < emb.d; ++j) out << ",v" << j;
    out << '\n';
    for (std::size_t i = 0; i < emb.n; ++i) {
        out << emb.ids[i];
        for (double v : emb.row(i)) out << ',' << format_double(v);
        out << '\n';
    }
}

std::filesystem::path embedding_sidecar_path(const std::filesystem::path& blob) {
    auto p = blob;
    p.replace_extension(".json");
    return p;
}

EmbeddingMatrix read_embedding_bin(const std::filesystem::path& path) {
    const auto side = embedding_sidecar_path(path);
    std::ifstream sj(side);
    if (!sj) throw FormatError("missing embedding sidecar " + side.string());
    detail::json meta;
    try {
        sj >> meta;
    } catch (const detail::json::exception& e) {
        throw FormatError(side.string() + ": " + e.what());
    }
    EmbeddingMatrix emb;
    try {
        emb.n = meta.at("n").get<std::size_t>();
        emb.d = meta.at("d").get<std::size_t>();
        emb.ids = meta.at("ids").get<std::vector<std::string>>();
    } catch (const detail::json::exception& e) {
        throw FormatError(side.string() + ": " + e.what());
    }
    if (emb.ids.size() != emb.n) throw FormatError(side.string() + ": ids length does not match n");

    std::ifstream in(path, std::ios::binary);
    if (!in) throw FormatError("cannot open " + path.string());
    std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    if (bytes.size() != emb.n * emb.d * 4)
        throw FormatError(path.string() + ": expected " + std::to_string(emb.n * emb.d * 4) + " bytes, got " +
                          std::to_string(bytes.size()));
    emb.data.resize(emb.n * emb.d);
    for (std::size_t i = 0; i < emb.data.size(); ++i) {
        const std::uint32_t u = static_cast<std::uint32_t>(bytes[4 * i]) |
                                (static_cast<std::uint32_t>(bytes[4 * i + 1]) << 8) |
                                (static_cast<std::uint32_t>(bytes[4 * i + 2]) << 16) |
                                (static_cast<std::uint32_t>(bytes[4 * i + 3]) << 24);
        float f;
        std::memcpy(&f, &u, 4);
        emb.data[i] = f;
    }
    return emb;
}

void write_embedding_bin(const std::filesystem::path& path, const EmbeddingMatrix& emb) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw FormatError("cannot write " + path.string());
    for (double v : emb.data) {
        const float f = static_cast<float>(v);
        std::uint32_t u;
        std::memcpy(&u, &f, 4);
        const unsigned char b[4] = {static_cast<unsigned char>(u), static_cast<unsigned char>(u >> 8),
                                    static_cast<unsigned char>(u >> 16), static_cast<unsigned char>(u >> 24)};
        out.write(reinterpret_cast<const char*>(b), 4);
    }
    nlohmann::ordered_json meta;
    meta["n"] = emb.n;
    meta["d"] = emb.d;
    meta["ids"] = emb.ids;
    std::ofstream(embedding_sidecar_path(path)) << meta.dump() << '\n';
}

EmbeddingMatrix read_embedding(const std::filesystem::path& path) {
    if (path.extension() == ".csv") return read_embedding_csv(path);
    return read_embedding_bin(path);
}

void write_coords_csv(const std::filesystem::path& path, const ManifoldCoords& coords) {
    std::ofstream out(path);
    if (!out) throw FormatError("cannot write " + path.string());
    out << "id,x,y\n";
    for (std::size_t i = 0; i < coords.size(); ++i) {
        out << (i < coords.ids.size() ? coords.ids[i] : std::to_string(i)) << ',' << format_double(coords.x(i)) << ','
            << format_double(coords.y(i)) << '\n';
    }
}

ManifoldCoords read_coords_csv(const std::filesystem::path& path) {
    const auto lines = read_lines(path);
    if (lines.empty() || lines[0] != "id,x,y") throw FormatError(path.string() + ": header must be 'id,x,y'");
    ManifoldCoords c;
    for (std::size_t r = 1; r < lines.size(); ++r) {
        const auto cells = split(lines[r], ',');
        double x = 0.0, y = 0.0;
        if (cells.size() != 3 || !parse_double(cells[1], x) || !parse_double(cells[2], y))
            throw FormatError(path.string() + ":" + std::to_string(r + 1) + ": malformed row");
        c.ids.push_back(cells[0]);
        c.xy.push_back(x);
        c.xy.push_back(y);
    }
    return c;
}

} // namespace touchmap
