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

#include "touchmap/audio.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>
#include <string>

#include "touchmap/error.hpp"

namespace touchmap {

namespace {

std::uint32_t read_u32(std::span<const std::uint8_t> b, std::size_t at) {
    return static_cast<std::uint32_t>(b[at]) | (static_cast<std::uint32_t>(b[at + 1]) << 8) |
           (static_cast<std::uint32_t>(b[at + 2]) << 16) | (static_cast<std::uint32_t>(b[at + 3]) << 24);
}

std::uint16_t read_u16(std::span<const std::uint8_t> b, std::size_t at) {
    return static_cast<std::uint16_t>(b[at] | (b[at + 1] << 8));
}

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>((v >> (8 * i)) & 0xff));
}

void put_u16(std::vector<std::uint8_t>& out, std::uint16_t v) {
    out.push_back(static_cast<std::uint8_t>(v & 0xff));
    out.push_back(static_cast<std::uint8_t>(v >> 8));
}

bool tag_is(std::span<const std::uint8_t> b, std::size_t at, const char* tag) {
    return std::memcmp(b.data() + at, tag, 4) == 0;
}

} // namespace

AudioClip decimate(const AudioClip& clip, int factor) {
    if (factor < 1) throw Error("decimation factor must be >= 1");
    if (factor == 1) return clip;
    AudioClip out;
    out.sample_rate = clip.sample_rate / factor;
    const std::size_t n = clip.samples.size() / static_cast<std::size_t>(factor);
    out.samples.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        double acc = 0.0;
        for (int j = 0; j < factor; ++j) acc += clip.samples[i * factor + j];
        out.samples[i] = acc / factor;
    }
    return out;
}

AudioClip decode_wav(std::span<const std::uint8_t> bytes) {
    if (bytes.size() < 12 || !tag_is(bytes, 0, "RIFF") || !tag_is(bytes, 8, "WAVE"))
        throw FormatError("not a RIFF/WAVE file");

    bool have_fmt = false;
    std::uint16_t format = 0, channels = 0, bits = 0;
    std::uint32_t rate = 0;
    std::span<const std::uint8_t> data;
    bool have_data = false;

    std::size_t pos = 12;
    while (pos + 8 <= bytes.size()) {
        const std::uint32_t len = read_u32(bytes, pos + 4);
        const std::size_t body = pos + 8;
        if (body + len > bytes.size()) {
            throw FormatError("WAV chunk overruns file (truncated?)");
        }
        if (tag_is(bytes, pos, "fmt ")) {
            if (len < 16) throw FormatError("WAV fmt chunk too short");
            format = read_u16(bytes, body);
            channels = read_u16(bytes, body + 2);
            rate = read_u32(bytes, body + 4);
            bits = read_u16(bytes, body + 14);
            have_fmt = true;
        } else if (tag_is(bytes, pos, "data")) {
            data = bytes.subspan(body, len);
            have_data = true;
        }
        pos = body + len + (len & 1u);
    }
    if (!have_fmt) throw FormatError("WAV has no fmt chunk");
    if (!have_data) throw FormatError("WAV has no data chunk");
    if (format != 1) throw FormatError("WAV is not integer PCM (format tag " + std::to_string(format) + ")");
    if (channels != 1) throw FormatError("WAV must be mono, got " + std::to_string(channels) + " channels");
    if (bits != 16) throw FormatError("WAV must be 16-bit, got " + std::to_string(bits) + " bits");
    if (rate == 0 || rate % kPipelineSampleRate != 0)
        throw FormatError("unsupported sample rate " + std::to_string(rate) + " (need a multiple of 16000)");

    AudioClip clip;
    clip.sample_rate = static_cast<int>(rate);
    const std::size_t n = data.size() / 2;
    clip.samples.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        const auto v = static_cast<std::int16_t>(read_u16(data, 2 * i));
        clip.samples[i] = v / 32768.0;
    }
    return decimate(clip, static_cast<int>(rate / kPipelineSampleRate));
}

AudioClip read_wav(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw FormatError("cannot open " + path.string());
    std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    try {
        return decode_wav(bytes);
    } catch (const FormatError& e) {
        throw FormatError(path.string() + ": " + e.what());
    }
}

std::vector<std::uint8_t> encode_wav(const AudioClip& clip) {
    if (clip.sample_rate <= 0) throw Error("sample_rate must be positive");
    const auto data_len = static_cast<std::uint32_t>(clip.samples.size() * 2);
    std::vector<std::uint8_t> out;
    out.reserve(44 + data_len);
    out.insert(out.end(), {'R', 'I', 'F', 'F'});
    put_u32(out, 36 + data_len);
    out.insert(out.end(), {'W', 'A', 'V', 'E', 'f', 'm', 't', ' '});
    put_u32(out, 16);
    put_u16(out, 1);
    put_u16(out, 1);
    put_u32(out, static_cast<std::uint32_t>(clip.sample_rate));
    put_u32(out, static_cast<std::uint32_t>(clip.sample_rate) * 2);
    put_u16(out, 2);
    put_u16(out, 16);
    out.insert(out.end(), {'d', 'a', 't', 'a'});
    put_u32(out, data_len);
    for (double s : clip.samples) {
        const double c = std::clamp(s, -1.0, 1.0);
        const auto v = static_cast<std::int16_t>(std::lround(std::clamp(c * 32768.0, -32768.0, 32767.0)));
        put_u16(out, static_cast<std::uint16_t>(v));
    }
    return out;
}

void write_wav(const std::filesystem::path& path, const AudioClip& clip) {
    const auto bytes = encode_wav(clip);
    std::ofstream out(path, std::ios::binary);
    if (!out) throw FormatError("cannot write " + path.string());
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
}

} // namespace touchmap
