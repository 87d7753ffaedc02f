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
#include <cstring>

#include "doctest.h"
#include "test_util.hpp"
#include "touchmap/audio.hpp"
#include "touchmap/error.hpp"

using namespace touchmap;
using touchmap::testing::TempDir;

namespace {

// Minimal WAV writer independent of the library's encoder.
std::vector<std::uint8_t> raw_wav(int rate, int channels, int bits, int format, const std::vector<std::int16_t>& pcm) {
    std::vector<std::uint8_t> b;
    auto u32 = [&](std::uint32_t v) {
        for (int i = 0; i < 4; ++i) b.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
    };
    auto u16 = [&](std::uint16_t v) {
        b.push_back(static_cast<std::uint8_t>(v));
        b.push_back(static_cast<std::uint8_t>(v >> 8));
    };
    const auto data_bytes = static_cast<std::uint32_t>(pcm.size() * 2);
    b.insert(b.end(), {'R', 'I', 'F', 'F'});
    u32(36 + data_bytes);
    b.insert(b.end(), {'W', 'A', 'V', 'E', 'f', 'm', 't', ' '});
    u32(16);
    u16(static_cast<std::uint16_t>(format));
    u16(static_cast<std::uint16_t>(channels));
    u32(static_cast<std::uint32_t>(rate));
    u32(static_cast<std::uint32_t>(rate * channels * bits / 8));
    u16(static_cast<std::uint16_t>(channels * bits / 8));
    u16(static_cast<std::uint16_t>(bits));
    b.insert(b.end(), {'d', 'a', 't', 'a'});
    u32(data_bytes);
    for (auto s : pcm) u16(static_cast<std::uint16_t>(s));
    return b;
}

} // namespace

TEST_SUITE_BEGIN("audio");

TEST_CASE("wav round trip is exact for 16-bit values") {
    AudioClip c;
    for (int v : {0, 1, -1, 1000, -32768, 32767, 12345}) c.samples.push_back(v / 32768.0);
    const auto back = decode_wav(encode_wav(c));
    CHECK(back.sample_rate == 16000);
    REQUIRE(back.size() == c.size());
    for (std::size_t i = 0; i < c.size(); ++i) CHECK(back.samples[i] == c.samples[i]);
}

TEST_CASE("wav file round trip and clipping") {
    TempDir dir("audio");
    AudioClip c;
    c.samples = {0.5, -0.25, 2.0, -3.0};
    write_wav(dir / "a.wav", c);
    const auto back = read_wav(dir / "a.wav");
    CHECK(back.samples[0] == doctest::Approx(0.5).epsilon(1e-4));
    CHECK(back.samples[1] == doctest::Approx(-0.25).epsilon(1e-4));
    CHECK(back.samples[2] == doctest::Approx(32767.0 / 32768.0));
    CHECK(back.samples[3] == -1.0);
}

TEST_CASE("48 kHz input is decimated by block averaging") {
    const std::vector<std::int16_t> pcm{300, 600, 900, -300, -300, -300, 3, 3};
    const auto clip = decode_wav(raw_wav(48000, 1, 16, 1, pcm));
    CHECK(clip.sample_rate == 16000);
    REQUIRE(clip.size() == 2);  // the trailing partial block is dropped
    CHECK(clip.samples[0] == doctest::Approx(600.0 / 32768.0));
    CHECK(clip.samples[1] == doctest::Approx(-300.0 / 32768.0));
}

TEST_CASE("unsupported formats are rejected") {
    const std::vector<std::int16_t> pcm(16, 0);
    CHECK_THROWS_AS(decode_wav(raw_wav(44100, 1, 16, 1, pcm)), FormatError);
    CHECK_THROWS_AS(decode_wav(raw_wav(16000, 2, 16, 1, pcm)), FormatError);
    CHECK_THROWS_AS(decode_wav(raw_wav(16000, 1, 16, 3, pcm)), FormatError);
    auto truncated = raw_wav(16000, 1, 16, 1, pcm);
    truncated.resize(truncated.size() - 10);
    CHECK_THROWS_AS(decode_wav(truncated), FormatError);
    const std::vector<std::uint8_t> junk{'n', 'o', 'p', 'e'};
    CHECK_THROWS_AS(decode_wav(junk), FormatError);
}

TEST_CASE("decimate") {
    AudioClip c;
    c.samples = {1, 2, 3, 4, 5};
    const auto d = decimate(c, 2);
    CHECK(d.sample_rate == 8000);
    CHECK(d.samples == std::vector<double>{1.5, 3.5});
    CHECK(decimate(c, 1).samples == c.samples);
    CHECK_THROWS(decimate(c, 0));
}

TEST_CASE("missing file is a format error") {
    CHECK_THROWS_AS(read_wav("/nonexistent/x.wav"), FormatError);
}

TEST_SUITE_END();
