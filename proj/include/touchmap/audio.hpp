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

#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

namespace touchmap {

inline constexpr int kPipelineSampleRate = 16000;

/// Mono PCM signal with amplitudes nominally in [-1, 1].
struct AudioClip {
    std::vector<double> samples;
    int sample_rate = kPipelineSampleRate;

    std::size_t size() const { return samples.size(); }
    double duration_s() const { return static_cast<double>(samples.size()) / sample_rate; }
};

/// Reads a 16-bit PCM mono WAV. Rates that are integer multiples of 16 kHz
/// are decimated to 16 kHz by block averaging; any other rate is rejected.
AudioClip read_wav(const std::filesystem::path& path);

/// Decodes WAV bytes already in memory; same rules as read_wav.
AudioClip decode_wav(std::span<const std::uint8_t> bytes);

/// Writes 16-bit PCM mono, little-endian. Samples are clipped to [-1, 1].
void write_wav(const std::filesystem::path& path, const AudioClip& clip);

std::vector<std::uint8_t> encode_wav(const AudioClip& clip);

/// Block-average decimation by an integer factor (trailing partial block dropped).
AudioClip decimate(const AudioClip& clip, int factor);

} // namespace touchmap
