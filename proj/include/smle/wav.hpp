// Copyright 2026 The SMLE Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#pragma once

#include <filesystem>
#include <span>

#include "smle/common.hpp"

namespace smle {

/// Reads a RIFF/WAVE file holding 16-bit PCM, mono, 16 kHz. Samples are
/// divided by 32768. Any other format is rejected rather than converted.
Signal load_wav(const std::filesystem::path& path);

/// Writes 16-bit PCM mono; samples are rounded and clipped to the int16 range.
void save_wav(const std::filesystem::path& path, std::span<const double> samples,
              int sample_rate = kSampleRate);

}  // namespace smle
