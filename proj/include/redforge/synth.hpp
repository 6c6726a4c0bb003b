// Copyright (c) 2026 The redforge Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//   http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "redforge/corpus.hpp"
#include "redforge/wav.hpp"

namespace redforge::synth {

// A synthetic "speaker": glottal pulse train at a base pitch shaped by a
// fixed formant envelope.
struct Voice {
  double f0 = 120.0;
  std::vector<double> formants;    // Hz
  std::vector<double> bandwidths;  // Hz
  std::vector<double> gains;
  double floor = 0.12;  // envelope level away from the formants
};

// Four voices with well separated pitch and formants.
const std::vector<Voice>& voices();

// RMS-normalized burst of `seconds` of voiced sound, band-limited to
// lowpass_hz when positive.
std::vector<double> voiced_burst(const Voice& voice, double seconds,
                                 int sample_rate, double lowpass_hz,
                                 std::uint64_t seed);

struct Burst {
  double start = 0.0;
  double end = 0.0;
  int speaker = 0;
};

struct FileTruth {
  std::string file;
  std::string kind;  // clean, noisy, moderate, lowpass, two_speaker
  int sample_rate = 16000;
  double snr_db = 60.0;
  std::vector<Burst> bursts;
};

struct CorpusOptions {
  std::size_t n_files = 20;
  double file_seconds = 30.0;
  std::uint64_t seed = 7;
};

// Writes the corpus as 16-bit WAV files plus truth.json into dir and
// returns the per-file ground truth.
std::vector<FileTruth> write_corpus(const std::filesystem::path& dir,
                                    const CorpusOptions& options = {});

OrderedJson to_json(const FileTruth& t);

}  // namespace redforge::synth
