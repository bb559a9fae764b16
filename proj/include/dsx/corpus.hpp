#pragma once

#include <string>
#include <vector>

#include "dsx/common.hpp"

namespace dsx {

struct CorpusClip {
  std::string id;    // file stem
  std::string path;  // absolute or cwd-relative
};

// Mono WAV files (>= min_seconds long) in a directory, sorted by filename.
std::vector<CorpusClip> scan_corpus(const std::string& dir,
                                    double min_seconds = 3.0);

// Speech-shaped synthetic clip: drifting-pitch harmonic voicing alternating
// with noise bursts under a syllabic envelope, band-limited to speech range.
// Deterministic in (seed). Peak 0.9, 24 kHz mono.
std::vector<double> synth_speech_clip(uint64_t seed, double seconds);

// Write n synthetic clips into a directory (clip_000.wav ...).
void synth_corpus_dir(const std::string& dir, int n, double seconds,
                      uint64_t seed);

}  // namespace dsx
