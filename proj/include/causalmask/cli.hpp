#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace causalmask {

// When `train` is given no explicit validation file it splits the training
// file itself: indices are shuffled by NoiseSource(seed ^ kTrainSplitSalt)
// and the last round(n * validation_fraction) rows (at least 1, at most n-1)
// become the validation set. The split depends only on (seed, n, fraction).
inline constexpr std::uint64_t kTrainSplitSalt = 0x2545f4914f6cdd1dULL;

inline constexpr const char* kInspectSchema = "causalmask.inspect.v1";
inline constexpr const char* kGradcheckSchema = "causalmask.gradcheck.v1";
inline constexpr const char* kAblateSchema = "causalmask.ablate.v1";

// Entry point behind the `causalmask` binary; args excludes the program name.
// Subcommands: synth, train, eval, inspect, gradcheck, ablate. Returns 0 on
// success, 1 on a runtime failure (the offending term or file is named on
// stderr), 2 on a usage error (unknown flag/subcommand; usage text on
// stderr). gradcheck additionally returns 1 when any gradient check fails.
int cli_main(std::vector<std::string> args);

}  // namespace causalmask
