#pragma once

#include "dcm/types.hpp"

#include <span>

namespace dcm {

// Stratifies one problem's attempt history.
//   A: every attempt correct.
//   B: at least one correct and at least one incorrect attempt.
//   C: all incorrect and the round budget is exhausted.
// Throws IncompleteTrajectory when all attempts failed before max_rounds, and
// InputError on an empty, non-contiguous, or over-budget trajectory.
SampleType classify_trajectory(std::span<const AttemptRecord> attempts, int max_rounds);

} // namespace dcm
