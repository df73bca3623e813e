// Copyright 2026 The sepforge authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#pragma once

#include <atomic>
#include <cstdint>

namespace sepforge::instrumentation {

// Test-visible counters for structural assertions (block application counts,
// softmax evaluation counts). Not used for control flow.
std::atomic<std::uint64_t>& softmax_evals();
std::atomic<std::uint64_t>& blocks_applied();
void reset();

}  // namespace sepforge::instrumentation
