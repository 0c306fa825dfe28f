#pragma once

#include <atomic>

// Fault-injection switches for mutation testing of the self-test harness. Never set in
// normal operation.
namespace hdfeat::testing {

// When set, depth_to_space writes the top-right and bottom-left sub-positions swapped.
inline std::atomic<bool> corrupt_depth_to_space_order{false};

}  // namespace hdfeat::testing
