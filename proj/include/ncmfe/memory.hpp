#pragma once

// Heap high-water tracking. Linking the tracking object replaces the global
// operator new/delete; the stub object reports tracking as unavailable.

#include <cstddef>

namespace ncmfe {

bool memory_tracking_available();
/// Live bytes allocated through operator new.
std::size_t memory_current_bytes();
/// High-water mark since the last reset.
std::size_t memory_peak_bytes();
/// Sets the high-water mark to the current live size.
void memory_reset_peak();

}  // namespace ncmfe
