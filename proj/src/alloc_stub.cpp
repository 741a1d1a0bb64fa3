#include "ncmfe/memory.hpp"

// Used where replacing the global allocator is unsafe (the Python module).

namespace ncmfe {

bool memory_tracking_available() { return false; }
std::size_t memory_current_bytes() { return 0; }
std::size_t memory_peak_bytes() { return 0; }
void memory_reset_peak() {}

}  // namespace ncmfe
