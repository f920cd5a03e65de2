#pragma once

namespace fpgnn {

/// Keeps large freed blocks in the heap instead of returning them to the OS.
/// Training reallocates the same n x h buffers every step, and fresh mappings
/// cost a page fault per page. No-op outside glibc.
void configure_allocator() noexcept;

} // namespace fpgnn
