#pragma once

namespace graphmerge {

/// Keeps large freed blocks inside the heap instead of returning them to
/// the kernel. Training allocates and frees the same big temporaries every
/// step; with the glibc defaults most of the step goes to mmap/munmap.
/// Idempotent; a no-op off glibc.
void configure_allocator();

}  // namespace graphmerge
