#pragma once

#include <cstddef>
#include <new>
#include <vector>

namespace porogen {

/// 64-byte-aligned allocator. Numeric buffers must always start on the same
/// alignment phase: SIMD kernels peel loops based on the pointer's alignment,
/// so a heap-dependent base address would change floating-point summation
/// grouping from run to run and break bit-reproducibility.
template <typename T>
struct AlignedAllocator {
    using value_type = T;
    static constexpr std::size_t alignment = 64;

    AlignedAllocator() = default;
    template <typename U>
    AlignedAllocator(const AlignedAllocator<U>&) {}

    T* allocate(std::size_t n) {
        return static_cast<T*>(::operator new(n * sizeof(T), std::align_val_t(alignment)));
    }
    void deallocate(T* p, std::size_t) noexcept {
        ::operator delete(p, std::align_val_t(alignment));
    }

    template <typename U>
    bool operator==(const AlignedAllocator<U>&) const {
        return true;
    }
};

template <typename T>
using AlignedVec = std::vector<T, AlignedAllocator<T>>;

} // namespace porogen
