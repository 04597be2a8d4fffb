#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace accsev {

/// Base error for every failure raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Raised when a stored model or file disagrees with the data it is applied to.
class MismatchError : public Error {
public:
    using Error::Error;
};

/// Mixes a master seed with a member index into an independent stream seed.
/// Member seeds depend only on (master, index), so members can be trained in
/// any order or in parallel and still reproduce the same models.
constexpr std::uint64_t derive_seed(std::uint64_t master, std::uint64_t index) noexcept {
    // splitmix64 finalizer applied to a golden-ratio stride
    std::uint64_t z = master + 0x9E3779B97F4A7C15ULL * (index + 1);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

constexpr std::uint64_t derive_seed(std::uint64_t master, std::uint64_t a, std::uint64_t b) noexcept {
    return derive_seed(derive_seed(master, a), b);
}

/// Number of worker threads to use; 0 means one per hardware thread.
unsigned resolve_threads(unsigned requested) noexcept;

}  // namespace accsev
