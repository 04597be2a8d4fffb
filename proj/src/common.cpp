#include "accsev/common.hpp"

#include <algorithm>
#include <thread>

namespace accsev {

unsigned resolve_threads(unsigned requested) noexcept {
    if (requested) return requested;
    return std::max(1u, std::thread::hardware_concurrency());
}

}  // namespace accsev
