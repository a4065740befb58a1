#ifndef ATXY_VERSION_HPP
#define ATXY_VERSION_HPP

namespace atxy {
inline constexpr const char* kVersion = "0.1.0";
}

#endif
