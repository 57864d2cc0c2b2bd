#ifndef VIINIT_VERSION_HPP_
#define VIINIT_VERSION_HPP_

namespace viinit {

inline constexpr const char* kVersion = "0.1.0";

}  // namespace viinit

#endif  // VIINIT_VERSION_HPP_
