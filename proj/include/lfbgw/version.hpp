#ifndef LFBGW_VERSION_HPP
#define LFBGW_VERSION_HPP

namespace lfbgw {

inline constexpr const char* kVersion = "0.1.0";

}

#endif
