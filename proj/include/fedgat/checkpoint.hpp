#pragma once

#include <string>

#include "fedgat/param_store.hpp"

namespace fedgat {

// Little-endian binary layout: "FGAT" magic, a version byte, the parameter
// count, then per parameter a (name, shape) header, then every value as a
// 64-bit float in store order. Round-trips bit-exactly.
void save_checkpoint(const ParamStore& params, const std::string& path);
ParamStore load_checkpoint(const std::string& path);

}  // namespace fedgat
