#include "fedgat/log.hpp"

#include <iostream>

namespace fedgat::log {

void info(const std::string& msg) { std::cerr << "[fedgat] " << msg << "\n"; }

void warn(const std::string& msg) {
  std::cerr << "[fedgat] warning: " << msg << "\n";
}

}  // namespace fedgat::log
