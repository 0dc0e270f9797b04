#pragma once

#include <string>

namespace fedgat::log {

void info(const std::string& msg);
void warn(const std::string& msg);

}  // namespace fedgat::log
