#pragma once

#include <stdexcept>
#include <string>

namespace roadsurf {

// Error categories map 1:1 onto CLI exit codes (config 2, data 3, model 4).
struct config_error : std::runtime_error {
  explicit config_error(const std::string& msg) : std::runtime_error(msg) {}
};

struct data_error : std::runtime_error {
  explicit data_error(const std::string& msg) : std::runtime_error(msg) {}
};

struct model_error : std::runtime_error {
  explicit model_error(const std::string& msg) : std::runtime_error(msg) {}
};

// Raised by fuzzy inference when every rule activation is exactly zero.
// Callers decide the fallback policy; the engine never picks a default.
struct no_rule_fired : data_error {
  explicit no_rule_fired(const std::string& msg) : data_error(msg) {}
};

}  // namespace roadsurf
