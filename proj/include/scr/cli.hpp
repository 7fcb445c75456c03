#pragma once

#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "scr/error.hpp"

namespace scr::cli {

struct Environment {
  std::optional<std::string> store;  // SCR_STORE
  std::optional<std::string> actor;  // SCR_ACTOR, else USER
};

Environment environment_from_process();

// 0 success, 1 domain refusal, 2 usage, 3 integrity or IO.
int exit_code(ErrorClass c);

// args excludes the program name.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err,
        const Environment& env = environment_from_process());

}  // namespace scr::cli
