#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace ppvrule {

/// Entry point shared by the binary and the tests. args excludes the program
/// name. Returns 0 on success, 1 on input/usage errors, 2 when a fit ran but
/// could not satisfy the PPV constraint.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace ppvrule
