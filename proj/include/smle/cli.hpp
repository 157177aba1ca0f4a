// Copyright 2026 The SMLE Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace smle {

/// Runs one `smle` subcommand. Returns 0 on success, 1 on a runtime
/// failure and 2 on a usage error. args excludes the program name.
int dispatch(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace smle
