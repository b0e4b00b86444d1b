#pragma once

#include <iosfwd>
#include <span>
#include <string>

namespace kprop {

/// Runs one `kprop` subcommand. Returns 0 on success, 1 on usage errors and
/// 2 on data errors (unreadable or malformed input, numeric failure).
int cli_main(std::span<const std::string> args, std::ostream& out, std::ostream& err);

}  // namespace kprop
