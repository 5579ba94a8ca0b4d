#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace matcomp {

/// Runs one subcommand: parse-expr, extract, train, eval, gen-synthetic, label-distant.
/// Returns 0 on success, 2 on a usage error (usage text goes to `err`), 1 on any other failure.
int dispatch(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace matcomp
