#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace layergeo {

/// Entry point behind the `layergeo` executable. Returns the process exit
/// code: 0 on success, 1 when a requested verification check fails, 2 on
/// usage or runtime errors (reported as one JSON object on `err`).
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);
int run_cli(int argc, char** argv);

}  // namespace layergeo
