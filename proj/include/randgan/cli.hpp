#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace randgan {

// Entry point of the `randgan` tool; args[0] is the program name. Returns the
// process exit code. Commands:
//   synth | preprocess | segment train | segment apply | gan-train | score | evaluate | plot
// Every command writes into a staging directory next to --out and renames it
// into place only on success, together with config.resolved.json.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace randgan
