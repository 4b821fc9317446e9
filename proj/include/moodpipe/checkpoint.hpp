#pragma once

#include <iosfwd>
#include <string>

#include "moodpipe/adam.hpp"

namespace moodpipe {

// Binary checkpoint: magic "MOODPIPE1", then per parameter
//   u64 name length, UTF-8 name, u64 rank, u64 dims..., f64 row-major data,
// all little-endian. Readers reject unknown magic.
void save_checkpoint(const std::string& path, const ParamMap& params);
ParamMap load_checkpoint(const std::string& path);

void write_params(std::ostream& os, const ParamMap& params);
ParamMap read_params(std::istream& is);

}  // namespace moodpipe
