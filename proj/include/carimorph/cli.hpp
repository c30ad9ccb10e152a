#pragma once

#include <iosfwd>

namespace carimorph {

/// carimorph <pca|exaggerate|register|texture|score|train-toy|serve> [flags]
/// Returns 0 on success, 1 on a domain error, 2 on a usage error.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace carimorph
