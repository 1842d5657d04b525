#pragma once

#include <iosfwd>

namespace biasprobe {

// `biasprobe ingest|run|score|associate|report ...`; returns the process exit code.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace biasprobe
