#pragma once

#include <iosfwd>
#include <string>

#include "budgetkv/toymodel.hpp"

namespace budgetkv::io {

// CSV columns: layer,head,query_pos,key_pos,score. Scores round-trip
// exactly (emitted with 17 significant digits).
void write_trace_csv(const toy::AttentionTrace& trace, std::ostream& out);

// Parses the trace CSV format above; throws ParseError (with the 1-based
// line number) on malformed rows.
toy::AttentionTrace read_trace_csv(std::istream& in);

std::string format_double(double value);

}  // namespace budgetkv::io
