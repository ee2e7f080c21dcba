#include "budgetkv/trace_io.hpp"

#include <algorithm>
#include <cstdio>
#include <istream>
#include <map>
#include <ostream>
#include <sstream>
#include <tuple>
#include <vector>

#include "budgetkv/errors.hpp"

namespace budgetkv::io {

std::string format_double(double value) {
  char buffer[64];
  std::snprintf(buffer, sizeof(buffer), "%.17g", value);
  return buffer;
}

void write_trace_csv(const toy::AttentionTrace& trace, std::ostream& out) {
  out << "layer,head,query_pos,key_pos,score\n";
  for (std::size_t layer = 0; layer < trace.layers(); ++layer) {
    for (std::size_t head = 0; head < trace.heads(); ++head) {
      for (const auto& row : trace.rows(layer, head)) {
        for (std::size_t i = 0; i < row.scores.size(); ++i) {
          out << layer << ',' << head << ',' << row.query_pos << ','
              << row.key_positions[i] << ',' << format_double(row.scores[i]) << '\n';
        }
      }
    }
  }
}

namespace {

struct ParsedRow {
  std::size_t layer, head, query_pos, key_pos;
  double score;
};

std::vector<std::string> split_fields(const std::string& line) {
  std::vector<std::string> fields;
  std::string field;
  std::stringstream ss(line);
  while (std::getline(ss, field, ',')) fields.push_back(field);
  return fields;
}

}  // namespace

toy::AttentionTrace read_trace_csv(std::istream& in) {
  std::string line;
  std::size_t line_no = 0;
  std::vector<ParsedRow> parsed;
  std::size_t max_layer = 0;
  std::size_t max_head = 0;

  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '#') continue;
    if (line.rfind("layer,head", 0) == 0) continue;  // header
    const auto fields = split_fields(line);
    if (fields.size() != 5) {
      throw ParseError("trace csv: expected 5 fields", line_no);
    }
    ParsedRow row{};
    try {
      row.layer = std::stoul(fields[0]);
      row.head = std::stoul(fields[1]);
      row.query_pos = std::stoul(fields[2]);
      row.key_pos = std::stoul(fields[3]);
      std::size_t consumed = 0;
      row.score = std::stod(fields[4], &consumed);
      if (consumed != fields[4].size()) {
        throw ParseError("trace csv: trailing characters in score", line_no);
      }
    } catch (const ParseError&) {
      throw;
    } catch (const std::exception&) {
      throw ParseError("trace csv: malformed numeric field", line_no);
    }
    max_layer = std::max(max_layer, row.layer);
    max_head = std::max(max_head, row.head);
    parsed.push_back(row);
  }
  if (parsed.empty()) throw ParseError("trace csv: no rows", line_no == 0 ? 1 : line_no);

  toy::AttentionTrace trace(max_layer + 1, max_head + 1);
  // Group rows per (layer, head, query) preserving key order as written.
  std::map<std::tuple<std::size_t, std::size_t, std::size_t>, toy::TraceRow> grouped;
  for (const auto& row : parsed) {
    auto& target = grouped[{row.layer, row.head, row.query_pos}];
    target.query_pos = row.query_pos;
    target.key_positions.push_back(row.key_pos);
    target.scores.push_back(row.score);
  }
  for (auto& [key, row] : grouped) {
    trace.add_row(std::get<0>(key), std::get<1>(key), std::move(row));
  }
  return trace;
}

}  // namespace budgetkv::io
