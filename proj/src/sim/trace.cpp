#include "sim/trace.hpp"

#include <array>
#include <charconv>
#include <istream>
#include <ostream>
#include <stdexcept>

namespace sim {

namespace {
constexpr std::array<std::string_view, 11> kNames = {
    "Grant",       "Send",        "Deliver",   "Drop",
    "Mark",        "CwndChange",  "RateCallback", "LayerChange",
    "PolicerDrop", "BufDrop",     "TransferDone"};

double parse_double(std::string_view field, std::size_t line) {
  double v = 0.0;
  auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), v);
  if (ec != std::errc() || ptr != field.data() + field.size())
    throw std::runtime_error("trace line " + std::to_string(line) +
                             ": bad number '" + std::string(field) + "'");
  return v;
}
}  // namespace

std::string_view to_string(TraceKind kind) {
  return kNames.at(static_cast<std::size_t>(kind));
}

std::optional<TraceKind> trace_kind_from_string(std::string_view name) {
  for (std::size_t i = 0; i < kNames.size(); ++i)
    if (kNames[i] == name) return static_cast<TraceKind>(i);
  return std::nullopt;
}

std::string format_number(double value) {
  std::array<char, 32> buf{};
  auto [ptr, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), value);
  if (ec != std::errc()) throw std::runtime_error("number formatting failed");
  return std::string(buf.data(), ptr);
}

void write_csv(std::ostream& out, const std::vector<TraceRecord>& records) {
  out << kTraceHeader << '\n';
  for (const TraceRecord& r : records) {
    out << format_number(r.t) << ',' << r.flow << ',' << to_string(r.kind)
        << ',' << format_number(r.value1) << ',' << format_number(r.value2)
        << '\n';
  }
}

std::vector<TraceRecord> read_csv(std::istream& in) {
  std::vector<TraceRecord> records;
  std::string line;
  if (!std::getline(in, line) || line != kTraceHeader)
    throw std::runtime_error("trace: missing header");
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::array<std::string_view, 5> f;
    std::string_view rest = line;
    for (std::size_t i = 0; i < 5; ++i) {
      const auto comma = rest.find(',');
      if ((comma == std::string_view::npos) != (i == 4))
        throw std::runtime_error("trace line " + std::to_string(lineno) +
                                 ": expected 5 fields");
      f[i] = rest.substr(0, comma);
      if (comma != std::string_view::npos) rest.remove_prefix(comma + 1);
    }
    TraceRecord r;
    r.t = parse_double(f[0], lineno);
    auto [ptr, ec] =
        std::from_chars(f[1].data(), f[1].data() + f[1].size(), r.flow);
    if (ec != std::errc() || ptr != f[1].data() + f[1].size())
      throw std::runtime_error("trace line " + std::to_string(lineno) +
                               ": bad flow id");
    auto kind = trace_kind_from_string(f[2]);
    if (!kind)
      throw std::runtime_error("trace line " + std::to_string(lineno) +
                               ": unknown kind '" + std::string(f[2]) + "'");
    r.kind = *kind;
    r.value1 = parse_double(f[3], lineno);
    r.value2 = parse_double(f[4], lineno);
    records.push_back(r);
  }
  return records;
}

}  // namespace sim
