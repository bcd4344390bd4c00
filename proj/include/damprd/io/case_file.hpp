#pragma once

#include <cctype>
#include <charconv>
#include <cstdio>
#include <fstream>
#include <istream>
#include <map>
#include <ostream>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "damprd/errors.hpp"
#include "damprd/grid/network_case.hpp"

namespace damprd::io {

namespace detail {

struct Token {
  std::string text;
  int column = 0;  // 1-based
};

inline std::vector<Token> tokenize(std::string_view line) {
  std::vector<Token> out;
  std::size_t i = 0;
  while (i < line.size()) {
    if (line[i] == '#') break;
    if (line[i] == ' ' || line[i] == '\t' || line[i] == '\r') {
      ++i;
      continue;
    }
    const std::size_t start = i;
    while (i < line.size() && line[i] != ' ' && line[i] != '\t' && line[i] != '\r' && line[i] != '#') ++i;
    out.push_back({std::string(line.substr(start, i - start)), static_cast<int>(start + 1)});
  }
  return out;
}

inline std::string located(const std::string& source, int line, int column, const std::string& msg) {
  std::string where = source + ":" + std::to_string(line);
  if (column > 0) where += ":" + std::to_string(column);
  return where + ": " + msg;
}

class RecordReader {
 public:
  RecordReader(const std::string& source, int line, const std::vector<Token>& tokens)
      : source_(source), line_(line), tokens_(tokens) {}

  [[noreturn]] void fail(const std::string& msg, int column = 0) const {
    throw ParseError(located(source_, line_, column, msg), line_, column);
  }

  void expect_fields(std::size_t min, std::size_t max, std::string_view section) const {
    if (tokens_.size() < min || tokens_.size() > max) {
      std::string want = std::to_string(min) + (min == max ? "" : "-" + std::to_string(max));
      fail("[" + std::string(section) + "] record needs " + want + " fields, found " + std::to_string(tokens_.size()),
           tokens_.empty() ? 0 : tokens_.front().column);
    }
  }

  bool has(std::size_t i) const { return i < tokens_.size(); }
  const std::string& text(std::size_t i) const { return tokens_[i].text; }

  double number(std::size_t i) const {
    const auto& t = tokens_[i];
    double v = 0.0;
    const char* end = t.text.data() + t.text.size();
    auto [ptr, ec] = std::from_chars(t.text.data(), end, v);
    if (ec != std::errc() || ptr != end) fail("expected a number, got '" + t.text + "'", t.column);
    return v;
  }

  int integer(std::size_t i) const {
    const auto& t = tokens_[i];
    int v = 0;
    const char* end = t.text.data() + t.text.size();
    auto [ptr, ec] = std::from_chars(t.text.data(), end, v);
    if (ec != std::errc() || ptr != end) fail("expected an integer, got '" + t.text + "'", t.column);
    return v;
  }

  bool flag(std::size_t i) const {
    const auto& t = tokens_[i];
    if (t.text == "1" || t.text == "true" || t.text == "yes") return true;
    if (t.text == "0" || t.text == "false" || t.text == "no") return false;
    fail("expected a 0/1 flag, got '" + t.text + "'", t.column);
  }

  int column(std::size_t i) const { return tokens_[i].column; }

 private:
  const std::string& source_;
  int line_;
  const std::vector<Token>& tokens_;
};

inline grid::BusKind bus_kind(const RecordReader& r, std::size_t i) {
  std::string k = r.text(i);
  for (auto& ch : k) ch = static_cast<char>(std::tolower(static_cast<unsigned char>(ch)));
  if (k == "slack") return grid::BusKind::slack;
  if (k == "pv") return grid::BusKind::pv;
  if (k == "pq") return grid::BusKind::pq;
  r.fail("unknown bus kind '" + r.text(i) + "'", r.column(i));
}

}  // namespace detail

/// Reads the sectioned case format.  Every record is checked where it is
/// read, so diagnostics carry its line; network-wide checks (slack count,
/// connectivity) follow.
inline grid::NetworkCase parse_case(std::istream& in, const std::string& source = "<case>") {
  grid::NetworkCase c;
  std::string section;
  std::string line;
  int lineno = 0;
  std::vector<int> slack_lines;
  std::map<int, int> bus_lines;
  std::map<std::string, int> gen_lines, load_lines;
  std::vector<std::pair<int, int>> refs;  // (bus id, line) to resolve once all buses are known

  auto fail = [&](int at, const std::string& msg) -> void {
    throw ParseError(detail::located(source, at, 0, msg), at, 0);
  };

  while (std::getline(in, line)) {
    ++lineno;
    const auto tokens = detail::tokenize(line);
    if (tokens.empty()) continue;
    const detail::RecordReader r(source, lineno, tokens);
    if (tokens.front().text.front() == '[') {
      if (tokens.size() != 1 || tokens.front().text.back() != ']') r.fail("malformed section header", 1);
      section = tokens.front().text.substr(1, tokens.front().text.size() - 2);
      if (section != "SYSTEM" && section != "BUS" && section != "BRANCH" && section != "GEN" && section != "LOAD")
        r.fail("unknown section [" + section + "]", tokens.front().column);
      continue;
    }
    if (section.empty()) r.fail("record outside of any section", tokens.front().column);

    if (section == "SYSTEM") {
      r.expect_fields(2, 2, section);
      if (r.text(0) == "base_mva") c.base_mva = r.number(1);
      else if (r.text(0) == "frequency") c.frequency = r.number(1);
      else r.fail("unknown system key '" + r.text(0) + "'", r.column(0));
      if (!(r.number(1) > 0.0)) r.fail(r.text(0) + " must be positive", r.column(1));
    } else if (section == "BUS") {
      r.expect_fields(3, 4, section);
      grid::Bus b;
      b.id = r.integer(0);
      b.kind = detail::bus_kind(r, 1);
      b.base_kv = r.number(2);
      if (r.has(3)) b.v_set = r.number(3);
      if (!(b.v_set > 0.0)) r.fail("voltage setpoint must be positive", r.column(3));
      if (auto it = bus_lines.find(b.id); it != bus_lines.end())
        r.fail("duplicate bus id " + std::to_string(b.id) + " (first on line " + std::to_string(it->second) + ")");
      bus_lines[b.id] = lineno;
      if (b.kind == grid::BusKind::slack) slack_lines.push_back(lineno);
      c.buses.push_back(b);
    } else if (section == "BRANCH") {
      r.expect_fields(5, 6, section);
      grid::Branch br;
      br.from = r.integer(0);
      br.to = r.integer(1);
      br.r = r.number(2);
      br.x = r.number(3);
      br.b = r.number(4);
      if (r.has(5)) br.in_service = r.flag(5);
      if (br.from == br.to) r.fail("branch connects a bus to itself");
      if (br.r == 0.0 && br.x == 0.0) r.fail("branch has zero series impedance");
      refs.emplace_back(br.from, lineno);
      refs.emplace_back(br.to, lineno);
      c.branches.push_back(br);
    } else if (section == "GEN") {
      r.expect_fields(9, 10, section);
      grid::Generator g;
      g.id = r.text(0);
      g.bus = r.integer(1);
      g.h = r.number(2);
      g.d = r.number(3);
      g.xd_prime = r.number(4);
      g.p_max = r.number(5);
      g.p_min = r.number(6);
      g.station = r.text(7);
      g.dispatchable = r.flag(8);
      g.p_set = r.has(9) ? r.number(9) : g.p_min;
      if (!(g.h > 0.0)) r.fail("H must be positive", r.column(2));
      if (g.d < 0.0) r.fail("D must be non-negative", r.column(3));
      if (!(g.xd_prime > 0.0)) r.fail("x_d' must be positive", r.column(4));
      if (!(g.p_max > g.p_min) || g.p_min < 0.0) r.fail("requires P_max > P_min >= 0", r.column(5));
      if (auto it = gen_lines.find(g.id); it != gen_lines.end())
        r.fail("duplicate generator id " + g.id + " (first on line " + std::to_string(it->second) + ")");
      gen_lines[g.id] = lineno;
      refs.emplace_back(g.bus, lineno);
      c.generators.push_back(g);
    } else {
      r.expect_fields(4, 4, section);
      grid::Load l;
      l.id = r.text(0);
      l.bus = r.integer(1);
      l.p = r.number(2);
      l.q = r.number(3);
      if (auto it = load_lines.find(l.id); it != load_lines.end())
        r.fail("duplicate load id " + l.id + " (first on line " + std::to_string(it->second) + ")");
      load_lines[l.id] = lineno;
      refs.emplace_back(l.bus, lineno);
      c.loads.push_back(l);
    }
  }

  if (c.buses.empty()) fail(lineno, "case has no buses");
  for (const auto& [bus, at] : refs)
    if (!bus_lines.count(bus)) fail(at, "reference to unknown bus " + std::to_string(bus));
  if (slack_lines.empty()) fail(lineno, "case has no slack bus");
  if (slack_lines.size() > 1) {
    std::string lines;
    for (std::size_t i = 0; i < slack_lines.size(); ++i)
      lines += (i ? " and line " : "line ") + std::to_string(slack_lines[i]);
    fail(slack_lines[1], "more than one slack bus: " + lines);
  }
  try {
    grid::validate(c);
  } catch (const Error& e) {
    fail(0, e.what());
  }
  return c;
}

inline grid::NetworkCase parse_case_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw PreconditionError("cannot open case file " + path);
  return parse_case(in, path);
}

/// Writes a case that parse_case reads back to an equal value.
inline void serialize_case(std::ostream& os, const grid::NetworkCase& c) {
  char buf[64];
  auto num = [&](double v) {
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return std::string(buf);
  };
  os << "[SYSTEM]\nbase_mva " << num(c.base_mva) << "\nfrequency " << num(c.frequency) << "\n\n[BUS]\n";
  for (const auto& b : c.buses)
    os << b.id << ' ' << grid::to_string(b.kind) << ' ' << num(b.base_kv) << ' ' << num(b.v_set) << '\n';
  os << "\n[BRANCH]\n";
  for (const auto& br : c.branches)
    os << br.from << ' ' << br.to << ' ' << num(br.r) << ' ' << num(br.x) << ' ' << num(br.b) << ' '
       << (br.in_service ? 1 : 0) << '\n';
  os << "\n[GEN]\n";
  for (const auto& g : c.generators)
    os << g.id << ' ' << g.bus << ' ' << num(g.h) << ' ' << num(g.d) << ' ' << num(g.xd_prime) << ' ' << num(g.p_max)
       << ' ' << num(g.p_min) << ' ' << g.station << ' ' << (g.dispatchable ? 1 : 0) << ' ' << num(g.p_set) << '\n';
  os << "\n[LOAD]\n";
  for (const auto& l : c.loads) os << l.id << ' ' << l.bus << ' ' << num(l.p) << ' ' << num(l.q) << '\n';
}

inline std::string serialize_case(const grid::NetworkCase& c) {
  std::ostringstream os;
  serialize_case(os, c);
  return os.str();
}

}  // namespace damprd::io
