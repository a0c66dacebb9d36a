#pragma once

#include <cctype>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include <json.hpp>

namespace nvsim {

// Line-oriented pulse-sequence language mirroring the lab orchestration of
// laser, microwave and readout channels:
//
//   sweep tau 0:10us:200
//   laser 3us
//   wait 1us                  # dark interval
//   mw pi @ 2832MHz amp 5MHz phase 0
//   mw $tau @ 2832MHz
//   repeat 3 {
//     readout 400ns
//   }
//
// Durations take ns/us/ms/s, frequencies Hz/kHz/MHz/GHz; any numeric slot
// accepts a $variable bound by a sweep declaration. Statements execute
// strictly one after another (no parallel blocks in this version).

struct SequenceError : std::runtime_error {
  int line;
  int column;
  SequenceError(int line_, int column_, const std::string& msg)
      : std::runtime_error(std::to_string(line_) + ":" + std::to_string(column_) + ": " + msg),
        line(line_), column(column_) {}
};

struct ParseError : SequenceError {
  using SequenceError::SequenceError;
};

struct CompileError : SequenceError {
  using SequenceError::SequenceError;
};

enum class StatementKind { laser, mw, wait, readout };

enum class PulseRole { none, pi, half_pi };

/// A literal value (already in SI units) or a $variable reference.
struct ScalarExpr {
  double value = 0.0;
  std::string var;
  bool is_var() const { return !var.empty(); }
  friend bool operator==(const ScalarExpr& a, const ScalarExpr& b) {
    return a.value == b.value && a.var == b.var;
  }
};

struct Statement {
  StatementKind kind = StatementKind::wait;
  ScalarExpr duration;            // seconds; ignored for pi / pi/2 roles
  PulseRole role = PulseRole::none;
  ScalarExpr frequency;           // Hz, mw only
  bool has_amplitude = false;
  ScalarExpr amplitude;           // Rabi Hz, mw only
  bool has_phase = false;
  ScalarExpr phase;               // radians, mw only
  int line = 0;
  int column = 0;

  friend bool operator==(const Statement& a, const Statement& b) {
    return a.kind == b.kind && a.duration == b.duration && a.role == b.role &&
           a.frequency == b.frequency && a.has_amplitude == b.has_amplitude &&
           a.amplitude == b.amplitude && a.has_phase == b.has_phase && a.phase == b.phase;
  }
};

struct SequenceItem;

struct RepeatBlock {
  int count = 1;
  std::vector<SequenceItem> body;
  int line = 0;
  int column = 0;
  friend bool operator==(const RepeatBlock& a, const RepeatBlock& b);
};

struct SequenceItem {
  std::variant<Statement, RepeatBlock> node;
  friend bool operator==(const SequenceItem& a, const SequenceItem& b) {
    return a.node == b.node;
  }
};

inline bool operator==(const RepeatBlock& a, const RepeatBlock& b) {
  return a.count == b.count && a.body == b.body;
}

struct SweepDecl {
  std::string variable;
  double start = 0.0;
  double stop = 0.0;
  int points = 0;
  int line = 0;
  int column = 0;
  friend bool operator==(const SweepDecl& a, const SweepDecl& b) {
    return a.variable == b.variable && a.start == b.start && a.stop == b.stop &&
           a.points == b.points;
  }
};

struct SequenceProgram {
  std::vector<SweepDecl> sweeps;
  std::vector<SequenceItem> items;
  friend bool operator==(const SequenceProgram& a, const SequenceProgram& b) {
    return a.sweeps == b.sweeps && a.items == b.items;
  }

  /// Value of the sweep variable at point index k (linear scale).
  static double sweep_value(const SweepDecl& s, int k) {
    return s.start + (s.stop - s.start) * (s.points > 1 ? double(k) / (s.points - 1) : 0.0);
  }
};

namespace detail {

struct Token {
  std::string text;
  int line = 0;
  int column = 0;
};

inline std::vector<std::vector<Token>> tokenize(const std::string& text) {
  std::vector<std::vector<Token>> lines;
  std::vector<Token> current;
  int line = 1, column = 1;
  std::string word;
  int word_col = 0;
  auto flush_word = [&]() {
    if (!word.empty()) {
      current.push_back({word, line, word_col});
      word.clear();
    }
  };
  auto flush_line = [&]() {
    flush_word();
    lines.push_back(std::move(current));
    current.clear();
  };
  bool in_comment = false;
  for (char c : text) {
    if (c == '\n') {
      flush_line();
      ++line;
      column = 1;
      in_comment = false;
      continue;
    }
    if (!in_comment) {
      if (c == '#') {
        flush_word();
        in_comment = true;
      } else if (std::isspace(static_cast<unsigned char>(c))) {
        flush_word();
      } else if (c == '{' || c == '}' || c == '@') {
        flush_word();
        current.push_back({std::string(1, c), line, column});
      } else {
        if (word.empty()) word_col = column;
        word.push_back(c);
      }
    }
    ++column;
  }
  flush_line();
  return lines;
}

enum class Dim { plain, time, freq };

struct ParsedValue {
  double value = 0.0;
  Dim dim = Dim::plain;
};

inline std::optional<ParsedValue> parse_value(const Token& tok) {
  const char* begin = tok.text.c_str();
  char* end = nullptr;
  const double v = std::strtod(begin, &end);
  if (end == begin) return std::nullopt;  // no leading number
  const std::string unit(end);
  static const std::map<std::string, std::pair<double, Dim>> units = {
      {"", {1.0, Dim::plain}},      {"ns", {1e-9, Dim::time}}, {"us", {1e-6, Dim::time}},
      {"ms", {1e-3, Dim::time}},    {"s", {1.0, Dim::time}},   {"Hz", {1.0, Dim::freq}},
      {"kHz", {1e3, Dim::freq}},    {"MHz", {1e6, Dim::freq}}, {"GHz", {1e9, Dim::freq}},
  };
  const auto it = units.find(unit);
  if (it == units.end())
    throw ParseError(tok.line, tok.column, "unknown unit '" + unit + "'");
  return ParsedValue{v * it->second.first, it->second.second};
}

inline ScalarExpr parse_scalar(const Token& tok, Dim expected, const char* what) {
  if (tok.text.size() > 1 && tok.text[0] == '$') return {0.0, tok.text.substr(1)};
  const auto parsed = parse_value(tok);
  if (!parsed)
    throw ParseError(tok.line, tok.column, std::string("expected ") + what + ", got '" + tok.text + "'");
  if (expected != Dim::plain && parsed->dim != expected)
    throw ParseError(tok.line, tok.column,
                     std::string(expected == Dim::time ? "duration" : "frequency") +
                         " needs a " + (expected == Dim::time ? "time" : "frequency") +
                         " unit, got '" + tok.text + "'");
  if (expected == Dim::plain && parsed->dim != Dim::plain)
    throw ParseError(tok.line, tok.column, std::string(what) + " must be a bare number");
  return {parsed->value, ""};
}

inline ScalarExpr parse_duration(const Token& tok) {
  ScalarExpr e = parse_scalar(tok, Dim::time, "a duration");
  if (!e.is_var() && e.value < 0.0)
    throw ParseError(tok.line, tok.column, "negative duration");
  return e;
}

inline void collect_vars(const std::vector<SequenceItem>& items,
                         std::vector<std::pair<std::string, const Statement*>>& refs) {
  for (const auto& item : items) {
    if (const auto* stmt = std::get_if<Statement>(&item.node)) {
      for (const ScalarExpr* e : {&stmt->duration, &stmt->frequency, &stmt->amplitude, &stmt->phase})
        if (e->is_var()) refs.emplace_back(e->var, stmt);
    } else {
      collect_vars(std::get<RepeatBlock>(item.node).body, refs);
    }
  }
}

} // namespace detail

/// Parse sequence source text. Errors carry 1-based line:column positions.
inline SequenceProgram parse(const std::string& text) {
  using detail::Token;
  SequenceProgram program;
  std::vector<RepeatBlock*> stack;  // innermost open repeat block
  auto sink = [&]() -> std::vector<SequenceItem>& {
    return stack.empty() ? program.items : stack.back()->body;
  };

  for (const auto& tokens : detail::tokenize(text)) {
    if (tokens.empty()) continue;
    const Token& head = tokens[0];
    auto need = [&](std::size_t n, const char* msg) {
      if (tokens.size() < n)
        throw ParseError(head.line, head.column, msg);
    };
    auto no_extra = [&](std::size_t n) {
      if (tokens.size() > n)
        throw ParseError(tokens[n].line, tokens[n].column,
                         "unexpected token '" + tokens[n].text + "'");
    };

    if (head.text == "laser" || head.text == "wait" || head.text == "readout") {
      need(2, "missing duration");
      no_extra(2);
      Statement s;
      s.kind = head.text == "laser" ? StatementKind::laser
               : head.text == "wait" ? StatementKind::wait
                                     : StatementKind::readout;
      s.duration = detail::parse_duration(tokens[1]);
      s.line = head.line;
      s.column = head.column;
      sink().push_back({std::move(s)});
    } else if (head.text == "mw") {
      need(4, "mw needs '<dur> @ <freq>'");
      Statement s;
      s.kind = StatementKind::mw;
      s.line = head.line;
      s.column = head.column;
      if (tokens[1].text == "pi")
        s.role = PulseRole::pi;
      else if (tokens[1].text == "pi/2")
        s.role = PulseRole::half_pi;
      else
        s.duration = detail::parse_duration(tokens[1]);
      if (tokens[2].text != "@")
        throw ParseError(tokens[2].line, tokens[2].column, "expected '@' before the frequency");
      s.frequency = detail::parse_scalar(tokens[3], detail::Dim::freq, "a frequency");
      std::size_t k = 4;
      while (k < tokens.size()) {
        if (tokens[k].text == "amp") {
          if (k + 1 >= tokens.size())
            throw ParseError(tokens[k].line, tokens[k].column, "amp needs a value");
          s.amplitude = detail::parse_scalar(tokens[k + 1], detail::Dim::freq, "a Rabi frequency");
          s.has_amplitude = true;
          k += 2;
        } else if (tokens[k].text == "phase") {
          if (k + 1 >= tokens.size())
            throw ParseError(tokens[k].line, tokens[k].column, "phase needs a value");
          s.phase = detail::parse_scalar(tokens[k + 1], detail::Dim::plain, "a phase in radians");
          s.has_phase = true;
          k += 2;
        } else {
          throw ParseError(tokens[k].line, tokens[k].column,
                           "unexpected token '" + tokens[k].text + "'");
        }
      }
      sink().push_back({std::move(s)});
    } else if (head.text == "sweep") {
      need(3, "sweep needs '<var> <start>:<stop>:<points>'");
      no_extra(3);
      if (!stack.empty())
        throw ParseError(head.line, head.column, "sweep declarations must be top-level");
      SweepDecl decl;
      decl.variable = tokens[1].text;
      decl.line = head.line;
      decl.column = head.column;
      if (decl.variable.empty() || decl.variable[0] == '$')
        throw ParseError(tokens[1].line, tokens[1].column,
                         "sweep variable is declared without '$'");
      for (const auto& existing : program.sweeps)
        if (existing.variable == decl.variable)
          throw ParseError(tokens[1].line, tokens[1].column,
                           "duplicate sweep variable '" + decl.variable + "'");
      const std::string& range = tokens[2].text;
      const auto c1 = range.find(':');
      const auto c2 = c1 == std::string::npos ? std::string::npos : range.find(':', c1 + 1);
      if (c1 == std::string::npos || c2 == std::string::npos)
        throw ParseError(tokens[2].line, tokens[2].column,
                         "sweep range must be '<start>:<stop>:<points>'");
      const Token start_tok{range.substr(0, c1), tokens[2].line, tokens[2].column};
      const Token stop_tok{range.substr(c1 + 1, c2 - c1 - 1), tokens[2].line,
                           tokens[2].column + static_cast<int>(c1) + 1};
      const Token pts_tok{range.substr(c2 + 1), tokens[2].line,
                          tokens[2].column + static_cast<int>(c2) + 1};
      const auto start = detail::parse_value(start_tok);
      const auto stop = detail::parse_value(stop_tok);
      if (!start) throw ParseError(start_tok.line, start_tok.column, "bad sweep start");
      if (!stop) throw ParseError(stop_tok.line, stop_tok.column, "bad sweep stop");
      decl.start = start->value;
      decl.stop = stop->value;
      const auto pts = detail::parse_value(pts_tok);
      if (!pts || pts->dim != detail::Dim::plain || pts->value != std::floor(pts->value))
        throw ParseError(pts_tok.line, pts_tok.column, "sweep points must be an integer");
      decl.points = static_cast<int>(pts->value);
      if (decl.points < 2)
        throw ParseError(pts_tok.line, pts_tok.column, "sweep needs at least 2 points");
      program.sweeps.push_back(std::move(decl));
    } else if (head.text == "repeat") {
      need(3, "repeat needs '<count> {'");
      no_extra(3);
      const auto count = detail::parse_value(tokens[1]);
      if (!count || count->dim != detail::Dim::plain || count->value != std::floor(count->value) ||
          count->value < 1)
        throw ParseError(tokens[1].line, tokens[1].column,
                         "repeat count must be a positive integer");
      if (tokens[2].text != "{")
        throw ParseError(tokens[2].line, tokens[2].column, "expected '{' after the repeat count");
      RepeatBlock block;
      block.count = static_cast<int>(count->value);
      block.line = head.line;
      block.column = head.column;
      sink().push_back({std::move(block)});
      stack.push_back(&std::get<RepeatBlock>(sink().back().node));
    } else if (head.text == "}") {
      no_extra(1);
      if (stack.empty())
        throw ParseError(head.line, head.column, "'}' without a matching repeat block");
      stack.pop_back();
    } else {
      throw ParseError(head.line, head.column, "unknown statement '" + head.text + "'");
    }
  }
  if (!stack.empty())
    throw ParseError(stack.back()->line, stack.back()->column, "unclosed repeat block");

  // Cross-checks: every $var must be declared, every declared var used.
  std::vector<std::pair<std::string, const Statement*>> refs;
  detail::collect_vars(program.items, refs);
  for (const auto& [name, stmt] : refs) {
    bool found = false;
    for (const auto& decl : program.sweeps) found = found || decl.variable == name;
    if (!found)
      throw ParseError(stmt->line, stmt->column, "undefined sweep variable '$" + name + "'");
  }
  for (const auto& decl : program.sweeps) {
    bool used = false;
    for (const auto& [name, stmt] : refs) used = used || name == decl.variable;
    if (!used)
      throw ParseError(decl.line, decl.column,
                       "sweep variable '" + decl.variable + "' is never referenced");
  }
  return program;
}

namespace detail {

inline std::string format_full(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

inline std::string print_scalar(const ScalarExpr& e, const char* unit) {
  if (e.is_var()) return "$" + e.var;
  return format_full(e.value) + unit;
}

inline void print_items(const std::vector<SequenceItem>& items, int depth, std::string& out) {
  const std::string ind(2 * static_cast<std::size_t>(depth), ' ');
  for (const auto& item : items) {
    if (const auto* stmt = std::get_if<Statement>(&item.node)) {
      out += ind;
      switch (stmt->kind) {
        case StatementKind::laser: out += "laser " + print_scalar(stmt->duration, "s"); break;
        case StatementKind::wait: out += "wait " + print_scalar(stmt->duration, "s"); break;
        case StatementKind::readout: out += "readout " + print_scalar(stmt->duration, "s"); break;
        case StatementKind::mw:
          out += "mw ";
          if (stmt->role == PulseRole::pi) out += "pi";
          else if (stmt->role == PulseRole::half_pi) out += "pi/2";
          else out += print_scalar(stmt->duration, "s");
          out += " @ " + print_scalar(stmt->frequency, "Hz");
          if (stmt->has_amplitude) out += " amp " + print_scalar(stmt->amplitude, "Hz");
          if (stmt->has_phase) out += " phase " + print_scalar(stmt->phase, "");
          break;
      }
      out += "\n";
    } else {
      const auto& block = std::get<RepeatBlock>(item.node);
      out += ind + "repeat " + std::to_string(block.count) + " {\n";
      print_items(block.body, depth + 1, out);
      out += ind + "}\n";
    }
  }
}

} // namespace detail

/// Canonical text form; parsing it back yields a structurally equal program.
inline std::string pretty_print(const SequenceProgram& program) {
  std::string out;
  for (const auto& s : program.sweeps)
    out += "sweep " + s.variable + " " + detail::format_full(s.start) + ":" +
           detail::format_full(s.stop) + ":" + std::to_string(s.points) + "\n";
  detail::print_items(program.items, 0, out);
  return out;
}

struct TimelineEvent {
  long long start_ns = 0;
  long long end_ns = 0;
  StatementKind channel = StatementKind::wait;
  double frequency_hz = 0.0;  // mw only
  double rabi_hz = 0.0;       // mw only
  double phase_rad = 0.0;     // mw only
  PulseRole role = PulseRole::none;
  double duration() const { return (end_ns - start_ns) * 1e-9; }
  double start() const { return start_ns * 1e-9; }
};

/// Record of a duration that was rounded onto the 1 ns grid (at most 0.5 ns).
struct SnapNote {
  std::size_t event_index = 0;
  double requested_ns = 0.0;
  long long snapped_ns = 0;
};

struct Timeline {
  std::vector<TimelineEvent> events;
  long long total_ns = 0;
  std::vector<SnapNote> snaps;
  double total_duration() const { return total_ns * 1e-9; }
};

struct CompileOptions {
  double default_rabi_hz = 1e6;  // used by pi / pi/2 roles without an amp
  double max_total_s = 10.0;     // guard against runaway repeat blocks
};

namespace detail {

struct CompileState {
  const std::map<std::string, double>* assignment;
  const CompileOptions* opts;
  Timeline* timeline;
  long long cursor_ns = 0;
};

inline double resolve(const ScalarExpr& e, const Statement& stmt, const CompileState& st) {
  if (!e.is_var()) return e.value;
  const auto it = st.assignment->find(e.var);
  if (it == st.assignment->end())
    throw CompileError(stmt.line, stmt.column, "unassigned sweep variable '$" + e.var + "'");
  return it->second;
}

inline void emit_items(const std::vector<SequenceItem>& items, CompileState& st) {
  for (const auto& item : items) {
    if (const auto* stmt = std::get_if<Statement>(&item.node)) {
      TimelineEvent ev;
      ev.channel = stmt->kind;
      ev.role = stmt->role;
      double dur_s = 0.0;
      if (stmt->kind == StatementKind::mw) {
        ev.frequency_hz = resolve(stmt->frequency, *stmt, st);
        ev.rabi_hz = stmt->has_amplitude ? resolve(stmt->amplitude, *stmt, st)
                                         : st.opts->default_rabi_hz;
        ev.phase_rad = stmt->has_phase ? resolve(stmt->phase, *stmt, st) : 0.0;
        if (ev.frequency_hz <= 0.0)
          throw CompileError(stmt->line, stmt->column, "microwave frequency must be positive");
        if (stmt->role != PulseRole::none) {
          if (ev.rabi_hz <= 0.0)
            throw CompileError(stmt->line, stmt->column,
                               "pi/pi-2 roles need a positive Rabi amplitude");
          dur_s = stmt->role == PulseRole::pi ? 0.5 / ev.rabi_hz : 0.25 / ev.rabi_hz;
        } else {
          dur_s = resolve(stmt->duration, *stmt, st);
        }
      } else {
        dur_s = resolve(stmt->duration, *stmt, st);
      }
      if (dur_s < 0.0)
        throw CompileError(stmt->line, stmt->column, "negative duration after substitution");
      const double requested_ns = dur_s * 1e9;
      const long long dur_ns = std::llround(requested_ns);
      // Report grid snapping, but not femtosecond-level decimal-to-binary
      // conversion fuzz.
      if (std::abs(requested_ns - static_cast<double>(dur_ns)) > 1e-6)
        st.timeline->snaps.push_back({st.timeline->events.size(), requested_ns, dur_ns});
      ev.start_ns = st.cursor_ns;
      ev.end_ns = st.cursor_ns + dur_ns;
      st.cursor_ns = ev.end_ns;
      if (st.cursor_ns * 1e-9 > st.opts->max_total_s)
        throw CompileError(stmt->line, stmt->column, "sequence exceeds the maximum duration");
      st.timeline->events.push_back(ev);
    } else {
      const auto& block = std::get<RepeatBlock>(item.node);
      for (int r = 0; r < block.count; ++r) emit_items(block.body, st);
    }
  }
}

} // namespace detail

/// Lay the program out sequentially from t = 0 on the 1 ns grid, resolving
/// sweep variables from `assignment` and pi / pi-2 roles via the Rabi
/// amplitude. Snapped durations are reported in Timeline::snaps.
inline Timeline compile(const SequenceProgram& program,
                        const std::map<std::string, double>& assignment = {},
                        const CompileOptions& opts = {}) {
  Timeline timeline;
  detail::CompileState st{&assignment, &opts, &timeline, 0};
  detail::emit_items(program.items, st);
  timeline.total_ns = st.cursor_ns;

  // Sequential layout cannot overlap, but the invariant is checked anyway so
  // future parallel channels inherit it.
  std::map<StatementKind, long long> last_end;
  for (const auto& ev : timeline.events) {
    if (ev.start_ns < 0 || ev.end_ns < ev.start_ns)
      throw CompileError(0, 0, "internal: malformed event times");
    auto [it, inserted] = last_end.try_emplace(ev.channel, ev.end_ns);
    if (!inserted) {
      if (ev.start_ns < it->second)
        throw CompileError(0, 0, "events overlap on one channel");
      it->second = ev.end_ns;
    }
  }
  return timeline;
}

inline const char* to_string(StatementKind k) {
  switch (k) {
    case StatementKind::laser: return "laser";
    case StatementKind::mw: return "mw";
    case StatementKind::wait: return "wait";
    case StatementKind::readout: return "readout";
  }
  return "?";
}

inline const char* to_string(PulseRole r) {
  switch (r) {
    case PulseRole::none: return "none";
    case PulseRole::pi: return "pi";
    case PulseRole::half_pi: return "pi/2";
  }
  return "?";
}

/// Timeline as JSON: events with integer nanosecond start/end.
inline nlohmann::json timeline_to_json(const Timeline& timeline) {
  nlohmann::json events = nlohmann::json::array();
  for (const auto& ev : timeline.events) {
    nlohmann::json e{{"start_ns", ev.start_ns},
                     {"end_ns", ev.end_ns},
                     {"channel", to_string(ev.channel)}};
    if (ev.channel == StatementKind::mw) {
      e["frequency_hz"] = ev.frequency_hz;
      e["rabi_hz"] = ev.rabi_hz;
      e["phase_rad"] = ev.phase_rad;
      e["role"] = to_string(ev.role);
    }
    events.push_back(std::move(e));
  }
  return {{"schema_version", 1}, {"total_ns", timeline.total_ns}, {"events", std::move(events)}};
}

/// Square-root-of-power mapping from synthesizer output power to Rabi
/// frequency, anchored at one calibration point.
struct PowerCalibration {
  double rabi_at_ref_hz = 1e6;
  double ref_dbm = 0.0;
  double rabi_from_dbm(double dbm) const {
    return rabi_at_ref_hz * std::pow(10.0, (dbm - ref_dbm) / 20.0);
  }
};

} // namespace nvsim
