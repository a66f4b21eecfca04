#include "nvsim/error.hpp"
#include "nvsim/pulsec.hpp"
#include "nvsim/units.hpp"

#include <cctype>
#include <cmath>
#include <cstdio>
#include <map>
#include <sstream>

namespace nvsim {

using namespace units;

namespace {

struct Token {
  std::string text;
  int column = 0;  // 1-based
};

std::vector<Token> tokenize(const std::string& line) {
  std::vector<Token> out;
  std::size_t i = 0;
  while (i < line.size()) {
    if (line[i] == '#') break;
    if (std::isspace(static_cast<unsigned char>(line[i]))) {
      ++i;
      continue;
    }
    const std::size_t start = i;
    while (i < line.size() && !std::isspace(static_cast<unsigned char>(line[i])) && line[i] != '#') ++i;
    out.push_back({line.substr(start, i - start), static_cast<int>(start) + 1});
  }
  return out;
}

[[noreturn]] void fail(int line, int col, const std::string& msg) { throw ParseError(msg, line, col); }

// Leading decimal number; returns the unparsed suffix.
bool split_number(const std::string& s, double& value, std::string& rest) {
  std::size_t pos = 0;
  try {
    value = std::stod(s, &pos);
  } catch (const std::exception&) {
    return false;
  }
  if (!std::isfinite(value)) return false;
  rest = s.substr(pos);
  return true;
}

double parse_with_unit(const Token& tok, const std::string& text, int line,
                       const std::map<std::string, double>& units, const std::string& what) {
  double v = 0.0;
  std::string unit;
  if (!split_number(text, v, unit)) fail(line, tok.column, "expected a number for " + what);
  const auto it = units.find(unit);
  if (it == units.end()) {
    fail(line, tok.column, unit.empty() ? what + " needs a unit" : "unknown unit '" + unit + "' for " + what);
  }
  return v * it->second;
}

const std::map<std::string, double> kTimeUnits{
    {"s", 1.0}, {"ms", 1e-3}, {"us", 1e-6}, {"ns", 1e-9}, {"ps", 1e-12}};
const std::map<std::string, double> kFreqUnits{
    {"Hz", 1e-6}, {"kHz", 1e-3}, {"MHz", 1.0}, {"GHz", 1e3}};

// Angles and phases: "1.2", "pi", "pi/2", "3pi/2", "0.5pi".
double parse_angle(const Token& tok, const std::string& text, int line, const std::string& what) {
  std::string s = text;
  double factor = 1.0;
  double v = 0.0;
  std::string rest;
  const auto pi_at = s.find("pi");
  if (pi_at == std::string::npos) {
    if (!split_number(s, v, rest) || !rest.empty()) fail(line, tok.column, "malformed " + what);
    return v;
  }
  if (pi_at > 0) {
    if (!split_number(s.substr(0, pi_at), factor, rest) || !rest.empty())
      fail(line, tok.column, "malformed " + what);
  }
  rest = s.substr(pi_at + 2);
  double divisor = 1.0;
  if (!rest.empty()) {
    std::string tail;
    if (rest[0] != '/' || !split_number(rest.substr(1), divisor, tail) || !tail.empty() || divisor == 0.0)
      fail(line, tok.column, "malformed " + what);
  }
  return factor * M_PI / divisor;
}

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

PulseEvent parse_pulse(const std::vector<Token>& toks, int line) {
  PulseEvent ev;
  if (toks.size() < 2) fail(line, toks[0].column, "pulse needs a channel (mw or rf)");
  if (toks[1].text == "mw") {
    ev.kind = EventKind::MwPulse;
  } else if (toks[1].text == "rf") {
    ev.kind = EventKind::RfPulse;
  } else {
    fail(line, toks[1].column, "unknown pulse channel '" + toks[1].text + "'");
  }
  ev.line = line;
  std::optional<double> rabi, dur, angle;
  int rabi_col = 0, dur_col = 0;
  std::map<std::string, bool> seen;
  for (std::size_t k = 2; k < toks.size(); ++k) {
    const Token& t = toks[k];
    const auto eq = t.text.find('=');
    if (eq == std::string::npos || eq == 0) fail(line, t.column, "expected key=value, got '" + t.text + "'");
    const std::string key = t.text.substr(0, eq);
    const std::string val = t.text.substr(eq + 1);
    if (seen[key]) fail(line, t.column, "duplicate key '" + key + "'");
    seen[key] = true;
    if (val.empty()) fail(line, t.column, "missing value for '" + key + "'");
    if (key == "f") {
      const double f = parse_with_unit(t, val, line, kFreqUnits, "frequency");
      if (!(f > 0.0)) fail(line, t.column, "frequency must be > 0");
      ev.frequency_mhz = f;
    } else if (key == "rabi") {
      rabi = parse_with_unit(t, val, line, kFreqUnits, "rabi");
      rabi_col = t.column;
      if (*rabi < 0.0) fail(line, t.column, "rabi must be ≥ 0");
    } else if (key == "phase") {
      ev.phase = parse_angle(t, val, line, "phase");
      if (ev.phase < 0.0 || ev.phase >= 2.0 * M_PI) fail(line, t.column, "phase must lie in [0, 2pi)");
    } else if (key == "dur") {
      dur = parse_with_unit(t, val, line, kTimeUnits, "duration");
      dur_col = t.column;
      if (!(*dur > 0.0)) fail(line, t.column, "duration must be > 0");
    } else if (key == "angle") {
      angle = parse_angle(t, val, line, "angle");
      if (!(*angle > 0.0)) fail(line, t.column, "angle must be > 0");
    } else if (key == "on") {
      const auto dash = val.find('-');
      int a = 0, b = 0;
      try {
        if (dash == std::string::npos) throw std::invalid_argument("");
        std::size_t pa = 0, pb = 0;
        a = std::stoi(val.substr(0, dash), &pa);
        b = std::stoi(val.substr(dash + 1), &pb);
        if (pa != dash || pb != val.size() - dash - 1) throw std::invalid_argument("");
      } catch (const std::exception&) {
        fail(line, t.column, "transition must look like on=i-j");
      }
      if (a < 1 || b < 1) fail(line, t.column, "level labels start at 1");
      if (a == b) fail(line, t.column, "transition needs two distinct levels");
      ev.target = std::make_pair(a - 1, b - 1);
    } else {
      fail(line, t.column, "unknown key '" + key + "'");
    }
  }
  if (angle) {
    if (rabi && dur) fail(line, dur_col, "angle= and rabi=+dur= are mutually exclusive");
    if (!rabi && !dur) fail(line, toks[0].column, "angle= needs rabi= or dur=");
    if (rabi) {
      if (!(*rabi > 0.0)) fail(line, rabi_col, "rabi must be > 0 with angle=");
      ev.rabi_mhz = *rabi;
      ev.duration_s = *angle / (kTwoPi * *rabi * 1e6);
    } else {
      ev.duration_s = *dur;
      ev.rabi_mhz = *angle / (kTwoPi * *dur) * 1e-6;
    }
    ev.angle = angle;
  } else {
    if (!rabi) fail(line, toks[0].column, "pulse needs rabi=");
    if (!dur) fail(line, toks[0].column, "pulse needs dur=");
    ev.rabi_mhz = *rabi;
    ev.duration_s = *dur;
  }
  if (!ev.frequency_mhz && !ev.target) fail(line, toks[0].column, "pulse needs f= or on=");
  return ev;
}

PulseEvent parse_laser(const std::vector<Token>& toks, int line, EventKind kind) {
  if (toks.size() < 2 || toks[1].text != "laser")
    fail(line, toks.size() < 2 ? toks[0].column : toks[1].column, "expected 'laser'");
  PulseEvent ev;
  ev.kind = kind;
  ev.line = line;
  bool have_dur = false;
  for (std::size_t k = 2; k < toks.size(); ++k) {
    const Token& t = toks[k];
    if (t.text.rfind("dur=", 0) != 0) fail(line, t.column, "expected dur=, got '" + t.text + "'");
    if (have_dur) fail(line, t.column, "duplicate key 'dur'");
    ev.duration_s = parse_with_unit(t, t.text.substr(4), line, kTimeUnits, "duration");
    if (!(ev.duration_s > 0.0)) fail(line, t.column, "duration must be > 0");
    have_dur = true;
  }
  if (!have_dur) fail(line, toks[0].column, "laser needs dur=");
  return ev;
}

PulseEvent parse_wait(const std::vector<Token>& toks, int line) {
  PulseEvent ev;
  ev.kind = EventKind::Delay;
  ev.line = line;
  if (toks.size() == 2) {
    ev.duration_s = parse_with_unit(toks[1], toks[1].text, line, kTimeUnits, "duration");
  } else if (toks.size() == 3) {
    ev.duration_s = parse_with_unit(toks[1], toks[1].text + toks[2].text, line, kTimeUnits, "duration");
  } else {
    fail(line, toks[0].column, "wait takes a duration, e.g. 'wait 100 ns'");
  }
  if (!(ev.duration_s > 0.0)) fail(line, toks[1].column, "duration must be > 0");
  return ev;
}

}  // namespace

double PulseEvent::rotation_angle() const { return kTwoPi * rabi_mhz * 1e6 * duration_s; }

void PulseSequence::validate() const {
  require(!events.empty(), "pulse sequence is empty");
  for (std::size_t k = 0; k < events.size(); ++k) {
    const auto& ev = events[k];
    require(ev.duration_s > 0.0 && std::isfinite(ev.duration_s), "event duration must be > 0");
    if (ev.kind == EventKind::LaserReadout)
      require(k + 1 == events.size(), "laser readout must be the last event");
    if (ev.is_pulse()) {
      require(ev.rabi_mhz >= 0.0, "rabi must be ≥ 0");
      require(ev.phase >= 0.0 && ev.phase < kTwoPi, "phase must lie in [0, 2pi)");
      require(ev.frequency_mhz.has_value() || ev.target.has_value(), "pulse needs a frequency or a target");
    }
  }
}

PulseSequence parse_sequence(const std::string& text, const std::string& name) {
  PulseSequence seq;
  seq.name = name;
  std::istringstream in(text);
  std::string raw;
  int line = 0;
  int readout_line = 0;
  while (std::getline(in, raw)) {
    ++line;
    const auto toks = tokenize(raw);
    if (toks.empty()) continue;
    if (readout_line) fail(line, toks[0].column, "nothing may follow the laser readout");
    const std::string& kw = toks[0].text;
    if (kw == "pulse") {
      seq.events.push_back(parse_pulse(toks, line));
    } else if (kw == "wait") {
      seq.events.push_back(parse_wait(toks, line));
    } else if (kw == "init") {
      seq.events.push_back(parse_laser(toks, line, EventKind::LaserInit));
    } else if (kw == "readout") {
      seq.events.push_back(parse_laser(toks, line, EventKind::LaserReadout));
      readout_line = line;
    } else {
      fail(line, toks[0].column, "unknown statement '" + kw + "'");
    }
  }
  if (seq.events.empty()) fail(std::max(line, 1), 1, "pulse program is empty");
  return seq;
}

std::string print_sequence(const PulseSequence& seq) {
  std::ostringstream os;
  if (!seq.name.empty()) os << "# " << seq.name << "\n";
  for (const auto& ev : seq.events) {
    switch (ev.kind) {
      case EventKind::MwPulse:
      case EventKind::RfPulse:
        os << "pulse " << (ev.kind == EventKind::MwPulse ? "mw" : "rf");
        if (ev.target) os << " on=" << ev.target->first + 1 << "-" << ev.target->second + 1;
        if (ev.frequency_mhz) os << " f=" << fmt(*ev.frequency_mhz) << "MHz";
        if (ev.angle) {
          os << " angle=" << fmt(*ev.angle) << " dur=" << fmt(ev.duration_s) << "s";
        } else {
          os << " rabi=" << fmt(ev.rabi_mhz) << "MHz dur=" << fmt(ev.duration_s) << "s";
        }
        os << " phase=" << fmt(ev.phase) << "\n";
        break;
      case EventKind::Delay:
        os << "wait " << fmt(ev.duration_s) << " s\n";
        break;
      case EventKind::LaserInit:
        os << "init laser dur=" << fmt(ev.duration_s) << "s\n";
        break;
      case EventKind::LaserReadout:
        os << "readout laser dur=" << fmt(ev.duration_s) << "s\n";
        break;
    }
  }
  return os.str();
}

PulseEvent make_pulse(EventKind kind, int level_a, int level_b, double angle, double phase,
                      double rabi_mhz) {
  require(kind == EventKind::MwPulse || kind == EventKind::RfPulse, "make_pulse: not a pulse kind");
  require(angle > 0.0 && rabi_mhz > 0.0, "make_pulse: angle and rabi must be > 0");
  require(level_a >= 0 && level_b >= 0 && level_a != level_b, "make_pulse: bad levels");
  PulseEvent ev;
  ev.kind = kind;
  ev.target = std::make_pair(level_a, level_b);
  ev.angle = angle;
  ev.rabi_mhz = rabi_mhz;
  ev.duration_s = angle / (kTwoPi * rabi_mhz * 1e6);
  ev.phase = std::fmod(std::fmod(phase, kTwoPi) + kTwoPi, kTwoPi);
  return ev;
}

PulseEvent make_delay(double seconds) {
  require(seconds > 0.0, "delay must be > 0");
  PulseEvent ev;
  ev.kind = EventKind::Delay;
  ev.duration_s = seconds;
  return ev;
}

PulseSequence invert_sequence(const PulseSequence& seq) {
  PulseSequence out;
  out.name = seq.name.empty() ? "" : seq.name + "-inverse";
  for (auto it = seq.events.rbegin(); it != seq.events.rend(); ++it) {
    require(it->kind != EventKind::LaserInit && it->kind != EventKind::LaserReadout,
            "laser events are not invertible");
    require(it->kind != EventKind::Delay, "delays are not invertible");
    PulseEvent ev = *it;
    ev.phase = std::fmod(ev.phase + M_PI, kTwoPi);
    out.events.push_back(ev);
  }
  return out;
}

}  // namespace nvsim
