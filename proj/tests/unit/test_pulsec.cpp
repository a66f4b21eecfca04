#include "doctest.h"

#include "nvsim/error.hpp"
#include "nvsim/pulsec.hpp"

#include <algorithm>
#include <cmath>

using namespace nvsim;

namespace {

ParseError parse_error(const std::string& src) {
  try {
    parse_sequence(src);
  } catch (const ParseError& e) {
    return e;
  }
  FAIL("expected a parse error for: " << src);
  return ParseError("", 0, 0);
}

// Ground basis of an NV without nuclei: 0 = m_s +1, 1 = m_s 0, 2 = m_s -1.
SpinHamiltonianParams bare_nv() {
  SpinHamiltonianParams p;
  p.b0 = {0.0, 0.0, 10.0};
  return p;
}

}  // namespace

TEST_CASE("DSL statements map onto events") {
  auto s = parse_sequence("pulse mw f=2880MHz rabi=10MHz phase=0 dur=25ns\n");
  REQUIRE(s.events.size() == 1);
  CHECK(s.events[0].kind == EventKind::MwPulse);
  CHECK(*s.events[0].frequency_mhz == doctest::Approx(2880.0));
  CHECK(s.events[0].rabi_mhz == doctest::Approx(10.0));
  CHECK(s.events[0].duration_s == doctest::Approx(25e-9));

  auto w = parse_sequence("wait 1.5us");
  REQUIRE(w.events.size() == 1);
  CHECK(w.events[0].kind == EventKind::Delay);
  CHECK(w.events[0].duration_s == doctest::Approx(1500e-9));
  CHECK(parse_sequence("wait 100 ns").events[0].duration_s == doctest::Approx(100e-9));

  auto a = parse_sequence("pulse mw on=2-3 angle=pi/2 rabi=10MHz phase=3pi/2");
  CHECK(a.events[0].target == std::make_pair(1, 2));
  CHECK(a.events[0].rotation_angle() == doctest::Approx(M_PI / 2));
  CHECK(a.events[0].phase == doctest::Approx(1.5 * M_PI));
}

TEST_CASE("DSL errors carry the source position") {
  auto e = parse_error("wait 1us\npulse mw f=2880MHz rabi=-1MHz dur=10ns\n");
  CHECK(e.line() == 2);
  CHECK(e.column() == 20);
  CHECK(std::string(e.what()).find("rabi must be ≥ 0") != std::string::npos);

  CHECK(parse_error("").line() == 1);
  CHECK(parse_error("wait 0ns").message() == "duration must be > 0");
  CHECK(parse_error("pulse mw f=2880MHz rabi=1MHz").message() == "pulse needs dur=");
  CHECK(parse_error("pulse mw f=2880MHz rabi=1MHz dur=1ns phase=7").message().find("phase") != std::string::npos);
  CHECK(parse_error("pulse mw f=2880 rabi=1MHz dur=1ns").message().find("unit") != std::string::npos);
  CHECK(parse_error("readout laser dur=1us\nwait 1us").line() == 2);
  CHECK(parse_error("flip").column() == 1);
  CHECK(parse_error("pulse mw on=2-2 rabi=1MHz dur=1ns").message() == "transition needs two distinct levels");
}

TEST_CASE("print and parse round trip") {
  const std::string src =
      "init laser dur=3us\n"
      "pulse mw on=2-3 rabi=140MHz dur=3.571ns phase=pi/2\n"
      "wait 250 ns\n"
      "pulse rf f=5.1MHz angle=pi dur=2us\n"
      "readout laser dur=300ns\n";
  auto s = parse_sequence(src);
  auto t = parse_sequence(print_sequence(s));
  REQUIRE(t.events.size() == s.events.size());
  for (std::size_t k = 0; k < s.events.size(); ++k) {
    CHECK(t.events[k].kind == s.events[k].kind);
    CHECK(t.events[k].duration_s == s.events[k].duration_s);
    CHECK(t.events[k].rabi_mhz == s.events[k].rabi_mhz);
    CHECK(t.events[k].phase == s.events[k].phase);
    CHECK(t.events[k].target == s.events[k].target);
    CHECK(t.events[k].frequency_mhz == s.events[k].frequency_mhz);
  }
}

TEST_CASE("pi pulse inverts m_s 0 <-> -1") {
  auto params = bare_nv();
  auto seq = parse_sequence("pulse mw on=2-3 rabi=140MHz dur=3.571ns");
  auto res = simulate_sequence(seq, params, DensityMatrix::basis_state(3, 1));
  CHECK(res.final_state.population(2) > 0.999);
}

TEST_CASE("a sequence followed by its inverse is the identity") {
  auto params = bare_nv();
  auto seq = parse_sequence(
      "pulse mw on=2-3 angle=pi/2 rabi=20MHz phase=0\n"
      "pulse mw on=1-2 angle=0.7 rabi=20MHz phase=1.1\n"
      "pulse mw on=2-3 angle=pi rabi=20MHz phase=pi/2\n");
  auto inv = invert_sequence(seq);
  auto both = seq;
  both.events.insert(both.events.end(), inv.events.begin(), inv.events.end());
  auto res = simulate_sequence(both, params, DensityMatrix::basis_state(3, 1));
  CHECK(res.final_state.population(1) > 1.0 - 1e-12);
  CHECK_THROWS_AS(invert_sequence(parse_sequence("wait 1us")), InvalidArgument);
}

TEST_CASE("rotating and lab frames agree for a resonant pi pulse") {
  auto params = bare_nv();
  auto seq = parse_sequence("pulse mw on=2-3 rabi=20MHz dur=25ns");
  auto lab = simulate_sequence(seq, params, DensityMatrix::basis_state(3, 1), Frame::Lab);
  CHECK(lab.final_state.population(2) == doctest::Approx(1.0).epsilon(0.02));
}

TEST_CASE("Rabi nutation follows cos^2(pi Omega t)") {
  SpinHamiltonianParams p;
  auto tr = rabi_trace(p, 40.0, 200e-9, 401, 0.0);
  const auto& p0 = tr.column("p0");
  double worst = 0.0;
  for (std::size_t k = 0; k < tr.size(); ++k) {
    const double c = std::cos(M_PI * 40e6 * tr.times[k]);
    worst = std::max(worst, std::abs(p0[k] - c * c));
  }
  CHECK(worst < 1e-5);  // RK4 sampling of the closed form
  auto peaks = spectral_peaks(p0, tr.times[1] - tr.times[0], 1);
  REQUIRE(!peaks.empty());
  CHECK(peaks[0] == doctest::Approx(40.0).epsilon(0.01));
}

TEST_CASE("Rabi envelope with dephasing") {
  SpinHamiltonianParams p;
  const double rate = 1.0 / 300e-6;
  auto tr = rabi_trace(p, 40.0, 300e-6, 100001, rate);
  // Oscillation about 1/2 with envelope exp(-rate t): at t = 1/rate the swing is 1/e.
  const auto& p0 = tr.column("p0");
  const double cycles = 40e6 / rate;
  CHECK(cycles >= 1e4);
  CHECK(std::abs(p0.back() - 0.5) <= 0.5 * std::exp(-1.0) + 1e-9);
}

TEST_CASE("Hahn echo") {
  SpinHamiltonianParams bare;
  std::vector<double> taus;
  for (int k = 0; k < 8192; ++k) taus.push_back(k * 10e-9);
  auto flat = hahn_echo_trace(bare, taus);
  CHECK(flat.modulation_depth < 1e-9);

  SpinHamiltonianParams p;
  p.nuclei = {NucleusSpec::n14()};
  p.b0 = {1.0, 0.0, 1.0};
  auto echo = hahn_echo_trace(p, taus);
  CHECK(echo.modulation_depth > 0.01);
  auto sp = manifold_splittings(p);
  auto peaks = spectral_peaks(echo.trace.column("echo"), 10e-9, 6, 0.05);
  REQUIRE(!peaks.empty());
  // Every echo frequency is a nuclear splitting, a sum or a difference of them.
  std::vector<double> cand;
  for (double a : sp.ms0)
    for (double b : sp.ms_minus1) {
      cand.push_back(a);
      cand.push_back(b);
      cand.push_back(a + b);
      cand.push_back(std::abs(a - b));
    }
  for (double f : peaks) {
    double best = 1e300;
    for (double c : cand) best = std::min(best, std::abs(f - c) / c);
    CHECK(best < 0.02);
  }
}

TEST_CASE("Bell states") {
  auto sys = SpinSystem::build(bell_params());
  for (auto b : {BellState::PsiMinus, BellState::PsiPlus, BellState::PhiPlus, BellState::PhiMinus}) {
    auto seq = prepare_bell(b);
    auto res = simulate_sequence(seq, sys.params, bell_initial_state(sys));
    CHECK(bell_fidelity(bell_block(sys, res.final_state), b) > 0.999);
    CHECK(bell_state_from_string(to_string(b)) == b);
  }
  // Prepare then undo.
  auto seq = prepare_bell(BellState::PsiMinus);
  auto inv = invert_sequence(seq);
  seq.events.insert(seq.events.end(), inv.events.begin(), inv.events.end());
  auto res = simulate_sequence(seq, sys.params, bell_initial_state(sys));
  CHECK(std::norm(bell_block(sys, res.final_state)(2, 2)) > 0.999);
  CHECK_THROWS_AS(bell_state_from_string("phi-zero"), InvalidArgument);
}

TEST_CASE("tomography of the Psi- state") {
  auto t = tomography_reconstruct(prepare_bell(BellState::PsiMinus), bell_params());
  CHECK_FALSE(t.flagged);
  CHECK(t.rho(1, 1).real() == doctest::Approx(0.5).epsilon(1e-6));
  CHECK(t.rho(2, 2).real() == doctest::Approx(0.5).epsilon(1e-6));
  CHECK(t.rho(1, 2).real() == doctest::Approx(-0.5).epsilon(1e-6));
  CHECK(std::abs(t.rho(0, 3)) < 1e-6);
  CHECK(t.hermiticity_error < 1e-9);
}
