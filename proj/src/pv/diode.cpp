#include "helios/pv/diode.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <sstream>

#include "helios/core/error.hpp"

namespace helios {

namespace {

constexpr double kBoltzmann = 1.380649e-23;     // J/K
constexpr double kCharge = 1.602176634e-19;     // C
constexpr double kKelvin = 273.15;
constexpr double kTrefK = kStcTemperature + kKelvin;
constexpr double kDeg = std::numbers::pi / 180.0;
constexpr double kMaxExponent = 700.0;

double safe_exp(double x) { return std::exp(std::min(x, kMaxExponent)); }

double thermal_voltage(double t_kelvin) { return kBoltzmann * t_kelvin / kCharge; }

[[noreturn]] void solver_failure(const char* what, double v, double g, double t) {
  std::ostringstream os;
  os << what << " did not converge (v=" << v << " V, g_eff=" << g << " W/m^2, t_cell=" << t << " degC)";
  fail(ErrorCode::solver, os.str());
}

}  // namespace

void PvModuleParams::validate() const {
  auto bad = [](const std::string& msg) { fail(ErrorCode::config, "module parameters: " + msg); };
  if (!(rs >= 0.0)) bad("rs must be >= 0");
  if (!(rsh > 0.0)) bad("rsh must be > 0");
  if (!(n_ideality >= 0.8 && n_ideality <= 2.5)) bad("n_ideality must lie in [0.8, 2.5]");
  if (!(isc_ref > 0.0)) bad("isc_ref must be > 0");
  if (!(voc_ref > 0.0)) bad("voc_ref must be > 0");
  if (ns_cells < 1) bad("ns_cells must be >= 1");
  if (!(eg > 0.0)) bad("eg must be > 0");
  if (!(faiman_u0 > 0.0 && faiman_u1 >= 0.0)) bad("Faiman coefficients must be positive");
}

void PvModuleParams::write(KvConfig& kv, const std::string& prefix) const {
  kv.set(prefix + "isc_ref", isc_ref);
  kv.set(prefix + "voc_ref", voc_ref);
  kv.set(prefix + "n_ideality", n_ideality);
  kv.set(prefix + "rs", rs);
  kv.set(prefix + "rsh", rsh);
  kv.set(prefix + "ns_cells", ns_cells);
  kv.set(prefix + "alpha_isc", alpha_isc);
  kv.set(prefix + "eg", eg);
  kv.set(prefix + "faiman_u0", faiman_u0);
  kv.set(prefix + "faiman_u1", faiman_u1);
  kv.set(prefix + "tilt", tilt);
  kv.set(prefix + "azimuth", azimuth);
}

void PvModuleParams::read(const KvConfig& kv, const std::string& prefix) {
  kv.read(prefix + "isc_ref", isc_ref);
  kv.read(prefix + "voc_ref", voc_ref);
  kv.read(prefix + "n_ideality", n_ideality);
  kv.read(prefix + "rs", rs);
  kv.read(prefix + "rsh", rsh);
  kv.read(prefix + "ns_cells", ns_cells);
  kv.read(prefix + "alpha_isc", alpha_isc);
  kv.read(prefix + "eg", eg);
  kv.read(prefix + "faiman_u0", faiman_u0);
  kv.read(prefix + "faiman_u1", faiman_u1);
  kv.read(prefix + "tilt", tilt);
  kv.read(prefix + "azimuth", azimuth);
  validate();
}

double effective_irradiance(const WeatherRecord& rec, const SolarPosition& pos, const PvModuleParams& params,
                            const SynthConfig& cfg) {
  const double alt = pos.altitude * kDeg;
  const double tilt = params.tilt * kDeg;
  const double cos_aoi = std::cos(alt) * std::sin(tilt) * std::cos((pos.azimuth - params.azimuth) * kDeg) +
                         std::sin(alt) * std::cos(tilt);
  const double beam = rec.dni * std::max(cos_aoi, 0.0);
  const double diffuse = rec.dhi * (1.0 + std::cos(tilt)) / 2.0;
  const double tau_pm = std::clamp(1.0 - cfg.k_pm * rec.pm10, 0.7, 1.0);
  const double tau_h = std::clamp(1.0 - cfg.k_h * std::max(0.0, rec.rel_hum - 50.0), 0.95, 1.0);
  const double g = (beam * tau_pm + diffuse) * tau_h;
  return g < 1.0 ? 0.0 : g;
}

double cell_temperature(double t_air, double g_eff, double wind, const PvModuleParams& params) {
  return t_air + g_eff / (params.faiman_u0 + params.faiman_u1 * wind);
}

DiodeState diode_state(double g_eff, double t_cell, const PvModuleParams& p) {
  const double t_k = t_cell + kKelvin;
  const double a_ref = p.n_ideality * p.ns_cells * thermal_voltage(kTrefK);
  // Saturation current that puts the STC open-circuit voltage at voc_ref.
  const double i0_ref = (p.isc_ref - p.voc_ref / p.rsh) / std::expm1(p.voc_ref / a_ref);

  DiodeState s;
  s.a = p.n_ideality * p.ns_cells * thermal_voltage(t_k);
  s.iph = std::max(0.0, (g_eff / kStcIrradiance) * (p.isc_ref + p.alpha_isc * (t_cell - kStcTemperature)));
  s.i0 = i0_ref * std::pow(t_k / kTrefK, 3.0) *
         std::exp((kCharge * p.eg / (p.n_ideality * kBoltzmann)) * (1.0 / kTrefK - 1.0 / t_k));
  s.rs = p.rs;
  s.rsh = p.rsh;
  return s;
}

double iv_current(double v, const DiodeState& s) {
  // f(I) = Iph - I0 (exp((V + I Rs)/a) - 1) - (V + I Rs)/Rsh - I, strictly decreasing in I.
  auto f = [&](double i) {
    const double vd = v + i * s.rs;
    return s.iph - s.i0 * (safe_exp(vd / s.a) - 1.0) - vd / s.rsh - i;
  };
  auto df = [&](double i) {
    const double vd = v + i * s.rs;
    return -s.i0 * safe_exp(vd / s.a) * s.rs / s.a - s.rs / s.rsh - 1.0;
  };
  if (s.iph <= 0.0 || f(0.0) <= 0.0) return 0.0;

  double lo = 0.0;
  double hi = s.iph;
  double i = s.iph;
  for (int iter = 0; iter < 100; ++iter) {
    const double fi = f(i);
    if (fi > 0.0) {
      lo = i;
    } else {
      hi = i;
    }
    double next = i - fi / df(i);
    if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);
    if (std::abs(next - i) < 1e-9) return std::max(0.0, next);
    i = next;
  }
  return std::numeric_limits<double>::quiet_NaN();
}

double iv_current(double v, double g_eff, double t_cell, const PvModuleParams& params) {
  if (v < 0.0) fail(ErrorCode::parameter, "iv_current needs v >= 0");
  const double i = iv_current(v, diode_state(g_eff, t_cell, params));
  if (std::isnan(i)) solver_failure("single-diode current", v, g_eff, t_cell);
  return i;
}

double open_circuit_voltage(double g_eff, double t_cell, const PvModuleParams& params) {
  const DiodeState s = diode_state(g_eff, t_cell, params);
  if (s.iph <= 0.0) return 0.0;
  // Iph - I0 (exp(V/a) - 1) - V/Rsh = 0 is concave and decreasing in V; Newton
  // from the ideal-diode upper bound converges monotonically from above.
  double v = s.a * std::log1p(s.iph / s.i0);
  for (int iter = 0; iter < 100; ++iter) {
    const double e = safe_exp(v / s.a);
    const double f = s.iph - s.i0 * (e - 1.0) - v / s.rsh;
    const double df = -s.i0 * e / s.a - 1.0 / s.rsh;
    const double next = std::max(0.0, v - f / df);
    if (std::abs(next - v) < 1e-12 * std::max(1.0, v)) return next;
    v = next;
  }
  solver_failure("open-circuit voltage", 0.0, g_eff, t_cell);
}

double short_circuit_current(double g_eff, double t_cell, const PvModuleParams& params) {
  return iv_current(0.0, g_eff, t_cell, params);
}

OperatingPoint solve_mpp(double g_eff, double t_cell, const PvModuleParams& params) {
  if (g_eff < 1.0) return {};
  const DiodeState s = diode_state(g_eff, t_cell, params);
  auto power = [&](double v) {
    const double i = iv_current(v, s);
    if (std::isnan(i)) solver_failure("single-diode current", v, g_eff, t_cell);
    return v * i;
  };

  constexpr double kInvPhi = 0.6180339887498949;
  double a = 0.0;
  double b = open_circuit_voltage(g_eff, t_cell, params);
  double c = b - kInvPhi * (b - a);
  double d = a + kInvPhi * (b - a);
  double pc = power(c);
  double pd = power(d);
  while (b - a > 1e-4) {
    if (pc > pd) {
      b = d;
      d = c;
      pd = pc;
      c = b - kInvPhi * (b - a);
      pc = power(c);
    } else {
      a = c;
      c = d;
      pc = pd;
      d = a + kInvPhi * (b - a);
      pd = power(d);
    }
  }
  OperatingPoint op;
  op.v = 0.5 * (a + b);
  op.i = iv_current(op.v, s);
  op.p = op.v * op.i;
  return op;
}

CalibrationResult measure_module(const PvModuleParams& params) {
  CalibrationResult r;
  r.params = params;
  const OperatingPoint stc = solve_mpp(kStcIrradiance, kStcTemperature, params);
  const OperatingPoint hot = solve_mpp(kStcIrradiance, 45.0, params);
  r.pmp_stc = stc.p;
  r.fill_factor = stc.p / (open_circuit_voltage(kStcIrradiance, kStcTemperature, params) *
                           short_circuit_current(kStcIrradiance, kStcTemperature, params));
  r.gamma_p = (hot.p - stc.p) / (20.0 * stc.p);
  return r;
}

}  // namespace helios
