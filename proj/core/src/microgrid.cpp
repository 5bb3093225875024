#include "depslab/microgrid.hpp"

#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace depslab::env {

namespace {

constexpr std::array<HourlyProfile::Row, 24> kBuiltinProfile = {{
    {10.4, 0.55, 0.00}, {9.7, 0.50, 0.00},  {9.3, 0.43, 0.00},  {8.9, 0.39, 0.00},
    {8.6, 0.39, 0.00},  {8.2, 0.37, 0.00},  {7.3, 0.37, 0.00},  {6.8, 0.36, 0.00},
    {6.9, 0.40, 0.00},  {7.0, 0.43, 0.04},  {7.2, 0.44, 0.08},  {7.4, 0.47, 0.12},
    {7.7, 0.42, 0.14},  {8.0, 0.40, 0.15},  {8.2, 0.42, 0.14},  {8.2, 0.47, 0.12},
    {8.1, 0.43, 0.08},  {8.8, 0.44, 0.04},  {12.6, 0.81, 0.00}, {16.0, 0.60, 0.00},
    {16.5, 0.55, 0.00}, {15.8, 0.57, 0.00}, {13.9, 0.60, 0.00}, {11.8, 0.59, 0.00},
}};

Matrix mask_of(std::span<const double> v, bool (*pred)(double)) {
  Matrix m(1, v.size());
  for (std::size_t i = 0; i < v.size(); ++i) m(0, i) = pred(v[i]) ? 1.0 : 0.0;
  return m;
}

}  // namespace

HourlyProfile HourlyProfile::builtin() {
  return HourlyProfile{{kBuiltinProfile.begin(), kBuiltinProfile.end()}};
}

HourlyProfile HourlyProfile::load_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open microgrid profile: " + path);
  std::string line;
  if (!std::getline(in, line)) throw std::runtime_error(path + ": empty profile");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != "hour,load_mean,load_std,pv_cf") {
    throw std::runtime_error(path + ": expected header hour,load_mean,load_std,pv_cf");
  }
  HourlyProfile profile;
  profile.rows.resize(24);
  std::vector<bool> seen(24, false);
  int line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::istringstream fields(line);
    std::string cell;
    std::vector<double> values;
    while (std::getline(fields, cell, ',')) {
      try {
        std::size_t used = 0;
        values.push_back(std::stod(cell, &used));
        if (used != cell.size()) throw std::invalid_argument(cell);
      } catch (const std::exception&) {
        throw std::runtime_error(path + ":" + std::to_string(line_no) + ": bad number '" +
                                 cell + "'");
      }
    }
    if (values.size() != 4) {
      throw std::runtime_error(path + ":" + std::to_string(line_no) + ": expected 4 fields");
    }
    const double hour = values[0];
    if (hour < 0 || hour > 23 || hour != std::floor(hour) || seen[static_cast<int>(hour)]) {
      throw std::runtime_error(path + ":" + std::to_string(line_no) + ": bad or repeated hour");
    }
    if (!(values[2] > 0.0)) {
      throw std::runtime_error(path + ":" + std::to_string(line_no) + ": load_std must be > 0");
    }
    const auto h = static_cast<std::size_t>(hour);
    seen[h] = true;
    profile.rows[h] = {values[1], values[2], values[3]};
  }
  for (bool s : seen) {
    if (!s) throw std::runtime_error(path + ": profile must list all 24 hours");
  }
  return profile;
}

double annuity_factor(double rate, int years) {
  const double growth = std::pow(1.0 + rate, years);
  return rate * growth / (growth - 1.0);
}

Microgrid::Microgrid(HourlyProfile profile, MicrogridConstants constants)
    : profile_(std::move(profile)), constants_(constants) {
  if (profile_.rows.size() != 24) throw std::invalid_argument("microgrid profile needs 24 rows");
  descriptor_.name = "microgrid";
  descriptor_.state_names = {"soc", "hour", "genset", "load_mean", "pv_mean"};
  descriptor_.actions.dim = 2;
  descriptor_.actions.lower = {-200.0, 0.0};
  descriptor_.actions.upper = {200.0, 16.0};
  descriptor_.disturbance_dim = 1;
  descriptor_.design_names = {"CB", "CPV", "CG"};
  descriptor_.design_space = {{20.0, 20.0, 1.6}, {200.0, 200.0, 16.0}};
  descriptor_.design_scale = {100.0, 100.0, 8.0};
  descriptor_.horizon = constants_.horizon;
  descriptor_.reward_offset = constants_.reward_offset;
  descriptor_.reward_divisor = constants_.reward_divisor;
}

std::vector<std::size_t> Microgrid::hours(const State& state, std::size_t batch) const {
  auto h = state[1].value();
  std::vector<std::size_t> out(batch);
  for (std::size_t m = 0; m < batch; ++m) {
    out[m] = static_cast<std::size_t>(h[h.size() == 1 ? 0 : m]) % 24;
  }
  return out;
}

Matrix Microgrid::sample_initial_noise(std::size_t batch, Rng&) const {
  return Matrix(0, batch);
}

State Microgrid::initial_state(ad::Tape& tape, Design design, const Matrix& noise) const {
  const std::size_t n = noise.cols;
  ad::Var zeros = tape.full(1, n, 0.0);
  return {design[0] * 0.5 + zeros, zeros, zeros, tape.full(1, n, profile_.rows[0].load_mean),
          design[1] * profile_.rows[0].pv_cf + zeros};
}

Matrix Microgrid::sample_disturbance(const State& state, const Matrix& action, Rng& rng) const {
  const auto h = hours(state, action.cols);
  Matrix xi(1, action.cols);
  for (std::size_t m = 0; m < action.cols; ++m) {
    xi(0, m) = profile_.rows[h[m]].load_std * standard_normal(rng);
  }
  return xi;
}

ad::Var Microgrid::disturbance_log_density(ad::Tape& tape, const State& state,
                                           const Matrix& action, const Matrix& xi) const {
  const auto h = hours(state, action.cols);
  Matrix sd(1, action.cols);
  for (std::size_t m = 0; m < action.cols; ++m) sd(0, m) = profile_.rows[h[m]].load_std;
  return ad::normal_log_density(tape.constant(xi), tape.constant(0.0), tape.constant(sd));
}

Microgrid::Dispatch Microgrid::dispatch(ad::Tape& tape, const State& state,
                                        const Matrix& action, Design design) const {
  const std::size_t n = action.cols;
  ad::Var request_b =
      tape.leaf(std::span<const double>(action.data.data(), n), 1, n, false);
  ad::Var request_g =
      tape.leaf(std::span<const double>(action.data.data() + n, n), 1, n, false);
  const ad::Var& cb = design[0];
  const ad::Var& cg = design[2];
  const ad::Var& soc = state[0];
  ad::Var battery_request = ad::clamp(request_b, -cb, cb);
  ad::Var genset = ad::clamp(request_g, tape.constant(0.0), cg);
  ad::Var battery = ad::clamp(battery_request, -soc, cb - soc);
  return {battery_request, genset, battery};
}

State Microgrid::transition(ad::Tape& tape, const State& state, const Matrix& action,
                            const Matrix&, Design design) const {
  const std::size_t n = action.cols;
  const Dispatch d = dispatch(tape, state, action, design);
  const auto h = hours(state, n);
  Matrix next_hour(1, n);
  Matrix next_load(1, n);
  Matrix next_cf(1, n);
  for (std::size_t m = 0; m < n; ++m) {
    const std::size_t nh = (h[m] + 1) % 24;
    next_hour(0, m) = static_cast<double>(nh);
    next_load(0, m) = profile_.rows[nh].load_mean;
    next_cf(0, m) = profile_.rows[nh].pv_cf;
  }
  ad::Var zeros = tape.full(1, n, 0.0);
  ad::Var soc = state[0] + d.battery;
  ad::Var genset = d.genset + zeros;
  ad::Var pv = design[1] * tape.constant(next_cf);
  ad::Var stacked = ad::concat_rows(
      {soc, tape.constant(next_hour), genset, tape.constant(next_load), pv});
  ad::Var capped = ad::cap_gradient_norm_cols(stacked, constants_.gradient_cap);
  State next;
  for (std::size_t r = 0; r < 5; ++r) next.push_back(ad::row(capped, r));
  return next;
}

ad::Var Microgrid::fixed_cost(Design design) const {
  const ad::Var& cb = design[0];
  const ad::Var& cpv = design[1];
  const ad::Var& cg = design[2];
  ad::Var investment = cb * constants_.battery_c1 + ad::square(cb) * constants_.battery_c2 +
                       cpv * constants_.pv_c1 + ad::square(cpv) * constants_.pv_c2 +
                       cg * constants_.genset_c1 + ad::square(cg) * constants_.genset_c2;
  return investment *
         (annuity_factor(constants_.rate, constants_.years) / constants_.hours_per_year);
}

ad::Var Microgrid::reward(ad::Tape& tape, const State& state, const Matrix& action,
                          const Matrix& xi, Design design) const {
  const Dispatch d = dispatch(tape, state, action, design);
  const auto& c = constants_;
  ad::Var load = state[3] + tape.constant(xi);
  auto battery_values = d.battery.value();
  Matrix charging = mask_of(battery_values, [](double p) { return p >= 0.0; });
  ad::Var battery_eff =
      ad::where(charging, d.battery / c.eta_charge, d.battery * c.eta_discharge);
  ad::Var residual = state[4] + d.genset - load - battery_eff;
  Matrix surplus = mask_of(residual.value(), [](double p) { return p >= 0.0; });
  ad::Var residual_cost =
      ad::where(surplus, residual * c.price_curtail, ad::abs(residual) * c.price_shed);
  ad::Var fuel_cost = d.genset * (c.price_fuel / c.eta_genset);
  ad::Var ramp = d.genset - state[2];
  Matrix ramp_up = mask_of(ramp.value(), [](double p) { return p >= 0.0; });
  ad::Var ramp_cost = ad::where(ramp_up, ad::square(ramp) * c.price_ramp_up,
                                ad::square(ramp) * c.price_ramp_down);
  ad::Var raw = -(fixed_cost(design) + residual_cost + fuel_cost + ramp_cost);
  return (raw + c.reward_offset) / c.reward_divisor;
}

}  // namespace depslab::env
