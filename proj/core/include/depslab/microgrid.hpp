// Solar off-grid microgrid with a battery and a diesel genset, one step per
// hour. State (SoC, h, P^G, mean load, expected PV), action (battery power
// request, genset power request), design psi = (C^B, C^PV, C^G).
#pragma once

#include <array>
#include <string>
#include <vector>

#include "depslab/environment.hpp"

namespace depslab::env {

struct HourlyProfile {
  struct Row {
    double load_mean;
    double load_std;
    double pv_cf;  // capacity factor of the PV array
  };
  std::vector<Row> rows;  // exactly 24

  static HourlyProfile builtin();
  // CSV with header `hour,load_mean,load_std,pv_cf` and 24 rows, hours 0..23.
  static HourlyProfile load_csv(const std::string& path);
};

struct MicrogridConstants {
  double eta_charge = 1.0;
  double eta_discharge = 1.0;
  double eta_genset = 1.0;
  double pv_c1 = 200.0;
  double pv_c2 = 100.0;
  double battery_c1 = 100.0;
  double battery_c2 = 20.0;
  double genset_c1 = 1000.0;
  double genset_c2 = 10000.0;
  double rate = 0.1;
  int years = 20;
  double price_shed = 25.0;
  double price_curtail = 25.0;
  double price_fuel = 4.0;
  double price_ramp_up = 0.5;
  double price_ramp_down = 0.0;
  int horizon = 120;
  double hours_per_year = 8760.0;
  double reward_offset = 5000.0;
  double reward_divisor = 5000.0;
  double gradient_cap = 1e11;
};

double annuity_factor(double rate, int years);

class Microgrid final : public Environment {
 public:
  explicit Microgrid(HourlyProfile profile = HourlyProfile::builtin(),
                     MicrogridConstants constants = {});

  const Descriptor& descriptor() const override { return descriptor_; }
  const MicrogridConstants& constants() const { return constants_; }
  const HourlyProfile& profile() const { return profile_; }

  Matrix sample_initial_noise(std::size_t batch, Rng& rng) const override;
  State initial_state(ad::Tape& tape, Design design, const Matrix& noise) const override;
  Matrix sample_disturbance(const State& state, const Matrix& action, Rng& rng) const override;
  ad::Var disturbance_log_density(ad::Tape& tape, const State& state, const Matrix& action,
                                  const Matrix& xi) const override;
  State transition(ad::Tape& tape, const State& state, const Matrix& action, const Matrix& xi,
                   Design design) const override;
  ad::Var reward(ad::Tape& tape, const State& state, const Matrix& action, const Matrix& xi,
                 Design design) const override;

  // Hourly share of the annualized investment cost.
  ad::Var fixed_cost(Design design) const;

 private:
  struct Dispatch {
    ad::Var battery_request;  // clipped into [-C^B, C^B]
    ad::Var genset;           // clipped into [0, C^G]
    ad::Var battery;          // power actually exchanged
  };
  Dispatch dispatch(ad::Tape& tape, const State& state, const Matrix& action,
                    Design design) const;
  std::vector<std::size_t> hours(const State& state, std::size_t batch) const;

  HourlyProfile profile_;
  MicrogridConstants constants_;
  Descriptor descriptor_;
};

}  // namespace depslab::env
