#pragma once

#include <algorithm>
#include <cmath>
#include <memory>
#include <string>
#include <vector>

#include "env.hpp"
#include "random.hpp"

namespace sliceran {

/// Magnitudes of the effects the offline lookup table leaves out.
struct NoiseConfig {
  double fading_std_db = 2.0;          // log-normal gain on realized throughput
  double measurement_noise_std = 0.02; // additive on normalized pathloss observations
  double contention_loss_frac = 0.05;  // capacity loss when all slices are saturated
  bool operator==(const NoiseConfig&) const = default;
};

inline std::vector<std::string> validate(const NoiseConfig& n) {
  std::vector<std::string> out;
  if (!(n.fading_std_db >= 0)) out.emplace_back("noise.fading_std_db: must be nonnegative");
  if (!(n.measurement_noise_std >= 0)) out.emplace_back("noise.measurement_noise_std: must be nonnegative");
  if (!(n.contention_loss_frac >= 0)) out.emplace_back("noise.contention_loss_frac: must be nonnegative");
  if (n.contention_loss_frac > 1) out.emplace_back("noise.contention_loss_frac: must not exceed 1");
  return out;
}

inline json to_json(const NoiseConfig& n) {
  return json{{"fading_std_db", n.fading_std_db},
              {"measurement_noise_std", n.measurement_noise_std},
              {"contention_loss_frac", n.contention_loss_frac}};
}

inline NoiseConfig noise_from_json(const json& obj) {
  detail::require_object(obj, "noise");
  detail::reject_unknown(obj, {"fading_std_db", "measurement_noise_std", "contention_loss_frac"}, "noise");
  NoiseConfig n;
  detail::read_field(obj, "fading_std_db", n.fading_std_db, "noise");
  detail::read_field(obj, "measurement_noise_std", n.measurement_noise_std, "noise");
  detail::read_field(obj, "contention_loss_frac", n.contention_loss_frac, "noise");
  return n;
}

/// Draws from its own stream so that the base environment's stream is
/// untouched; at zero magnitudes every hook is the identity.
class StochasticPerturbation final : public EnvPerturbation {
 public:
  explicit StochasticPerturbation(const NoiseConfig& noise) : noise_(noise), rng_(0) {}

  void reseed(std::uint64_t seed) override { rng_ = RandomSource(seed); }

  double link_gain() override {
    if (noise_.fading_std_db == 0) return 1.0;
    return std::pow(10.0, rng_.gaussian(0.0, noise_.fading_std_db) / 10.0);
  }

  double contention_scale() const override { return 1.0 - noise_.contention_loss_frac; }

  double observe_pathloss(double normalized) override {
    if (noise_.measurement_noise_std == 0) return normalized;
    return std::clamp(normalized + rng_.gaussian(0.0, noise_.measurement_noise_std), 0.0, 1.0);
  }

  const NoiseConfig& noise() const { return noise_; }

 private:
  NoiseConfig noise_;
  RandomSource rng_;
};

/// Same step/reset contract as `base`, with evaluation-time stochasticity.
inline SlicingEnv wrap_env(SlicingEnv base, const NoiseConfig& noise) {
  detail::throw_if_invalid(validate(noise));
  base.set_perturbation(std::make_unique<StochasticPerturbation>(noise));
  return base;
}

}  // namespace sliceran
