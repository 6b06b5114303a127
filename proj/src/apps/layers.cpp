#include "apps/layers.hpp"

#include <stdexcept>

namespace apps {

void validate(const LayerConfig& config) {
  if (config.rates.empty())
    throw std::invalid_argument("layers: need at least one layer");
  for (std::size_t i = 0; i < config.rates.size(); ++i) {
    if (!(config.rates[i] > 0.0))
      throw std::invalid_argument("layers: rates must be positive");
    if (i > 0 && !(config.rates[i] > config.rates[i - 1]))
      throw std::invalid_argument("layers: rates must be strictly increasing");
  }
  if (!(config.safety > 0.0 && config.safety <= 1.0))
    throw std::invalid_argument("layers: safety must be in (0, 1]");
}

int select_layer(double rate, const LayerConfig& config) {
  const double budget = rate * config.safety;
  int layer = 0;
  for (std::size_t i = 0; i < config.rates.size(); ++i)
    if (config.rates[i] <= budget) layer = static_cast<int>(i);
  return layer;
}

}  // namespace apps
