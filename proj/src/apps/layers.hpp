#pragma once

#include <vector>

namespace apps {

using Seconds = double;

/// Cumulative layer rates in bytes/second, lowest first.
struct LayerConfig {
  std::vector<double> rates{16000.0, 32000.0, 64000.0, 128000.0};
  /// Multiplier applied to the measured rate before choosing a layer.
  double safety = 0.9;
};

/// Throws std::invalid_argument unless rates are non-empty, positive and
/// strictly increasing and 0 < safety <= 1.
void validate(const LayerConfig& config);

/// Highest layer whose cumulative rate fits in rate * safety; layer 0 when
/// nothing fits.
int select_layer(double rate, const LayerConfig& config);

}  // namespace apps
