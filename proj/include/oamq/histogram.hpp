#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

namespace oamq {

/// Time-resolved start-stop coincidence counts. Bin i covers delays
/// [i * bin_width, (i + 1) * bin_width) and is labeled by its lower edge.
struct CoincidenceHistogram {
  double bin_width_ns = 2.0;
  std::vector<std::int64_t> counts;
  double duration_s = 0.0;

  int n_bins() const { return static_cast<int>(counts.size()); }
  double tau_ns(int bin) const { return bin * bin_width_ns; }
  /** Bin containing delay tau, or -1 when outside the histogram. */
  int bin_of(double tau) const {
    if (!(tau >= 0.0))
      return -1;
    const int b = static_cast<int>(std::floor(tau / bin_width_ns + 1e-9));
    return b < n_bins() ? b : -1;
  }
};

} // namespace oamq
