#pragma once

#include <cstdint>

namespace fatsim {

// Scheduler-observable state of one directed link.
struct LinkState {
  double capacity = 0.0;
  double allocated = 0.0;         // sum of achieved rates of flows on the link
  double offered = 0.0;           // sum of sharing demands of flows mapped to the link
  int flow_count = 0;             // flows with a path over this link (mice included)
  int elephant_count = 0;         // of those, currently classified elephant
  double cumulative_bytes = 0.0;
  std::int64_t elephants_detected = 0;  // classifications ever made on this link

  double residual() const { return capacity - allocated; }
  double utilization() const { return allocated / capacity; }
};

}  // namespace fatsim
