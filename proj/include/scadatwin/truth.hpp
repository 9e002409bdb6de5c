#pragma once

#include <string>
#include <vector>

namespace scadatwin {

/// Ground-truth label for a window of attacker activity (or its effect).
struct TruthEvent {
  std::string label;
  double start = 0.0;  // s
  double end = 0.0;    // s
  std::vector<std::string> subjects;
  friend bool operator==(const TruthEvent&, const TruthEvent&) = default;
};

}  // namespace scadatwin
