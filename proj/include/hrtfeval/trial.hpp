#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "hrtfeval/core.hpp"

namespace hrtfeval {

/// One pointing response of a localisation experiment.
struct Trial {
  std::string participant;
  std::string condition;
  long trial_index = 0;
  Direction target;
  Direction response;
};

struct ResponseLog {
  std::vector<Trial> trials;
};

}  // namespace hrtfeval
