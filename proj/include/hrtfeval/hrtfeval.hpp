#pragma once

// Convenience header for everything except the optional SOFA adapter
// (hrtfeval/sofa.hpp, needs HDF5) and report.hpp (needs OpenSSL).

#include "hrtfeval/behavioral.hpp"
#include "hrtfeval/cluster.hpp"
#include "hrtfeval/core.hpp"
#include "hrtfeval/cue_metrics.hpp"
#include "hrtfeval/distributions.hpp"
#include "hrtfeval/error.hpp"
#include "hrtfeval/fft.hpp"
#include "hrtfeval/io.hpp"
#include "hrtfeval/numeric.hpp"
#include "hrtfeval/preprocess.hpp"
#include "hrtfeval/rng.hpp"
#include "hrtfeval/stats.hpp"
#include "hrtfeval/synth.hpp"
#include "hrtfeval/trial.hpp"
