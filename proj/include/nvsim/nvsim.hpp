#pragma once

// Umbrella header: the full simulator and analysis toolkit.

#include "nvsim/constants.hpp"
#include "nvsim/dynamics.hpp"
#include "nvsim/execute.hpp"
#include "nvsim/fft.hpp"
#include "nvsim/fit.hpp"
#include "nvsim/hamiltonian.hpp"
#include "nvsim/io.hpp"
#include "nvsim/linalg.hpp"
#include "nvsim/optics.hpp"
#include "nvsim/peaks.hpp"
#include "nvsim/protocols.hpp"
#include "nvsim/resonator.hpp"
#include "nvsim/rng.hpp"
#include "nvsim/sequence.hpp"
#include "nvsim/sgi.hpp"
#include "nvsim/spectrum.hpp"
