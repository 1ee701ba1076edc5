#pragma once

// Umbrella header.

#include "nsflows/config.hpp"
#include "nsflows/core.hpp"
#include "nsflows/error.hpp"
#include "nsflows/eval.hpp"
#include "nsflows/flows.hpp"
#include "nsflows/priors.hpp"
#include "nsflows/random.hpp"
#include "nsflows/stream.hpp"
#include "nsflows/svg.hpp"
#include "nsflows/transport.hpp"
