#pragma once

// Umbrella header: the whole library.

#include "activation.hpp"   // IWYU pragma: export
#include "closed_form.hpp"  // IWYU pragma: export
#include "data.hpp"         // IWYU pragma: export
#include "errors.hpp"       // IWYU pragma: export
#include "interpretation.hpp" // IWYU pragma: export
#include "lp.hpp"           // IWYU pragma: export
#include "matrix.hpp"       // IWYU pragma: export
#include "network.hpp"      // IWYU pragma: export
#include "parallel.hpp"     // IWYU pragma: export
#include "polytope.hpp"     // IWYU pragma: export
#include "reports.hpp"      // IWYU pragma: export
#include "rng.hpp"          // IWYU pragma: export
#include "train.hpp"        // IWYU pragma: export
