#pragma once

#include "qstream/errors.hpp"
#include "qstream/root_finding.hpp"
#include "qstream/core.hpp"
#include "qstream/policies.hpp"
#include "qstream/random.hpp"
#include "qstream/estimate.hpp"
#include "qstream/mc_poisson.hpp"
#include "qstream/poisson_hjb.hpp"
#include "qstream/fluid.hpp"
#include "qstream/mc_fluid.hpp"
#include "qstream/rlnc.hpp"
#include "qstream/config.hpp"
