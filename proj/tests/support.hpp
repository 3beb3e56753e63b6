#pragma once

#include "mfqp/audit.hpp"

namespace testsupport {

using mfqp::random_flux_trajectory;
using mfqp::random_in_KM;

}  // namespace testsupport
