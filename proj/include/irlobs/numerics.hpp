#pragma once

#include "irlobs/numerics/integrate.hpp"
#include "irlobs/numerics/linalg.hpp"
#include "irlobs/numerics/riccati.hpp"
#include "irlobs/numerics/sampled_signal.hpp"
#include "irlobs/numerics/types.hpp"
