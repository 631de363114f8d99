#pragma once

#include "irlobs/errors.hpp"
#include "irlobs/estimator.hpp"
#include "irlobs/experiment.hpp"
#include "irlobs/irl.hpp"
#include "irlobs/monomials.hpp"
#include "irlobs/numerics.hpp"
#include "irlobs/plant.hpp"
#include "irlobs/purge.hpp"
