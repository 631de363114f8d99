#pragma once

#include "irlobs/experiment/config.hpp"
#include "irlobs/experiment/report.hpp"
#include "irlobs/experiment/runner.hpp"
