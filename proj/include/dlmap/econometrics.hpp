#pragma once

#include "dlmap/econometrics/design.hpp"
#include "dlmap/econometrics/inference.hpp"
#include "dlmap/econometrics/matching.hpp"
#include "dlmap/econometrics/models.hpp"
#include "dlmap/econometrics/newton.hpp"
#include "dlmap/econometrics/variables.hpp"
