#pragma once

// Everything except report.hpp, which additionally needs nlohmann/json.

#include "matreg/csv.hpp"
#include "matreg/dataset.hpp"
#include "matreg/error.hpp"
#include "matreg/estimators.hpp"
#include "matreg/kernels.hpp"
#include "matreg/mat.hpp"
#include "matreg/parallel.hpp"
#include "matreg/prox.hpp"
#include "matreg/random.hpp"
#include "matreg/simulation.hpp"
#include "matreg/sliding.hpp"
#include "matreg/stack_io.hpp"
#include "matreg/svd.hpp"
#include "matreg/tuning.hpp"
