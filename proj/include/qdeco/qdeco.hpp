#pragma once

#include "qdeco/catalog.hpp"
#include "qdeco/constants.hpp"
#include "qdeco/dfstructure.hpp"
#include "qdeco/dynamics.hpp"
#include "qdeco/functionals.hpp"
#include "qdeco/lindblad.hpp"
#include "qdeco/matops.hpp"
#include "qdeco/model_io.hpp"
#include "qdeco/numeric.hpp"
