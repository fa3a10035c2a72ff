#pragma once

#include "catchup/core.hpp"
#include "catchup/geometry.hpp"
#include "catchup/operators.hpp"
#include "catchup/scheme.hpp"
#include "catchup/diagnostics.hpp"
#include "catchup/models.hpp"
#include "catchup/io.hpp"
#include "catchup/experiment.hpp"
