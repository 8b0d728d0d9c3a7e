#pragma once

#include "qlm/errors.hpp"
#include "qlm/minkowski.hpp"
#include "qlm/spinor.hpp"
#include "qlm/grid.hpp"
#include "qlm/surface.hpp"
#include "qlm/embedding.hpp"
#include "qlm/foliation.hpp"
#include "qlm/flows.hpp"
#include "qlm/mass.hpp"
#include "qlm/report.hpp"
#include "qlm/pipeline.hpp"
