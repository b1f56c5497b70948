#pragma once

#include "psd/budget.hpp"
#include "psd/build.hpp"
#include "psd/cell_grid.hpp"
#include "psd/error.hpp"
#include "psd/geometry.hpp"
#include "psd/harness.hpp"
#include "psd/hilbert.hpp"
#include "psd/median.hpp"
#include "psd/noise.hpp"
#include "psd/postprocess.hpp"
#include "psd/query.hpp"
#include "psd/serialize.hpp"
#include "psd/tree.hpp"
