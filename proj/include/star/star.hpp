#pragma once

#include "star/image.hpp"
#include "star/color.hpp"
#include "star/raw.hpp"
#include "star/codec.hpp"
#include "star/filters.hpp"
#include "star/solver.hpp"
#include "star/engine.hpp"
