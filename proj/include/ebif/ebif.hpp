#pragma once

#include "ebif/control.hpp"
#include "ebif/engine.hpp"
#include "ebif/error.hpp"
#include "ebif/expr.hpp"
#include "ebif/function_space.hpp"
#include "ebif/io.hpp"
#include "ebif/linalg.hpp"
#include "ebif/parser.hpp"
#include "ebif/random.hpp"
#include "ebif/rational.hpp"
#include "ebif/reachability.hpp"
#include "ebif/simulate.hpp"
#include "ebif/system.hpp"
