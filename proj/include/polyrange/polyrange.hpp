#pragma once

#include "polyrange/params.hpp"
#include "polyrange/environment.hpp"
#include "polyrange/walk.hpp"
#include "polyrange/partition.hpp"
#include "polyrange/limits.hpp"
#include "polyrange/variational.hpp"
#include "polyrange/lpp.hpp"
#include "polyrange/exper.hpp"
