#pragma once

#include "capacity.hpp"
#include "ensembles.hpp"
#include "expander.hpp"
#include "graph.hpp"
#include "ising.hpp"
#include "limits.hpp"
#include "mcmc.hpp"
#include "offspring.hpp"
#include "parallel.hpp"
#include "random.hpp"
#include "srw.hpp"
