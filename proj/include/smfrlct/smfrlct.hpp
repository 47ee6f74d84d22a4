#pragma once

#include "smfrlct/bounds.hpp"
#include "smfrlct/dataset.hpp"
#include "smfrlct/estimator.hpp"
#include "smfrlct/free_energy.hpp"
#include "smfrlct/gen_error.hpp"
#include "smfrlct/gibbs.hpp"
#include "smfrlct/io.hpp"
#include "smfrlct/kernels.hpp"
#include "smfrlct/parallel.hpp"
#include "smfrlct/posterior.hpp"
#include "smfrlct/random.hpp"
#include "smfrlct/smf_posterior.hpp"
#include "smfrlct/stochastic_matrix.hpp"
