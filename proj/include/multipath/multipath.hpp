#pragma once

#include "common.hpp"
#include "hmm.hpp"
#include "hmm_sampler.hpp"
#include "io.hpp"
#include "lda.hpp"
#include "lda_sampler.hpp"
#include "metrics.hpp"
#include "parallel.hpp"
#include "prob.hpp"
#include "rng.hpp"
#include "synth.hpp"
