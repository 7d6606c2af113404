#pragma once

#include "corpus.hpp"
#include "diagnostics.hpp"
#include "error.hpp"
#include "evaluation.hpp"
#include "optimizer.hpp"
#include "random.hpp"
#include "response_glm.hpp"
#include "sampler.hpp"
#include "snapshot.hpp"
#include "state.hpp"
#include "synthetic.hpp"
#include "trace.hpp"
