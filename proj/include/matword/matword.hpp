#pragma once

// Umbrella header.
#include "matword/adam.hpp"
#include "matword/batches.hpp"
#include "matword/bench.hpp"
#include "matword/common.hpp"
#include "matword/config.hpp"
#include "matword/corpus.hpp"
#include "matword/encoder.hpp"
#include "matword/gradients.hpp"
#include "matword/loss.hpp"
#include "matword/model.hpp"
#include "matword/model_io.hpp"
#include "matword/noise.hpp"
#include "matword/parallel.hpp"
#include "matword/probing/datasets.hpp"
#include "matword/probing/diagnostics.hpp"
#include "matword/probing/probe.hpp"
#include "matword/probing/synthetic.hpp"
#include "matword/table.hpp"
#include "matword/tokenize.hpp"
#include "matword/train.hpp"
#include "matword/vocabulary.hpp"
