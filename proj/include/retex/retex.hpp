#pragma once

// Umbrella header: token attributions for bi-encoder dense retrievers via
// integrated gradients with dual [PAD] baselines, plus exact dot-product
// retrieval, NDCG evaluation and report emitters.

#include "retex/attribution.hpp"
#include "retex/common.hpp"
#include "retex/config.hpp"
#include "retex/corpus.hpp"
#include "retex/encoder.hpp"
#include "retex/eval.hpp"
#include "retex/explain.hpp"
#include "retex/external_encoder.hpp"
#include "retex/index.hpp"
#include "retex/reference_encoder.hpp"
#include "retex/report.hpp"
#include "retex/tokenize.hpp"
