#pragma once

#include "lacl/numcore.hpp"

#include "lacl/data/batch.hpp"
#include "lacl/data/corpus.hpp"
#include "lacl/data/split.hpp"
#include "lacl/data/synthetic.hpp"
#include "lacl/data/vocab.hpp"

#include "lacl/augment/augment.hpp"
#include "lacl/encoder/encoder.hpp"
#include "lacl/head/gcl.hpp"
#include "lacl/head/losses.hpp"

#include "lacl/trainer/checkpoint.hpp"
#include "lacl/trainer/model.hpp"
#include "lacl/trainer/optim.hpp"
#include "lacl/trainer/trainer.hpp"

#include "lacl/scoring/bank.hpp"
#include "lacl/scoring/cosine.hpp"
#include "lacl/scoring/mahalanobis.hpp"
#include "lacl/scoring/threshold.hpp"

#include "lacl/metrics/evaluate.hpp"
#include "lacl/metrics/metrics.hpp"
