#pragma once

#include "tma/answer_head.hpp"
#include "tma/config.hpp"
#include "tma/errors.hpp"
#include "tma/fusion_core.hpp"
#include "tma/harness/checkpoint.hpp"
#include "tma/harness/metrics.hpp"
#include "tma/harness/pipeline.hpp"
#include "tma/harness/questions.hpp"
#include "tma/harness/synthetic.hpp"
#include "tma/kg_store.hpp"
#include "tma/model.hpp"
#include "tma/optim.hpp"
#include "tma/spo_selector.hpp"
#include "tma/tensor.hpp"
#include "tma/text_encoder.hpp"
#include "tma/tkg_embedding.hpp"
