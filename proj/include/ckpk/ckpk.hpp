#pragma once

#include "ckpk/error.hpp"
#include "ckpk/core.hpp"
#include "ckpk/prompts.hpp"
#include "ckpk/llm.hpp"
#include "ckpk/openai_client.hpp"
#include "ckpk/atomize.hpp"
#include "ckpk/entail.hpp"
#include "ckpk/remote_backend.hpp"
#include "ckpk/metrics.hpp"
#include "ckpk/datagen.hpp"
#include "ckpk/jsonl.hpp"
#include "ckpk/dataset.hpp"
#include "ckpk/runner.hpp"
#include "ckpk/analysis.hpp"
