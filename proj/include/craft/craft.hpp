#pragma once

#include "craft/affordance_graph.hpp"
#include "craft/benchmark.hpp"
#include "craft/concept.hpp"
#include "craft/config.hpp"
#include "craft/embedding.hpp"
#include "craft/error.hpp"
#include "craft/grounding.hpp"
#include "craft/labels.hpp"
#include "craft/llm_client.hpp"
#include "craft/metrics.hpp"
#include "craft/priors.hpp"
#include "craft/provider.hpp"
#include "craft/synthetic.hpp"
#include "craft/trace.hpp"
#include "craft/util.hpp"
