#pragma once

// Everything except nidsrl/alloc_hooks.hpp, which replaces malloc and must be
// included by exactly one translation unit of a program.

#include "nidsrl/alloc_tracker.hpp"
#include "nidsrl/baseline_attacks.hpp"
#include "nidsrl/error.hpp"
#include "nidsrl/eval_bench.hpp"
#include "nidsrl/evasion_env.hpp"
#include "nidsrl/feature_codec.hpp"
#include "nidsrl/flow_record.hpp"
#include "nidsrl/hash.hpp"
#include "nidsrl/netflow_csv.hpp"
#include "nidsrl/nids_zoo.hpp"
#include "nidsrl/nn.hpp"
#include "nidsrl/partition.hpp"
#include "nidsrl/pipeline.hpp"
#include "nidsrl/policy.hpp"
#include "nidsrl/random.hpp"
#include "nidsrl/rl.hpp"
#include "nidsrl/synthetic.hpp"
