#pragma once

#include "ecs/attention_analysis.hpp"
#include "ecs/datasets.hpp"
#include "ecs/error.hpp"
#include "ecs/evaluation.hpp"
#include "ecs/model.hpp"
#include "ecs/pipeline.hpp"
#include "ecs/prompt.hpp"
#include "ecs/sweep.hpp"
#include "ecs/tensor.hpp"
#include "ecs/tokenizer.hpp"
#include "ecs/weights_io.hpp"
