// SPDX-License-Identifier: Apache-2.0
#pragma once

// Umbrella header: the whole toolkit.

#include "gotok/audit.hpp"
#include "gotok/autodiff.hpp"
#include "gotok/binary_io.hpp"
#include "gotok/detection_pipeline.hpp"
#include "gotok/error.hpp"
#include "gotok/feature_store.hpp"
#include "gotok/geometry.hpp"
#include "gotok/go_tokenizer.hpp"
#include "gotok/gradcheck.hpp"
#include "gotok/manifest.hpp"
#include "gotok/metrics.hpp"
#include "gotok/random.hpp"
#include "gotok/text_prompting.hpp"
#include "gotok/toy/experiment.hpp"
#include "gotok/toy/go_video.hpp"
#include "gotok/toy/language_model.hpp"
#include "gotok/toy/lora.hpp"
#include "gotok/toy/synthetic.hpp"
#include "gotok/toy/trainer.hpp"
#include "gotok/toy/vocab.hpp"
