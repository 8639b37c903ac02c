#pragma once

#include "wprocer/common.hpp"
#include "wprocer/corpus.hpp"
#include "wprocer/encoder.hpp"
#include "wprocer/clustering.hpp"
#include "wprocer/losses.hpp"
#include "wprocer/inference_eval.hpp"
#include "wprocer/trainer.hpp"
#include "wprocer/synthetic.hpp"
#include "wprocer/manifest.hpp"
