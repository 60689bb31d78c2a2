#pragma once

#include "ham/answer.hpp"
#include "ham/baselines.hpp"
#include "ham/checkpoint.hpp"
#include "ham/datagen.hpp"
#include "ham/encoder.hpp"
#include "ham/errors.hpp"
#include "ham/memory.hpp"
#include "ham/model.hpp"
#include "ham/numeric.hpp"
#include "ham/training.hpp"
#include "ham/treebank.hpp"

namespace ham {

inline constexpr const char* kVersion = "0.1.0";

}  // namespace ham
