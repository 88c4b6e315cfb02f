// SPDX-License-Identifier: Apache-2.0
/**
 * @file   seqclass.hpp
 * @brief  Umbrella header.
 */

#pragma once

#include "seqclass/encoding.hpp"
#include "seqclass/errors.hpp"
#include "seqclass/io.hpp"
#include "seqclass/metrics.hpp"
#include "seqclass/model.hpp"
#include "seqclass/numerics.hpp"
#include "seqclass/training.hpp"
