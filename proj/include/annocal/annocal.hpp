#ifndef ANNOCAL_ANNOCAL_HPP_
#define ANNOCAL_ANNOCAL_HPP_

#include "annocal/agreement.hpp"
#include "annocal/assignment.hpp"
#include "annocal/core.hpp"
#include "annocal/eval_match.hpp"
#include "annocal/io.hpp"
#include "annocal/isotonic.hpp"
#include "annocal/metrics.hpp"
#include "annocal/normal_quantile.hpp"
#include "annocal/pipeline.hpp"
#include "annocal/posthoc.hpp"
#include "annocal/preprocess.hpp"
#include "annocal/simulate.hpp"
#include "annocal/train_loss.hpp"

#endif
