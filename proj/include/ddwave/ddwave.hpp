#pragma once

#include "ddwave/errors.hpp"
#include "ddwave/estimator.hpp"
#include "ddwave/experiment.hpp"
#include "ddwave/fisher.hpp"
#include "ddwave/noise_model.hpp"
#include "ddwave/optimizer.hpp"
#include "ddwave/parallel.hpp"
#include "ddwave/quadrature.hpp"
#include "ddwave/signal_model.hpp"
#include "ddwave/types.hpp"
#include "ddwave/version.hpp"
