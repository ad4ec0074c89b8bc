#pragma once

#include "daseg/training/config.hpp"

namespace daseg {

/// 0 up to e_min, linear to alpha_max at e_max, alpha_max afterwards.
double alpha_at(int epoch, const AlphaSchedule& sched);

/// lr0 / (1 + lr_decay_alpha * progress)^lr_decay_beta, progress = epoch / max_epochs.
double lr_at(double progress, const OptimConfig& cfg);

}  // namespace daseg
