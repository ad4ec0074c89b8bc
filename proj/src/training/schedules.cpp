#include "daseg/training/schedules.hpp"

#include <cmath>

namespace daseg {

double alpha_at(int epoch, const AlphaSchedule& sched) {
    if (epoch <= sched.e_min) return 0.0;
    if (epoch >= sched.e_max) return sched.alpha_max;
    return sched.alpha_max * static_cast<double>(epoch - sched.e_min) / static_cast<double>(sched.e_max - sched.e_min);
}

double lr_at(double progress, const OptimConfig& cfg) {
    return cfg.lr0 / std::pow(1.0 + cfg.lr_decay_alpha * progress, cfg.lr_decay_beta);
}

}  // namespace daseg
