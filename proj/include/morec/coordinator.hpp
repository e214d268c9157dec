#pragma once

#include <cstdint>
#include <span>
#include <vector>

namespace morec {

// Proportional-integral feedback on the accuracy batch loss. Each step:
//   err      = target_loss - batch_loss
//   err_sum += err                (clamped so |ki * err_sum| <= windup_cap)
//   alpha    = kp / (1 + exp(err)) - ki * err_sum + alpha_min, clamped to >= 0
struct PiController {
    double kp = 0.01;
    double ki = 0.001;
    double alpha_min = 0.1;
    double target_loss = 0.2;
    double windup_cap = 0.1;  // defaults to 10 * kp
    double err_sum = 0.0;
    std::int64_t steps = 0;

    struct Output {
        double alpha_acc = 0.0;
        double err = 0.0;
        double err_sum = 0.0;
    };

    Output step(double batch_loss);
};

PiController make_pi_controller(double kp, double ki, double alpha_min, double target_loss);

// Fixed preference weights over the non-accuracy objectives, plus the global
// scale applied to their loss terms.
struct PreferenceVector {
    std::vector<double> rho;
    double lambda = 0.2;

    void validate() const;  // rho >= 0; sums to 1 when it has 2+ entries
};

// alpha_acc * acc_loss + lambda * sum_i rho[i] * other_losses[i]
double synthesize_loss(double alpha_acc, const PreferenceVector& pref, double acc_loss,
                       std::span<const double> other_losses);

// Static-scalarization weights: returned unchanged every step.
std::vector<double> static_alpha(std::span<const double> rho_full);

}  // namespace morec
