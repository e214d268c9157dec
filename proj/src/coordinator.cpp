#include "morec/coordinator.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace morec {

PiController make_pi_controller(double kp, double ki, double alpha_min, double target_loss) {
    if (kp < 0.0 || ki < 0.0 || alpha_min < 0.0)
        throw std::invalid_argument("pi controller: gains must be non-negative");
    PiController pi;
    pi.kp = kp;
    pi.ki = ki;
    pi.alpha_min = alpha_min;
    pi.target_loss = target_loss;
    pi.windup_cap = 10.0 * kp;
    return pi;
}

PiController::Output PiController::step(double batch_loss) {
    if (!std::isfinite(batch_loss))
        throw std::invalid_argument("pi controller: non-finite batch loss");
    const double err = target_loss - batch_loss;
    err_sum += err;
    if (ki > 0.0) {
        const double cap = windup_cap / ki;
        err_sum = std::clamp(err_sum, -cap, cap);
    }
    // exp(err) saturates to inf for large err; kp / inf -> 0, which is the
    // intended limit of the proportional term.
    double alpha = kp / (1.0 + std::exp(err)) - ki * err_sum + alpha_min;
    alpha = std::max(alpha, 0.0);
    ++steps;
    return {alpha, err, err_sum};
}

void PreferenceVector::validate() const {
    double sum = 0.0;
    for (double r : rho) {
        if (!(r >= 0.0)) throw std::invalid_argument("preference vector: rho must be >= 0");
        sum += r;
    }
    if (rho.size() >= 2 && std::abs(sum - 1.0) > 1e-9)
        throw std::invalid_argument("preference vector: rho must sum to 1");
}

double synthesize_loss(double alpha_acc, const PreferenceVector& pref, double acc_loss,
                       std::span<const double> other_losses) {
    if (pref.rho.size() != other_losses.size())
        throw std::invalid_argument("synthesize_loss: rho / losses length mismatch");
    double total = alpha_acc * acc_loss;
    for (std::size_t i = 0; i < other_losses.size(); ++i)
        total += pref.lambda * pref.rho[i] * other_losses[i];
    return total;
}

std::vector<double> static_alpha(std::span<const double> rho_full) {
    for (double r : rho_full)
        if (!(r >= 0.0)) throw std::invalid_argument("static_alpha: weights must be >= 0");
    return {rho_full.begin(), rho_full.end()};
}

}  // namespace morec
