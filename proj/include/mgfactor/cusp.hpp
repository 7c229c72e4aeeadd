#pragma once

#include <span>

#include <Eigen/Dense>

#include "mgfactor/distributions.hpp"
#include "mgfactor/model.hpp"
#include "mgfactor/rng.hpp"

namespace mgf {

// Clamp applied to stick fractions before taking log(1 - nu) in the
// concentration update.
inline constexpr double kStickClamp = 1.0 - 1e-12;

// Fresh shrinkage state with L columns: all indicators z_l = L (every column
// but the last active), uniform stick fractions, alpha at its prior mean.
CuspState make_cusp_state(int num_columns, const CuspHyper& hyper);

// Recomputes omega and pi from nu (nu_L forced to 1).
void refresh_sticks(CuspState& cusp);
// theta_l = v0 if z_l <= l else 1.
void refresh_theta(CuspState& cusp);

// Normalized posterior probabilities P(z_l = h | gamma_l), h = 1..L, for
// column l (1-based). Computed in log space.
Eigen::VectorXd indicator_probabilities(double gamma_l, int l, const CuspState& cusp);

// Draws every z_l from its categorical full conditional and resets theta.
void sample_indicators(const Eigen::VectorXd& gamma, CuspState& cusp, Rng& rng);

// Draws nu_h ~ Beta(iota + #{z_l = h}, iota*alpha + #{z_l > h}) for h < L,
// fixes nu_L = 1 and refreshes omega and pi.
void sample_sticks(CuspState& cusp, Rng& rng);

GammaParams alpha_conditional(const CuspState& cusp);
void sample_alpha(CuspState& cusp, Rng& rng);

InvGammaParams gamma_scale_conditional(double gamma_l, double theta_l, const CuspHyper& hyper);
void sample_gamma_scales(const Eigen::VectorXd& gamma, CuspState& cusp, Rng& rng);

// Number of active columns: #{l : z_l > l}.
int count_active(std::span<const int> z);

// One joint draw of the block's shrinkage machinery and scales from the
// prior: alpha, sticks, indicators, theta, sigma2_gamma and gamma.
Eigen::VectorXd sample_cusp_prior(CuspState& cusp, Rng& rng);

}  // namespace mgf
