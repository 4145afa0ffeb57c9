#pragma once

#include "ivae/vae.hpp"

namespace ivae {

// Result of certifying one objective identity L(Σ₂) = C₁·L(Σ₁,β) + C₂ over
// random draws. C₂ is identically 0 under the dropped-constant convention.
struct EquivalenceReport {
    double c1 = 1.0;
    double c2 = 0.0;
    double max_abs_residual = 0.0;
    double max_grad_residual = 0.0;
    int trials = 0;
};

// Shapes used for the random trials; the identity is architecture-free, so
// the default is compact to keep thousand-trial runs in seconds.
ModelShape equivalence_trial_shape(int d = 64, int d_z = 8);

// Gaussian case: beta = (sigma2/sigma1)², C1 = (sigma1/sigma2)². Each trial
// draws fresh parameters (He init scaled by Unif(0.5,2)), an input, and one
// shared reparameterization sample; both objectives and their parameter
// gradients are evaluated in 64-bit on identical values.
EquivalenceReport check_theorem1(double sigma1, double sigma2, const ModelShape& shape, int trials,
                                 RngStream& stream);

// Laplace case: beta = alpha2/alpha1, C1 = alpha1/alpha2.
EquivalenceReport check_theorem2(double alpha1, double alpha2, const ModelShape& shape, int trials,
                                 RngStream& stream);

// Folds the KL weight into the noise scale: (sigma, beta) → sigma·sqrt(beta),
// (alpha, beta) → alpha·beta, returned with beta = 1. UnsupportedKind for the
// Bernoulli decoder, which has no scale to absorb into.
DecoderSpec absorb_beta(const DecoderSpec& spec);

}  // namespace ivae
