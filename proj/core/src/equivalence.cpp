#include "ivae/equivalence.hpp"

#include <cmath>

namespace ivae {

ModelShape equivalence_trial_shape(int d, int d_z) {
    ModelShape shape;
    shape.d = d;
    shape.d_z = d_z;
    shape.encoder_hidden = {32};
    shape.decoder_hidden = {32};
    return shape;
}

namespace {

struct TrialStores {
    ParamStore<double> phi;
    ParamStore<double> theta;
};

// Fresh parameters per trial: He initialization with each array rescaled by
// an independent Unif(0.5,2) factor to probe non-trivial regimes.
TrialStores draw_trial_params(const ModelShape& shape, RngStream& stream) {
    TrialStores s;
    init_mlp(s.phi, shape.encoder_ref(), stream);
    init_mlp(s.theta, shape.decoder_ref(), stream);
    for (auto* store : {&s.phi, &s.theta}) {
        for (int i = 0; i < store->count(); ++i) {
            const double f = 0.5 + 1.5 * stream.uniform();
            for (auto& x : store->value(i).v) x *= f;
        }
    }
    return s;
}

std::vector<double> flat_grads(const TrialStores& s) {
    std::vector<double> out;
    for (const auto* store : {&s.phi, &s.theta}) {
        for (int i = 0; i < store->count(); ++i) {
            const auto& g = store->grad(i);
            out.insert(out.end(), g.v.begin(), g.v.end());
        }
    }
    return out;
}

EquivalenceReport run_trials(const DecoderSpec& spec_a, const DecoderSpec& spec_b, double c1,
                             const ModelShape& shape, int trials, RngStream& stream) {
    EquivalenceReport report;
    report.c1 = c1;
    report.c2 = 0.0;
    report.trials = trials;
    for (int t = 0; t < trials; ++t) {
        TrialStores s = draw_trial_params(shape, stream);
        Matrix<double> x(1, shape.d);
        for (auto& v : x.v) v = -0.5 + 2.0 * stream.uniform();  // probe outside [0,1] too
        Matrix<double> eps(1, shape.d_z);
        stream.fill_gauss(eps);

        s.phi.zero_grads();
        s.theta.zero_grads();
        const ElboTerms a = elbo_backward(s.theta, s.phi, x, spec_a, eps, shape);
        const std::vector<double> ga = flat_grads(s);

        s.phi.zero_grads();
        s.theta.zero_grads();
        const ElboTerms b = elbo_backward(s.theta, s.phi, x, spec_b, eps, shape);
        const std::vector<double> gb = flat_grads(s);

        const double residual = std::abs(a.elbo - c1 * b.elbo);
        if (residual > report.max_abs_residual) report.max_abs_residual = residual;
        for (std::size_t k = 0; k < ga.size(); ++k) {
            const double r = std::abs(ga[k] - c1 * gb[k]);
            if (r > report.max_grad_residual) report.max_grad_residual = r;
        }
    }
    return report;
}

}  // namespace

EquivalenceReport check_theorem1(double sigma1, double sigma2, const ModelShape& shape, int trials,
                                 RngStream& stream) {
    if (sigma1 <= 0.0 || sigma2 <= 0.0) throw NonPositiveValue("check_theorem1: sigmas must be > 0");
    const double beta = (sigma2 / sigma1) * (sigma2 / sigma1);
    const double c1 = (sigma1 / sigma2) * (sigma1 / sigma2);
    const DecoderSpec spec_a = DecoderSpec::gaussian(sigma2, 1.0);
    const DecoderSpec spec_b = DecoderSpec::gaussian(sigma1, beta);
    return run_trials(spec_a, spec_b, c1, shape, trials, stream);
}

EquivalenceReport check_theorem2(double alpha1, double alpha2, const ModelShape& shape, int trials,
                                 RngStream& stream) {
    if (alpha1 <= 0.0 || alpha2 <= 0.0) throw NonPositiveValue("check_theorem2: alphas must be > 0");
    const double beta = alpha2 / alpha1;
    const double c1 = alpha1 / alpha2;
    const DecoderSpec spec_a = DecoderSpec::laplace(alpha2, 1.0);
    const DecoderSpec spec_b = DecoderSpec::laplace(alpha1, beta);
    return run_trials(spec_a, spec_b, c1, shape, trials, stream);
}

DecoderSpec absorb_beta(const DecoderSpec& spec) {
    switch (spec.kind) {
        case NoiseKind::gaussian:
            return DecoderSpec::gaussian(spec.scale * std::sqrt(spec.beta), 1.0);
        case NoiseKind::laplace:
            return DecoderSpec::laplace(spec.scale * spec.beta, 1.0);
        case NoiseKind::bernoulli:
            throw UnsupportedKind("absorb_beta: bernoulli decoder has no noise scale");
    }
    throw UnsupportedKind("absorb_beta: unknown decoder kind");
}

}  // namespace ivae
