#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "ivae/dataio.hpp"
#include "ivae/mlp.hpp"
#include "ivae/rng.hpp"

namespace ivae {

// Dense reference architecture. The encoder ends in a 2·d_z readout that is
// split into (mu, log_var); the decoder ends in a logistic readout.
struct ModelShape {
    int d = 784;
    int d_z = 32;
    std::vector<int> encoder_hidden = {512, 256};
    std::vector<int> decoder_hidden = {512};

    MlpRef encoder_ref() const {
        MlpRef net{"enc", {d}};
        net.widths.insert(net.widths.end(), encoder_hidden.begin(), encoder_hidden.end());
        net.widths.push_back(2 * d_z);
        return net;
    }
    MlpRef decoder_ref() const {
        MlpRef net{"dec", {d_z}};
        net.widths.insert(net.widths.end(), decoder_hidden.begin(), decoder_hidden.end());
        net.widths.push_back(d);
        return net;
    }

    static ModelShape desk(int d = 784, int d_z = 32) {
        ModelShape s;
        s.d = d;
        s.d_z = d_z;
        return s;
    }

    // Full-fidelity sizes: latent 100 and a 2000-unit decoder hidden layer,
    // with a dense stand-in for the convolutional encoder ending in a
    // 200-unit layer.
    static ModelShape paper(int d = 784) {
        ModelShape s;
        s.d = d;
        s.d_z = 100;
        s.encoder_hidden = {512, 512, 200};
        s.decoder_hidden = {2000};
        return s;
    }
};

enum class NoiseKind { gaussian, laplace, bernoulli };

// Which likelihood shape the decoder pretends the data went through, plus
// the KL weight beta.
struct DecoderSpec {
    NoiseKind kind = NoiseKind::gaussian;
    double scale = 1.0;  // sigma for gaussian, alpha for laplace, unused for bernoulli
    double beta = 1.0;

    static DecoderSpec gaussian(double sigma, double beta = 1.0) {
        if (sigma <= 0.0) throw NonPositiveValue("DecoderSpec: sigma must be > 0");
        if (beta <= 0.0) throw NonPositiveValue("DecoderSpec: beta must be > 0");
        return {NoiseKind::gaussian, sigma, beta};
    }
    static DecoderSpec laplace(double alpha, double beta = 1.0) {
        if (alpha <= 0.0) throw NonPositiveValue("DecoderSpec: alpha must be > 0");
        if (beta <= 0.0) throw NonPositiveValue("DecoderSpec: beta must be > 0");
        return {NoiseKind::laplace, alpha, beta};
    }
    static DecoderSpec bernoulli(double beta = 1.0) {
        if (beta <= 0.0) throw NonPositiveValue("DecoderSpec: beta must be > 0");
        return {NoiseKind::bernoulli, 0.0, beta};
    }

    double sigma() const { return scale; }
    double alpha() const { return scale; }

    // Reconstruction weight in front of the expected reconstruction term.
    double recon_weight() const {
        switch (kind) {
            case NoiseKind::gaussian: return 1.0 / (2.0 * scale * scale);
            case NoiseKind::laplace: return 1.0 / scale;
            case NoiseKind::bernoulli: return 1.0;
        }
        return 1.0;
    }
};

template <typename T>
struct PosteriorStats {
    Matrix<T> mu;       // batch × d_z
    Matrix<T> log_var;  // batch × d_z
};

template <typename T>
PosteriorStats<T> encode(const ParamStore<T>& phi, const ModelShape& shape, const Matrix<T>& x) {
    const Matrix<T> out = mlp_eval(phi, shape.encoder_ref(), x);
    PosteriorStats<T> stats;
    stats.mu = Matrix<T>(out.rows, shape.d_z);
    stats.log_var = Matrix<T>(out.rows, shape.d_z);
    for (int i = 0; i < out.rows; ++i) {
        const T* src = out.row(i);
        for (int j = 0; j < shape.d_z; ++j) {
            stats.mu(i, j) = src[j];
            stats.log_var(i, j) = src[shape.d_z + j];
        }
    }
    return stats;
}

// z = mu + exp(log_var/2) ⊙ eps with the noise supplied explicitly
// (shared-sample evaluations need to control it).
template <typename T>
Matrix<T> reparameterize_with(const PosteriorStats<T>& stats, const Matrix<T>& eps) {
    require_same_shape(stats.mu, eps, "reparameterize");
    Matrix<T> z = stats.mu;
    for (std::size_t k = 0; k < z.size(); ++k) {
        z.v[k] += std::exp(stats.log_var.v[k] / T(2)) * eps.v[k];
    }
    return z;
}

template <typename T>
Matrix<T> reparameterize(const PosteriorStats<T>& stats, RngStream& stream) {
    Matrix<T> eps(stats.mu.rows, stats.mu.cols);
    stream.fill_gauss(eps);
    return reparameterize_with(stats, eps);
}

// Logistic readout, nudged off exact 0/1 so downstream logs and the
// (0,1)^d contract survive float saturation.
template <typename T>
Matrix<T> decode(const ParamStore<T>& theta, const ModelShape& shape, const Matrix<T>& z) {
    Matrix<T> out = mlp_eval(theta, shape.decoder_ref(), z);
    const T lo = static_cast<T>(1e-7), hi = static_cast<T>(1.0 - 1e-7);
    for (auto& x : out.v) {
        x = logistic_scalar(x);
        if (x < lo) x = lo;
        if (x > hi) x = hi;
    }
    return out;
}

// Closed form ½ Σ_i (mu² + s² − 1 − ln s²) against the N(0,I) prior,
// one value per example. expm1 keeps the small-variance regime exact.
template <typename T>
std::vector<double> kl_to_standard_normal(const PosteriorStats<T>& stats) {
    require_same_shape(stats.mu, stats.log_var, "kl_to_standard_normal");
    std::vector<double> kl(stats.mu.rows, 0.0);
    for (int i = 0; i < stats.mu.rows; ++i) {
        const T* mu = stats.mu.row(i);
        const T* lv = stats.log_var.row(i);
        double acc = 0.0;
        for (int j = 0; j < stats.mu.cols; ++j) {
            const double m = static_cast<double>(mu[j]);
            const double l = static_cast<double>(lv[j]);
            acc += m * m + (std::expm1(l) - l);
        }
        kl[i] = 0.5 * acc;
    }
    return kl;
}

// Batch means of the single-sample Monte Carlo objective. Additive model
// constants are dropped throughout, so elbo = −weighted_recon − beta·kl.
struct ElboTerms {
    double recon = 0.0;           // mean reconstruction term before noise-scale weighting
    double weighted_recon = 0.0;  // recon · recon_weight
    double kl = 0.0;              // mean KL to the prior
    double elbo = 0.0;
};

namespace detail {

// Builds the full objective on one tape. Returns the scalar node for the
// quantity Adam minimizes: weighted_recon + beta·kl (batch mean).
template <typename T>
struct ElboGraph {
    Tape<T> tape;
    typename Tape<T>::Id recon_sum = -1;
    typename Tape<T>::Id kl_sum = -1;
    typename Tape<T>::Id loss = -1;
};

template <typename T>
ElboGraph<T> build_elbo_graph(ParamStore<T>& theta, ParamStore<T>& phi, const Matrix<T>& x, const DecoderSpec& spec,
                              const Matrix<T>& eps, const ModelShape& shape) {
    if (x.cols != shape.d) throw ShapeMismatch("elbo: input width " + std::to_string(x.cols));
    if (spec.kind == NoiseKind::bernoulli) {
        for (const auto& t : x.v) {
            if (!(t >= T(0) && t <= T(1))) {
                throw BernoulliTargetOutOfRange("bernoulli decoder: target " + std::to_string(double(t)) +
                                                " outside [0,1]");
            }
        }
    }
    const int n = x.rows;
    ElboGraph<T> g;
    auto& tp = g.tape;
    auto xin = tp.constant(x);
    auto enc_out = mlp_forward_tape(tp, phi, shape.encoder_ref(), xin);
    auto mu = tp.slice_cols(enc_out, 0, shape.d_z);
    auto lv = tp.slice_cols(enc_out, shape.d_z, 2 * shape.d_z);
    auto z = tp.add(mu, tp.mul(tp.exp(tp.scale(lv, 0.5)), tp.constant(eps)));
    auto logits = mlp_forward_tape(tp, theta, shape.decoder_ref(), z);
    switch (spec.kind) {
        case NoiseKind::gaussian: {
            auto r = tp.sub(xin, tp.logistic(logits));
            g.recon_sum = tp.sum(tp.mul(r, r));
            break;
        }
        case NoiseKind::laplace:
            g.recon_sum = tp.sum(tp.abs(tp.sub(xin, tp.logistic(logits))));
            break;
        case NoiseKind::bernoulli:
            g.recon_sum = tp.sum(tp.bce_logits(logits, xin));
            break;
    }
    auto kl_in = tp.sub(tp.add(tp.mul(mu, mu), tp.exp(lv)), tp.affine_const(lv, 1.0, 1.0));
    g.kl_sum = tp.scale(tp.sum(kl_in), 0.5);
    g.loss = tp.add(tp.scale(g.recon_sum, spec.recon_weight() / n), tp.scale(g.kl_sum, spec.beta / n));
    return g;
}

template <typename T>
ElboTerms terms_from_graph(const ElboGraph<T>& g, const DecoderSpec& spec, int n) {
    ElboTerms t;
    t.recon = static_cast<double>(g.tape.val(g.recon_sum).v[0]) / n;
    t.weighted_recon = t.recon * spec.recon_weight();
    t.kl = static_cast<double>(g.tape.val(g.kl_sum).v[0]) / n;
    t.elbo = -t.weighted_recon - spec.beta * t.kl;
    return t;
}

}  // namespace detail

template <typename T>
ElboTerms elbo_with_noise(ParamStore<T>& theta, ParamStore<T>& phi, const Matrix<T>& x, const DecoderSpec& spec,
                          const Matrix<T>& eps, const ModelShape& shape) {
    auto g = detail::build_elbo_graph(theta, phi, x, spec, eps, shape);
    return detail::terms_from_graph(g, spec, x.rows);
}

template <typename T>
ElboTerms elbo(ParamStore<T>& theta, ParamStore<T>& phi, const Matrix<T>& x, const DecoderSpec& spec,
               RngStream& stream, const ModelShape& shape) {
    Matrix<T> eps(x.rows, shape.d_z);
    stream.fill_gauss(eps);
    return elbo_with_noise(theta, phi, x, spec, eps, shape);
}

// Accumulates d(weighted_recon + beta·kl)/dparams — the negative ELBO
// gradient — into both stores' gradient buffers.
template <typename T>
ElboTerms elbo_backward(ParamStore<T>& theta, ParamStore<T>& phi, const Matrix<T>& x, const DecoderSpec& spec,
                        const Matrix<T>& eps, const ModelShape& shape) {
    auto g = detail::build_elbo_graph(theta, phi, x, spec, eps, shape);
    g.tape.backward(g.loss);
    g.tape.add_param_grads();
    return detail::terms_from_graph(g, spec, x.rows);
}

// ---- training ----------------------------------------------------------------

struct TrainSchedule {
    int epochs = 100;
    int batch_size = 16;
    double lr = 1e-4;
    std::uint64_t seed = 1;
};

struct VaeParams {
    ParamStore<float> phi;    // encoder
    ParamStore<float> theta;  // decoder
};

VaeParams init_vae_params(const ModelShape& shape, std::uint64_t seed);

ModelKind model_kind_for(const DecoderSpec& spec);

// Adam on the negative ELBO over shuffled minibatches; clean data only.
// Identical seeds give byte-identical checkpoints.
Checkpoint train(const ImageBatch& data, const DecoderSpec& spec, const ModelShape& shape,
                 const TrainSchedule& schedule);

// Checkpoint <-> stores. Parameter names carry the "enc."/"dec." prefixes,
// so the split is unambiguous.
VaeParams vae_params_from_checkpoint(const Checkpoint& ckpt);
ModelShape model_shape_from_checkpoint(const Checkpoint& ckpt);
DecoderSpec decoder_spec_from_checkpoint(const Checkpoint& ckpt);

// encode → sample → decode, one stochastic pass.
ImageBatch reconstruct(const Checkpoint& ckpt, const ImageBatch& y, RngStream& stream);

}  // namespace ivae
