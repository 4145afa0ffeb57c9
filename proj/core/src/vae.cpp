#include "ivae/vae.hpp"

#include <cmath>
#include <numeric>

namespace ivae {

VaeParams init_vae_params(const ModelShape& shape, std::uint64_t seed) {
    VaeParams p;
    RngStream enc_stream(seed, "init.enc");
    RngStream dec_stream(seed, "init.dec");
    init_mlp(p.phi, shape.encoder_ref(), enc_stream);
    init_mlp(p.theta, shape.decoder_ref(), dec_stream);
    return p;
}

ModelKind model_kind_for(const DecoderSpec& spec) {
    switch (spec.kind) {
        case NoiseKind::gaussian: return spec.beta == 1.0 ? ModelKind::sigma_vae : ModelKind::beta_vae;
        case NoiseKind::laplace: return ModelKind::alpha_vae;
        case NoiseKind::bernoulli: return ModelKind::bernoulli_vae;
    }
    return ModelKind::sigma_vae;
}

namespace {

std::vector<std::uint32_t> to_u32(const std::vector<int>& v) {
    std::vector<std::uint32_t> out;
    out.reserve(v.size());
    for (int x : v) out.push_back(static_cast<std::uint32_t>(x));
    return out;
}

Matrix<float> gather_rows(const Matrix<float>& src, const std::vector<int>& idx, int begin, int end) {
    Matrix<float> out(end - begin, src.cols);
    for (int i = begin; i < end; ++i) {
        const float* s = src.row(idx[i]);
        float* d = out.row(i - begin);
        for (int j = 0; j < src.cols; ++j) d[j] = s[j];
    }
    return out;
}

}  // namespace

Checkpoint train(const ImageBatch& data, const DecoderSpec& spec, const ModelShape& shape,
                 const TrainSchedule& schedule) {
    if (data.dim() != shape.d) {
        throw ShapeMismatch("train: data dim " + std::to_string(data.dim()) + " vs model d " + std::to_string(shape.d));
    }
    VaeParams params = init_vae_params(shape, schedule.seed);
    RngStream shuffle_stream(schedule.seed, "shuffle");
    RngStream reparam_stream(schedule.seed, "reparam");
    AdamState<float> opt_phi, opt_theta;
    opt_phi.lr = opt_theta.lr = schedule.lr;

    const int n = data.count();
    std::vector<int> order(n);
    std::iota(order.begin(), order.end(), 0);

    for (int epoch = 0; epoch < schedule.epochs; ++epoch) {
        for (int i = n - 1; i > 0; --i) {
            const int j = static_cast<int>(shuffle_stream.next_below(static_cast<std::uint64_t>(i) + 1));
            std::swap(order[i], order[j]);
        }
        for (int start = 0; start < n; start += schedule.batch_size) {
            const int stop = std::min(n, start + schedule.batch_size);
            Matrix<float> batch = gather_rows(data.data, order, start, stop);
            Matrix<float> eps(batch.rows, shape.d_z);
            reparam_stream.fill_gauss(eps);
            params.phi.zero_grads();
            params.theta.zero_grads();
            const ElboTerms terms = elbo_backward(params.theta, params.phi, batch, spec, eps, shape);
            const double loss = terms.weighted_recon + spec.beta * terms.kl;
            if (!std::isfinite(loss)) {
                throw NonFiniteLoss("train: non-finite loss at epoch " + std::to_string(epoch) + ", batch " +
                                    std::to_string(start / schedule.batch_size) + " (recon " +
                                    std::to_string(terms.recon) + ", kl " + std::to_string(terms.kl) + ")");
            }
            adam_step(params.phi, opt_phi);
            adam_step(params.theta, opt_theta);
        }
    }

    Checkpoint ckpt;
    ckpt.kind = model_kind_for(spec);
    ckpt.hyper.sigma = spec.kind == NoiseKind::gaussian ? spec.scale : 0.0;
    ckpt.hyper.alpha = spec.kind == NoiseKind::laplace ? spec.scale : 0.0;
    ckpt.hyper.beta = spec.beta;
    ckpt.shape.d = static_cast<std::uint32_t>(shape.d);
    ckpt.shape.d_z = static_cast<std::uint32_t>(shape.d_z);
    ckpt.shape.encoder_widths = to_u32(shape.encoder_ref().widths);
    ckpt.shape.decoder_widths = to_u32(shape.decoder_ref().widths);
    ckpt.meta.seed = schedule.seed;
    ckpt.meta.epochs = static_cast<std::uint32_t>(schedule.epochs);
    ckpt.meta.batch_size = static_cast<std::uint32_t>(schedule.batch_size);
    ckpt.meta.lr = schedule.lr;
    for (int i = 0; i < params.phi.count(); ++i) ckpt.params.add(params.phi.name(i), params.phi.value(i));
    for (int i = 0; i < params.theta.count(); ++i) ckpt.params.add(params.theta.name(i), params.theta.value(i));
    return ckpt;
}

VaeParams vae_params_from_checkpoint(const Checkpoint& ckpt) {
    VaeParams p;
    for (int i = 0; i < ckpt.params.count(); ++i) {
        const std::string& name = ckpt.params.name(i);
        if (name.rfind("enc.", 0) == 0) {
            p.phi.add(name, ckpt.params.value(i));
        } else if (name.rfind("dec.", 0) == 0) {
            p.theta.add(name, ckpt.params.value(i));
        } else {
            throw CorruptArray("checkpoint array " + name + " is neither encoder nor decoder");
        }
    }
    return p;
}

ModelShape model_shape_from_checkpoint(const Checkpoint& ckpt) {
    ModelShape shape;
    shape.d = static_cast<int>(ckpt.shape.d);
    shape.d_z = static_cast<int>(ckpt.shape.d_z);
    shape.encoder_hidden.clear();
    const auto& ew = ckpt.shape.encoder_widths;
    for (std::size_t i = 1; i + 1 < ew.size(); ++i) shape.encoder_hidden.push_back(static_cast<int>(ew[i]));
    shape.decoder_hidden.clear();
    const auto& dw = ckpt.shape.decoder_widths;
    for (std::size_t i = 1; i + 1 < dw.size(); ++i) shape.decoder_hidden.push_back(static_cast<int>(dw[i]));
    return shape;
}

DecoderSpec decoder_spec_from_checkpoint(const Checkpoint& ckpt) {
    switch (ckpt.kind) {
        case ModelKind::sigma_vae:
        case ModelKind::beta_vae:
            return DecoderSpec::gaussian(ckpt.hyper.sigma, ckpt.hyper.beta);
        case ModelKind::alpha_vae:
            return DecoderSpec::laplace(ckpt.hyper.alpha, ckpt.hyper.beta);
        case ModelKind::bernoulli_vae:
            return DecoderSpec::bernoulli(ckpt.hyper.beta);
        case ModelKind::deen:
            throw WrongModelKind("checkpoint holds an energy model, not a VAE");
    }
    throw WrongModelKind("unknown checkpoint kind");
}

ImageBatch reconstruct(const Checkpoint& ckpt, const ImageBatch& y, RngStream& stream) {
    if (ckpt.kind == ModelKind::deen) throw WrongModelKind("reconstruct: checkpoint is an energy model");
    const ModelShape shape = model_shape_from_checkpoint(ckpt);
    if (y.dim() != shape.d) throw ShapeMismatch("reconstruct: input dim " + std::to_string(y.dim()));
    VaeParams params = vae_params_from_checkpoint(ckpt);
    const PosteriorStats<float> stats = encode(params.phi, shape, y.data);
    const Matrix<float> z = reparameterize(stats, stream);
    ImageBatch out;
    out.side = y.side;
    out.data = decode(params.theta, shape, z);
    return out;
}

}  // namespace ivae
