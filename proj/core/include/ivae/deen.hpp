#pragma once

#include "ivae/dataio.hpp"
#include "ivae/mlp.hpp"
#include "ivae/rng.hpp"
#include "ivae/vae.hpp"

namespace ivae {

// Scalar-output energy net over corrupted inputs. The partition function is
// never represented; only gradients of f matter.
struct EnergyShape {
    int d = 784;
    std::vector<int> hidden = {512, 256};

    MlpRef ref() const {
        MlpRef net{"f", {d}};
        net.widths.insert(net.widths.end(), hidden.begin(), hidden.end());
        net.widths.push_back(1);
        return net;
    }
};

template <typename T>
struct EnergyModel {
    ParamStore<T> params;
    EnergyShape shape;
    double sigma = 0.0;  // training noise scale
};

template <typename T>
EnergyModel<T> init_energy_model(const EnergyShape& shape, double sigma, std::uint64_t seed) {
    EnergyModel<T> model;
    model.shape = shape;
    model.sigma = sigma;
    RngStream stream(seed, "init.f");
    init_mlp(model.params, shape.ref(), stream);
    return model;
}

// f_ϑ(y), one scalar per example.
template <typename T>
Matrix<T> energy(EnergyModel<T>& model, const Matrix<T>& y) {
    return mlp_eval(model.params, model.shape.ref(), y);
}

// The estimator convention of the smoothed-density route: posterior mean
// from the energy gradient alone. Kept as a separate seam so the sign and
// scale can be pinned against closed forms independent of the network.
template <typename T>
Matrix<T> bayes_estimate_from_grad(const Matrix<T>& y, const Matrix<T>& grad, double sigma) {
    require_same_shape(y, grad, "bayes_estimate");
    Matrix<T> out = y;
    const T s2 = static_cast<T>(sigma * sigma);
    for (std::size_t k = 0; k < out.size(); ++k) out.v[k] -= s2 * grad.v[k];
    return out;
}

// x̂(y) = y − σ²∇f_ϑ(y); deterministic.
template <typename T>
Matrix<T> bayes_estimate(EnergyModel<T>& model, const Matrix<T>& y) {
    const Matrix<T> grad = mlp_input_gradient(model.params, model.shape.ref(), y);
    return bayes_estimate_from_grad(y, grad, model.sigma);
}

// Mean squared deviation of the Bayes estimate from the clean data.
template <typename T>
double deen_loss(EnergyModel<T>& model, const Matrix<T>& x, const Matrix<T>& y) {
    require_same_shape(x, y, "deen_loss");
    const Matrix<T> xhat = bayes_estimate(model, y);
    double acc = 0.0;
    for (std::size_t k = 0; k < x.size(); ++k) {
        const double d = static_cast<double>(x.v[k]) - static_cast<double>(xhat.v[k]);
        acc += d * d;
    }
    return acc / x.rows;
}

// Loss plus exact parameter gradients. The loss touches the parameters only
// through g = ∇_y f, so with e = x − y + σ²g held numerically,
// dL/dϑ = (2σ²/n) · d/dϑ Σ_i ⟨g(y_i), e_i⟩ — the second-order primitive.
template <typename T>
double deen_loss_backward(EnergyModel<T>& model, const Matrix<T>& x, const Matrix<T>& y) {
    require_same_shape(x, y, "deen_loss");
    const MlpRef net = model.shape.ref();
    const Matrix<T> g = mlp_input_gradient(model.params, net, y);
    const double s2 = model.sigma * model.sigma;
    Matrix<T> e(x.rows, x.cols);
    double loss = 0.0;
    for (std::size_t k = 0; k < x.size(); ++k) {
        const double ek = static_cast<double>(x.v[k]) - static_cast<double>(y.v[k]) + s2 * static_cast<double>(g.v[k]);
        e.v[k] = static_cast<T>(ek);
        loss += ek * ek;
    }
    loss /= x.rows;
    Matrix<T> v = e;
    const T w = static_cast<T>(2.0 * s2 / x.rows);
    for (auto& vk : v.v) vk *= w;
    grad_of_input_grad(model.params, net, y, v);
    return loss;
}

// Adam on the denoising objective with fresh corruption noise per
// minibatch. Clean data in; the model never sees a fixed noisy dataset.
Checkpoint train_deen(const ImageBatch& data, double sigma, const EnergyShape& shape, const TrainSchedule& schedule);

EnergyModel<float> energy_model_from_checkpoint(const Checkpoint& ckpt);

}  // namespace ivae
