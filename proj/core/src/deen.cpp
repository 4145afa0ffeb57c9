#include "ivae/deen.hpp"

#include <cmath>
#include <numeric>

namespace ivae {

Checkpoint train_deen(const ImageBatch& data, double sigma, const EnergyShape& shape,
                      const TrainSchedule& schedule) {
    if (sigma <= 0.0) throw NonPositiveValue("train_deen: sigma must be > 0");
    if (data.dim() != shape.d) {
        throw ShapeMismatch("train_deen: data dim " + std::to_string(data.dim()) + " vs d " + std::to_string(shape.d));
    }
    EnergyModel<float> model = init_energy_model<float>(shape, sigma, schedule.seed);
    RngStream shuffle_stream(schedule.seed, "shuffle");
    RngStream corrupt_stream(schedule.seed, "corrupt");
    AdamState<float> opt;
    opt.lr = schedule.lr;

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
            Matrix<float> x(stop - start, data.dim());
            Matrix<float> y(stop - start, data.dim());
            for (int i = start; i < stop; ++i) {
                const float* src = data.data.row(order[i]);
                float* xr = x.row(i - start);
                float* yr = y.row(i - start);
                for (int j = 0; j < data.dim(); ++j) {
                    xr[j] = src[j];
                    yr[j] = src[j] + static_cast<float>(sigma * corrupt_stream.gauss());
                }
            }
            model.params.zero_grads();
            const double loss = deen_loss_backward(model, x, y);
            if (!std::isfinite(loss)) {
                throw NonFiniteLoss("train_deen: non-finite loss at epoch " + std::to_string(epoch) + ", batch " +
                                    std::to_string(start / schedule.batch_size));
            }
            adam_step(model.params, opt);
        }
    }

    Checkpoint ckpt;
    ckpt.kind = ModelKind::deen;
    ckpt.hyper.sigma = sigma;
    ckpt.hyper.beta = 1.0;
    ckpt.shape.d = static_cast<std::uint32_t>(shape.d);
    ckpt.shape.d_z = 0;
    for (int w : shape.ref().widths) ckpt.shape.encoder_widths.push_back(static_cast<std::uint32_t>(w));
    ckpt.meta.seed = schedule.seed;
    ckpt.meta.epochs = static_cast<std::uint32_t>(schedule.epochs);
    ckpt.meta.batch_size = static_cast<std::uint32_t>(schedule.batch_size);
    ckpt.meta.lr = schedule.lr;
    for (int i = 0; i < model.params.count(); ++i) ckpt.params.add(model.params.name(i), model.params.value(i));
    return ckpt;
}

EnergyModel<float> energy_model_from_checkpoint(const Checkpoint& ckpt) {
    if (ckpt.kind != ModelKind::deen) throw WrongModelKind("checkpoint is not an energy model");
    EnergyModel<float> model;
    model.sigma = ckpt.hyper.sigma;
    model.shape.d = static_cast<int>(ckpt.shape.d);
    model.shape.hidden.clear();
    const auto& w = ckpt.shape.encoder_widths;
    for (std::size_t i = 1; i + 1 < w.size(); ++i) model.shape.hidden.push_back(static_cast<int>(w[i]));
    for (int i = 0; i < ckpt.params.count(); ++i) model.params.add(ckpt.params.name(i), ckpt.params.value(i));
    return model;
}

}  // namespace ivae
