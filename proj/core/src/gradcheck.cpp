#include "ivae/gradcheck.hpp"

#include <cmath>

#include "ivae/deen.hpp"
#include "ivae/mlp.hpp"
#include "ivae/vae.hpp"

namespace ivae {

namespace {

constexpr double kStep = 1e-5;
constexpr double kTinyCutoff = 1e-8;

}  // namespace

ParamStore<double> finite_diff_param_grads(ParamStore<double>& params, const std::function<double()>& value) {
    ParamStore<double> fd;
    for (int i = 0; i < params.count(); ++i) {
        fd.add(params.name(i), Matrix<double>(params.value(i).rows, params.value(i).cols));
    }
    for (int i = 0; i < params.count(); ++i) {
        auto& p = params.value(i);
        auto& g = fd.value(i);
        for (std::size_t k = 0; k < p.size(); ++k) {
            const double saved = p.v[k];
            p.v[k] = saved + kStep;
            const double up = value();
            p.v[k] = saved - kStep;
            const double down = value();
            p.v[k] = saved;
            g.v[k] = (up - down) / (2.0 * kStep);
        }
    }
    return fd;
}

double max_grad_error(const ParamStore<double>& analytic, const ParamStore<double>& fd) {
    double worst = 0.0;
    for (int i = 0; i < analytic.count(); ++i) {
        const auto& a = analytic.grad(i);
        const auto& b = fd.value(fd.index_of(analytic.name(i)));
        for (std::size_t k = 0; k < a.size(); ++k) {
            const double mag = std::max(std::abs(a.v[k]), std::abs(b.v[k]));
            const double diff = std::abs(a.v[k] - b.v[k]);
            const double err = mag < kTinyCutoff ? diff : diff / mag;
            if (err > worst) worst = err;
        }
    }
    return worst;
}

namespace {

Matrix<double> random_matrix(int rows, int cols, RngStream& stream, double lo, double hi) {
    Matrix<double> m(rows, cols);
    for (auto& x : m.v) x = lo + (hi - lo) * stream.uniform();
    return m;
}

double fd_input_grad_error(ParamStore<double>& store, const MlpRef& net, const Matrix<double>& y) {
    const Matrix<double> analytic = mlp_input_gradient(store, net, y);
    Matrix<double> copy = y;
    Matrix<double> fd(y.rows, y.cols);
    for (std::size_t k = 0; k < copy.size(); ++k) {
        const double saved = copy.v[k];
        copy.v[k] = saved + kStep;
        double up = 0.0;
        for (double f : mlp_eval(store, net, copy).v) up += f;
        copy.v[k] = saved - kStep;
        double down = 0.0;
        for (double f : mlp_eval(store, net, copy).v) down += f;
        copy.v[k] = saved;
        fd.v[k] = (up - down) / (2.0 * kStep);
    }
    double worst = 0.0;
    for (std::size_t k = 0; k < fd.size(); ++k) {
        const double mag = std::max(std::abs(analytic.v[k]), std::abs(fd.v[k]));
        const double diff = std::abs(analytic.v[k] - fd.v[k]);
        const double err = mag < kTinyCutoff ? diff : diff / mag;
        if (err > worst) worst = err;
    }
    return worst;
}

// Mean of a scalar loss built on a fresh tape each evaluation, so finite
// differences and the recorded backward pass see the identical function.
struct MlpLossCase {
    enum class Loss { sum_squares, bce, l1 };
    MlpRef net;
    Matrix<double> input;
    Matrix<double> targets;
    Loss loss;

    double value(ParamStore<double>& store) const {
        Tape<double> tape;
        auto out = mlp_forward_tape(tape, store, net, tape.constant(input));
        const auto id = loss_node(tape, out);
        return tape.val(id).v[0] / input.rows;
    }

    double analytic(ParamStore<double>& store) const {
        Tape<double> tape;
        auto out = mlp_forward_tape(tape, store, net, tape.constant(input));
        const auto id = loss_node(tape, out);
        tape.backward(tape.scale(id, 1.0 / input.rows));
        tape.add_param_grads();
        return tape.val(id).v[0] / input.rows;
    }

    Tape<double>::Id loss_node(Tape<double>& tape, Tape<double>::Id out) const {
        switch (loss) {
            case Loss::sum_squares:
                return tape.sum(tape.mul(out, out));
            case Loss::bce:
                return tape.sum(tape.bce_logits(out, tape.constant(targets)));
            case Loss::l1:
                return tape.sum(tape.abs(tape.sub(tape.constant(targets), tape.logistic(out))));
        }
        return -1;
    }
};

GradCheckCase check_mlp_loss(const std::string& name, const MlpLossCase& c, std::uint64_t seed, double tol) {
    ParamStore<double> store;
    RngStream init(seed, "gradcheck.init");
    init_mlp(store, c.net, init);
    store.zero_grads();
    c.analytic(store);
    auto fd = finite_diff_param_grads(store, [&] { return c.value(store); });
    const double err = max_grad_error(store, fd);
    return {name, err, tol, err < tol};
}

GradCheckCase check_elbo(const std::string& name, NoiseKind kind, std::uint64_t seed, double tol) {
    ModelShape shape;
    shape.d = 6;
    shape.d_z = 3;
    shape.encoder_hidden = {8};
    shape.decoder_hidden = {8};
    const DecoderSpec spec = kind == NoiseKind::gaussian ? DecoderSpec::gaussian(0.5, 1.3)
                             : kind == NoiseKind::laplace ? DecoderSpec::laplace(0.5, 1.3)
                                                          : DecoderSpec::bernoulli(1.3);
    RngStream stream(seed, "gradcheck.elbo");
    ParamStore<double> phi, theta;
    init_mlp(phi, shape.encoder_ref(), stream);
    init_mlp(theta, shape.decoder_ref(), stream);
    const Matrix<double> x = random_matrix(2, shape.d, stream, 0.1, 0.9);
    Matrix<double> eps(2, shape.d_z);
    stream.fill_gauss(eps);

    phi.zero_grads();
    theta.zero_grads();
    const ElboTerms terms = elbo_backward(theta, phi, x, spec, eps, shape);
    (void)terms;
    const auto value = [&](ParamStore<double>& a, ParamStore<double>& b) {
        return [&a, &b, &x, &spec, &eps, &shape] {
            ElboTerms t = elbo_with_noise(b, a, x, spec, eps, shape);
            return t.weighted_recon + spec.beta * t.kl;
        };
    };
    const auto fd_phi = finite_diff_param_grads(phi, value(phi, theta));
    const auto fd_theta = finite_diff_param_grads(theta, value(phi, theta));
    const double err = std::max(max_grad_error(phi, fd_phi), max_grad_error(theta, fd_theta));
    return {name, err, tol, err < tol};
}

GradCheckCase check_input_grad(std::uint64_t seed, double tol) {
    MlpRef net{"f", {5, 9, 7, 1}};
    ParamStore<double> store;
    RngStream stream(seed, "gradcheck.inputgrad");
    init_mlp(store, net, stream);
    const Matrix<double> y = random_matrix(3, 5, stream, -1.0, 1.0);
    const double err = fd_input_grad_error(store, net, y);
    return {"energy_input_gradient", err, tol, err < tol};
}

GradCheckCase check_grad_of_input_grad(std::uint64_t seed, double tol) {
    MlpRef net{"f", {4, 8, 6, 1}};
    ParamStore<double> store;
    RngStream stream(seed, "gradcheck.gig");
    init_mlp(store, net, stream);
    const Matrix<double> y = random_matrix(2, 4, stream, -1.0, 1.0);
    const Matrix<double> v = random_matrix(2, 4, stream, -1.0, 1.0);

    store.zero_grads();
    grad_of_input_grad(store, net, y, v);
    const auto value = [&] {
        const Matrix<double> g = mlp_input_gradient(store, net, y);
        double acc = 0.0;
        for (std::size_t k = 0; k < g.size(); ++k) acc += g.v[k] * v.v[k];
        return acc;
    };
    const auto fd = finite_diff_param_grads(store, value);
    const double err = max_grad_error(store, fd);
    return {"grad_of_input_grad", err, tol, err < tol};
}

GradCheckCase check_deen_loss(std::uint64_t seed, double tol) {
    EnergyShape shape;
    shape.d = 5;
    shape.hidden = {8, 6};
    EnergyModel<double> model = init_energy_model<double>(shape, 0.7, seed);
    RngStream stream(seed, "gradcheck.deen");
    const Matrix<double> x = random_matrix(3, shape.d, stream, 0.1, 0.9);
    Matrix<double> y = x;
    for (auto& v : y.v) v += 0.7 * stream.gauss();

    model.params.zero_grads();
    deen_loss_backward(model, x, y);
    const auto fd = finite_diff_param_grads(model.params, [&] { return deen_loss(model, x, y); });
    const double err = max_grad_error(model.params, fd);
    return {"deen_loss", err, tol, err < tol};
}

GradCheckCase check_kl(std::uint64_t seed, double tol) {
    // KL through the exp path only: encoder readout straight into the
    // closed-form term, no decoder.
    ModelShape shape;
    shape.d = 5;
    shape.d_z = 4;
    shape.encoder_hidden = {7};
    RngStream stream(seed, "gradcheck.kl");
    ParamStore<double> phi;
    init_mlp(phi, shape.encoder_ref(), stream);
    const Matrix<double> x = random_matrix(3, shape.d, stream, 0.1, 0.9);

    const auto build = [&](Tape<double>& tape) {
        auto enc = mlp_forward_tape(tape, phi, shape.encoder_ref(), tape.constant(x));
        auto mu = tape.slice_cols(enc, 0, shape.d_z);
        auto lv = tape.slice_cols(enc, shape.d_z, 2 * shape.d_z);
        auto kl_in = tape.sub(tape.add(tape.mul(mu, mu), tape.exp(lv)), tape.affine_const(lv, 1.0, 1.0));
        return tape.scale(tape.sum(kl_in), 0.5 / x.rows);
    };
    phi.zero_grads();
    {
        Tape<double> tape;
        auto loss = build(tape);
        tape.backward(loss);
        tape.add_param_grads();
    }
    const auto fd = finite_diff_param_grads(phi, [&] {
        Tape<double> tape;
        return tape.val(build(tape)).v[0];
    });
    const double err = max_grad_error(phi, fd);
    return {"kl_closed_form", err, tol, err < tol};
}

void append_mlp_cases(std::vector<GradCheckCase>& out, std::uint64_t seed, bool full) {
    RngStream data(seed, "gradcheck.data");
    {
        MlpLossCase c{{"net", {5, 3}}, random_matrix(3, 5, data, -1.0, 1.0), {}, MlpLossCase::Loss::sum_squares};
        out.push_back(check_mlp_loss("affine_sum_squares", c, seed, 1e-6));
    }
    {
        MlpLossCase c{{"net", {6, 8, 5, 2}}, random_matrix(3, 6, data, -1.0, 1.0), {}, MlpLossCase::Loss::sum_squares};
        out.push_back(check_mlp_loss("silu_stack_sum_squares", c, seed, 1e-6));
    }
    {
        MlpLossCase c{{"net", {4, 6, 3}}, random_matrix(3, 4, data, -1.0, 1.0),
                      random_matrix(3, 3, data, 0.05, 0.95), MlpLossCase::Loss::bce};
        out.push_back(check_mlp_loss("logistic_bce", c, seed, 1e-6));
    }
    {
        MlpLossCase c{{"net", {4, 7, 3}}, random_matrix(3, 4, data, -1.0, 1.0),
                      random_matrix(3, 3, data, 0.05, 0.95), MlpLossCase::Loss::l1};
        out.push_back(check_mlp_loss("logistic_l1", c, seed, 1e-6));
    }
    if (full) {
        MlpLossCase c{{"net", {16, 32, 24, 8}}, random_matrix(4, 16, data, -1.0, 1.0), {},
                      MlpLossCase::Loss::sum_squares};
        out.push_back(check_mlp_loss("silu_stack_wide", c, seed, 1e-6));
    }
}

}  // namespace

std::vector<GradCheckCase> run_gradcheck_suite(bool full) {
    std::vector<GradCheckCase> cases;
    const std::vector<std::uint64_t> seeds = full ? std::vector<std::uint64_t>{11, 12, 13}
                                                  : std::vector<std::uint64_t>{11};
    for (std::uint64_t seed : seeds) {
        append_mlp_cases(cases, seed, full);
        cases.push_back(check_elbo("elbo_gaussian", NoiseKind::gaussian, seed, 1e-6));
        cases.push_back(check_elbo("elbo_laplace", NoiseKind::laplace, seed, 1e-6));
        cases.push_back(check_elbo("elbo_bernoulli", NoiseKind::bernoulli, seed, 1e-6));
        cases.push_back(check_kl(seed, 1e-6));
        cases.push_back(check_input_grad(seed, 1e-6));
        cases.push_back(check_grad_of_input_grad(seed, 1e-5));
        cases.push_back(check_deen_loss(seed, 1e-5));
    }
    return cases;
}

bool all_pass(const std::vector<GradCheckCase>& cases) {
    for (const auto& c : cases) {
        if (!c.pass) return false;
    }
    return true;
}

}  // namespace ivae
