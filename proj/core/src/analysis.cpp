#include "ivae/analysis.hpp"

#include <cmath>
#include <limits>

namespace ivae {

namespace {

// Regularized incomplete beta I_x(a,b) via Lentz's continued fraction.
double betacf(double a, double b, double x) {
    const double tiny = 1e-300;
    const double eps = 3e-16;
    const double qab = a + b, qap = a + 1.0, qam = a - 1.0;
    double c = 1.0;
    double d = 1.0 - qab * x / qap;
    if (std::abs(d) < tiny) d = tiny;
    d = 1.0 / d;
    double h = d;
    for (int m = 1; m <= 300; ++m) {
        const int m2 = 2 * m;
        double aa = m * (b - m) * x / ((qam + m2) * (a + m2));
        d = 1.0 + aa * d;
        if (std::abs(d) < tiny) d = tiny;
        c = 1.0 + aa / c;
        if (std::abs(c) < tiny) c = tiny;
        d = 1.0 / d;
        h *= d * c;
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
        d = 1.0 + aa * d;
        if (std::abs(d) < tiny) d = tiny;
        c = 1.0 + aa / c;
        if (std::abs(c) < tiny) c = tiny;
        d = 1.0 / d;
        const double del = d * c;
        h *= del;
        if (std::abs(del - 1.0) < eps) break;
    }
    return h;
}

double inc_beta(double a, double b, double x) {
    if (x <= 0.0) return 0.0;
    if (x >= 1.0) return 1.0;
    const double ln_front = std::lgamma(a + b) - std::lgamma(a) - std::lgamma(b) + a * std::log(x) +
                            b * std::log1p(-x);
    const double front = std::exp(ln_front);
    if (x < (a + 1.0) / (a + b + 2.0)) {
        return front * betacf(a, b, x) / a;
    }
    return 1.0 - front * betacf(b, a, 1.0 - x) / b;
}

}  // namespace

double student_t_p_value(double t, int df) {
    if (df < 1) throw InsufficientPoints("t-test needs at least one degree of freedom");
    if (!std::isfinite(t)) return std::numeric_limits<double>::min();
    const double x = df / (df + t * t);
    double p = inc_beta(0.5 * df, 0.5, x);
    if (p <= 0.0) p = std::numeric_limits<double>::min();
    if (p > 1.0) p = 1.0;
    return p;
}

double mean_squared_error(const Matrix<float>& a, const Matrix<float>& b) {
    require_same_shape(a, b, "mean_squared_error");
    double acc = 0.0;
    for (std::size_t k = 0; k < a.size(); ++k) {
        const double d = static_cast<double>(a.v[k]) - static_cast<double>(b.v[k]);
        acc += d * d;
    }
    return acc / a.rows;
}

namespace {

constexpr int kEvalChunk = 256;

double bce_term(const float* x, const float* xhat, int d) {
    double acc = 0.0;
    for (int j = 0; j < d; ++j) {
        double t = x[j];
        if (t < 0.0) t = 0.0;  // clamp targets for the metric only
        if (t > 1.0) t = 1.0;
        const double p = xhat[j];
        acc += -(t * std::log(p) + (1.0 - t) * std::log1p(-p));
    }
    return acc;
}

}  // namespace

SweepRow metrics(const Checkpoint& ckpt, const ImageBatch& test, RngStream& stream, int mc_samples) {
    if (ckpt.kind == ModelKind::deen) throw WrongModelKind("metrics: checkpoint is an energy model");
    if (mc_samples < 1) throw EmptyRequest("metrics: mc_samples must be >= 1");
    const ModelShape shape = model_shape_from_checkpoint(ckpt);
    const DecoderSpec spec = decoder_spec_from_checkpoint(ckpt);
    if (test.dim() != shape.d) throw ShapeMismatch("metrics: test dim " + std::to_string(test.dim()));
    VaeParams params = vae_params_from_checkpoint(ckpt);

    const int n = test.count();
    double kl_acc = 0.0, mse_acc = 0.0, recon_acc = 0.0;
    for (int start = 0; start < n; start += kEvalChunk) {
        const int stop = std::min(n, start + kEvalChunk);
        Matrix<float> x(stop - start, test.dim());
        for (int i = start; i < stop; ++i) {
            const float* s = test.data.row(i);
            float* d = x.row(i - start);
            for (int j = 0; j < test.dim(); ++j) d[j] = s[j];
        }
        const PosteriorStats<float> stats = encode(params.phi, shape, x);
        for (double k : kl_to_standard_normal(stats)) kl_acc += k;
        for (int s = 0; s < mc_samples; ++s) {
            const Matrix<float> z = reparameterize(stats, stream);
            const Matrix<float> xhat = decode(params.theta, shape, z);
            for (int i = 0; i < x.rows; ++i) {
                const float* xr = x.row(i);
                const float* hr = xhat.row(i);
                double sq = 0.0;
                for (int j = 0; j < x.cols; ++j) {
                    const double d = double(xr[j]) - double(hr[j]);
                    sq += d * d;
                }
                mse_acc += sq;
                switch (spec.kind) {
                    case NoiseKind::gaussian:
                        recon_acc += sq;
                        break;
                    case NoiseKind::laplace: {
                        double l1 = 0.0;
                        for (int j = 0; j < x.cols; ++j) l1 += std::abs(double(xr[j]) - double(hr[j]));
                        recon_acc += l1;
                        break;
                    }
                    case NoiseKind::bernoulli:
                        recon_acc += bce_term(xr, hr, x.cols);
                        break;
                }
            }
        }
    }

    SweepRow row;
    row.param = spec.kind == NoiseKind::laplace ? ckpt.hyper.alpha : ckpt.hyper.sigma;
    row.kl = kl_acc / n;
    row.mse = mse_acc / (double(n) * mc_samples);
    const double recon_mean = recon_acc / (double(n) * mc_samples);
    row.elbo = -spec.recon_weight() * recon_mean - spec.beta * row.kl;
    row.ratio = row.elbo != 0.0 ? -row.kl / row.elbo : std::numeric_limits<double>::quiet_NaN();
    return row;
}

PowerLawFit fit_power_law(const std::vector<std::pair<double, double>>& rows) {
    const int n = static_cast<int>(rows.size());
    if (n < 3) throw InsufficientPoints("fit_power_law: need at least 3 points, have " + std::to_string(n));
    for (const auto& [p, k] : rows) {
        if (!(p > 0.0) || !(k > 0.0)) {
            throw NonPositiveValue("fit_power_law: point (" + format_real(p) + ", " + format_real(k) +
                                   ") not strictly positive");
        }
    }
    double sx = 0.0, sy = 0.0;
    for (const auto& [p, k] : rows) {
        sx += std::log(p);
        sy += std::log(k);
    }
    const double mx = sx / n, my = sy / n;
    double sxx = 0.0, sxy = 0.0, syy = 0.0;
    for (const auto& [p, k] : rows) {
        const double dx = std::log(p) - mx;
        const double dy = std::log(k) - my;
        sxx += dx * dx;
        sxy += dx * dy;
        syy += dy * dy;
    }
    if (sxx == 0.0) throw NonPositiveValue("fit_power_law: all abscissae identical");
    const double slope = sxy / sxx;
    const double intercept = my - slope * mx;

    PowerLawFit fit;
    fit.nu = -slope;
    fit.intercept = intercept;
    double ssr = 0.0;
    for (const auto& [p, k] : rows) {
        const double r = std::log(k) - (intercept + slope * std::log(p));
        ssr += r * r;
        if (std::abs(r) > fit.max_abs_residual) fit.max_abs_residual = std::abs(r);
    }
    fit.r2 = syy > 0.0 ? 1.0 - ssr / syy : 1.0;
    const double s2 = ssr / (n - 2);
    const double se = std::sqrt(s2 / sxx);
    const double t = se > 0.0 ? slope / se : std::numeric_limits<double>::infinity();
    fit.p_value = student_t_p_value(t, n - 2);
    return fit;
}

std::string render_fit_report(const PowerLawFit& fit) {
    std::string out;
    out += "nu=" + format_real(fit.nu) + "\n";
    out += "intercept=" + format_real(fit.intercept) + "\n";
    out += "r2=" + format_real(fit.r2) + "\n";
    out += "p_value=" + format_real(fit.p_value) + "\n";
    return out;
}

SweepResult run_sweep(const std::vector<double>& grid, NoiseKind kind, const ImageBatch& train_data,
                      const ImageBatch& test_data, const ModelShape& shape, const TrainSchedule& schedule,
                      int mc_samples, const std::string& out_dir) {
    if (kind == NoiseKind::bernoulli) throw UnsupportedKind("run_sweep: grid is over a noise scale");
    SweepResult result;
    std::vector<CsvRow> csv_rows;
    const char* label = kind == NoiseKind::gaussian ? "gaussian" : "laplace";
    for (double p : grid) {
        if (!(p > 0.0)) throw NonPositiveValue("run_sweep: grid value " + format_real(p));
        const DecoderSpec spec =
            kind == NoiseKind::gaussian ? DecoderSpec::gaussian(p) : DecoderSpec::laplace(p);
        const Checkpoint ckpt = train(train_data, spec, shape, schedule);
        RngStream metric_stream(schedule.seed, "metrics");
        const SweepRow row = metrics(ckpt, test_data, metric_stream, mc_samples);
        result.rows.push_back(row);
        csv_rows.push_back({label, {row.param, row.kl, row.mse, row.elbo, row.ratio}});
    }
    result.csv_path = out_dir + "/sweep.csv";
    write_csv({"kind", "param", "kl", "mse", "elbo", "ratio"}, csv_rows, result.csv_path);

    std::vector<std::pair<double, double>> pts;
    for (const auto& row : result.rows) pts.emplace_back(row.param, row.kl);
    try {
        result.fit = fit_power_law(pts);
        result.fit_path = out_dir + "/fit.txt";
        atomic_write_file(result.fit_path, render_fit_report(*result.fit));
    } catch (const Error& e) {
        result.fit_error = e.what();
    }
    return result;
}

namespace {

std::string checkpoint_label(const Checkpoint& ckpt) {
    std::string label = model_kind_name(ckpt.kind);
    switch (ckpt.kind) {
        case ModelKind::sigma_vae:
        case ModelKind::beta_vae:
        case ModelKind::deen:
            label += "_" + format_real(ckpt.hyper.sigma);
            break;
        case ModelKind::alpha_vae:
            label += "_" + format_real(ckpt.hyper.alpha);
            break;
        case ModelKind::bernoulli_vae:
            break;
    }
    return label;
}

}  // namespace

std::vector<std::string> robustness_grid(const std::vector<Checkpoint>& ckpts, const ImageBatch& clean,
                                         const CorruptorSpec& spec, RngStream& stream, const std::string& out_dir,
                                         int cols) {
    std::vector<std::string> paths;
    const std::string clean_path = out_dir + "/clean.pgm";
    write_grid(clean, cols, clean_path);
    paths.push_back(clean_path);

    const ImageBatch corrupted = corrupt(clean, spec, stream);
    const std::string corrupted_path = out_dir + "/corrupted.pgm";
    write_grid(corrupted, cols, corrupted_path);
    paths.push_back(corrupted_path);

    std::vector<CsvRow> csv_rows;
    csv_rows.push_back({"corrupted_input", {mean_squared_error(corrupted.data, clean.data)}});
    for (std::size_t k = 0; k < ckpts.size(); ++k) {
        const Checkpoint& ckpt = ckpts[k];
        ImageBatch recon;
        if (ckpt.kind == ModelKind::deen) {
            EnergyModel<float> model = energy_model_from_checkpoint(ckpt);
            recon.side = corrupted.side;
            recon.data = bayes_estimate(model, corrupted.data);
        } else {
            recon = reconstruct(ckpt, corrupted, stream);
        }
        const std::string path = out_dir + "/recon_" + std::to_string(k) + "_" + checkpoint_label(ckpt) + ".pgm";
        write_grid(recon, cols, path);
        paths.push_back(path);
        csv_rows.push_back({checkpoint_label(ckpt), {mean_squared_error(recon.data, clean.data)}});
    }
    const std::string csv_path = out_dir + "/metrics.csv";
    write_csv({"model", "mse_to_clean"}, csv_rows, csv_path);
    paths.push_back(csv_path);
    return paths;
}

std::string sample_prior(const Checkpoint& ckpt, int n, RngStream& stream, const std::string& path, int cols) {
    if (ckpt.kind == ModelKind::deen) throw WrongModelKind("sample_prior: checkpoint is an energy model");
    if (n < 1) throw EmptyRequest("sample_prior: n must be >= 1");
    const ModelShape shape = model_shape_from_checkpoint(ckpt);
    VaeParams params = vae_params_from_checkpoint(ckpt);
    Matrix<float> z(n, shape.d_z);
    stream.fill_gauss(z);
    ImageBatch out;
    out.side = static_cast<int>(std::lround(std::sqrt(double(shape.d))));
    out.data = decode(params.theta, shape, z);
    write_grid(out, cols, path);
    return path;
}

}  // namespace ivae
