#pragma once

#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "ivae/dataio.hpp"
#include "ivae/deen.hpp"
#include "ivae/rng.hpp"
#include "ivae/vae.hpp"

namespace ivae {

// One row of a noise-scale sweep table: test-set means for a trained model.
struct SweepRow {
    double param = 0.0;  // sigma or alpha
    double kl = 0.0;
    double mse = 0.0;   // E_q ||x - xhat(z)||^2
    double elbo = 0.0;  // dropped-constant convention
    double ratio = 0.0; // -kl / elbo
};

// Log-log OLS of kl against the noise scale; nu is the negated slope and the
// p-value comes from the classical two-sided t-test on the slope.
struct PowerLawFit {
    double nu = 0.0;
    double intercept = 0.0;
    double r2 = 0.0;
    double p_value = 1.0;
    double max_abs_residual = 0.0;  // in log space
};

// Two-sided tail of Student's t with df degrees of freedom; used by the fit
// and pinned by tests against published regression p-values.
double student_t_p_value(double t, int df);

double mean_squared_error(const Matrix<float>& a, const Matrix<float>& b);

// Test-set averages for a VAE checkpoint. MSE uses mc_samples
// reparameterization draws per example (default 1 elsewhere). The elbo
// column uses the checkpoint's own decoder likelihood; for the Bernoulli
// kind, targets are clamped to [0,1] for the metric only.
SweepRow metrics(const Checkpoint& ckpt, const ImageBatch& test, RngStream& stream, int mc_samples);

PowerLawFit fit_power_law(const std::vector<std::pair<double, double>>& rows);

// Trains one model per grid value (identical shape/schedule/seed policy),
// evaluates on the test split, writes "sweep.csv" and "fit.txt" under
// out_dir. The fit is absent when the grid cannot support one (the table is
// still written); fit_error then carries the reason.
struct SweepResult {
    std::vector<SweepRow> rows;
    std::optional<PowerLawFit> fit;
    std::string fit_error;
    std::string csv_path;
    std::string fit_path;
};

SweepResult run_sweep(const std::vector<double>& grid, NoiseKind kind, const ImageBatch& train_data,
                      const ImageBatch& test_data, const ModelShape& shape, const TrainSchedule& schedule,
                      int mc_samples, const std::string& out_dir);

std::string render_fit_report(const PowerLawFit& fit);

// Corrupts the clean images once, then lets every checkpoint reconstruct
// them: writes clean.pgm, corrupted.pgm, one recon grid per checkpoint and
// metrics.csv with mean ||xhat - x_clean||^2 per checkpoint (the corrupted
// input itself is the first, do-nothing row). Energy-model checkpoints
// denoise deterministically; VAE checkpoints take one stochastic pass.
std::vector<std::string> robustness_grid(const std::vector<Checkpoint>& ckpts, const ImageBatch& clean,
                                         const CorruptorSpec& spec, RngStream& stream, const std::string& out_dir,
                                         int cols = 10);

// Decodes n prior draws z ~ N(0, I) into a grid; the decoder's noise model
// stays imaginary, so nothing is added on top.
std::string sample_prior(const Checkpoint& ckpt, int n, RngStream& stream, const std::string& path, int cols = 10);

}  // namespace ivae
