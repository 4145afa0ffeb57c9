#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "ivae/image.hpp"
#include "ivae/params.hpp"

namespace ivae {

// ---- MNIST IDX -------------------------------------------------------------

// Parses an IDX3 image payload (big-endian magic 0x00000803 and dims).
// Pixel bytes are mapped to [0,1] by /255. Throws WrongMagic or
// TruncatedPayload.
ImageBatch parse_idx_images(const std::vector<std::uint8_t>& bytes);

// IDX1 labels (magic 0x00000801); values must lie in [0,9].
LabelBatch parse_idx_labels(const std::vector<std::uint8_t>& bytes);

std::vector<std::uint8_t> read_file(const std::string& path);

ImageBatch load_idx_images(const std::string& path);
LabelBatch load_idx_labels(const std::string& path);

// ---- PGM grids -------------------------------------------------------------

// Grid geometry for n images at the given column count: images are placed
// row-major with a 2-pixel white separator, no outer border, and the grid is
// min(cols, n) cells wide. Empty trailing cells are white.
struct GridGeometry {
    int cols = 0;
    int rows = 0;
    int width = 0;
    int height = 0;
};
GridGeometry grid_geometry(int n, int cols, int side);

// Renders the batch as binary PGM (P5, maxval 255). Pixels are clamped to
// [0,1], scaled by 255 and rounded half to even.
std::vector<std::uint8_t> render_grid(const ImageBatch& batch, int cols);
void write_grid(const ImageBatch& batch, int cols, const std::string& path);

// ---- Checkpoints -----------------------------------------------------------

enum class ModelKind : std::uint8_t {
    sigma_vae = 0,
    alpha_vae = 1,
    beta_vae = 2,
    bernoulli_vae = 3,
    deen = 4,
};

const char* model_kind_name(ModelKind kind);

struct HyperParams {
    double sigma = 0.0;
    double alpha = 0.0;
    double beta = 1.0;
};

// Full layer widths including input and output. For the energy model the
// decoder list is empty.
struct NetShape {
    std::uint32_t d = 0;
    std::uint32_t d_z = 0;
    std::vector<std::uint32_t> encoder_widths;
    std::vector<std::uint32_t> decoder_widths;
};

struct TrainMeta {
    std::uint64_t seed = 0;
    std::uint32_t epochs = 0;
    std::uint32_t batch_size = 0;
    double lr = 0.0;
};

struct Checkpoint {
    ModelKind kind = ModelKind::sigma_vae;
    HyperParams hyper;
    NetShape shape;
    TrainMeta meta;
    ParamStore<float> params;
};

// "IVAE" format, version 1: magic, u32 version, u8 kind, hypers as f64,
// shape as u32s, meta, then each named array as (name length, name, rank,
// dims, f32 little-endian data). Write→read→write is byte-exact.
std::vector<std::uint8_t> serialize_checkpoint(const Checkpoint& ckpt);
Checkpoint parse_checkpoint(const std::vector<std::uint8_t>& bytes);

void save_checkpoint(const Checkpoint& ckpt, const std::string& path);
Checkpoint load_checkpoint(const std::string& path);

// ---- CSV -------------------------------------------------------------------

struct CsvRow {
    std::string label;
    std::vector<double> values;
};

// Formats a real so the token parses back to the identical double.
std::string format_real(double x);

std::string render_csv(const std::vector<std::string>& header, const std::vector<CsvRow>& rows);
void write_csv(const std::vector<std::string>& header, const std::vector<CsvRow>& rows, const std::string& path);

// Minimal CSV reader for our own files: first line is the header, first
// column may be a string label, every other cell must parse as a real.
struct CsvTable {
    std::vector<std::string> header;
    std::vector<CsvRow> rows;
};
CsvTable read_csv(const std::string& path);

// ---- files -----------------------------------------------------------------

// Writes to <path>.tmp then renames, so partial files never appear.
void atomic_write_file(const std::string& path, const void* data, std::size_t size);
void atomic_write_file(const std::string& path, const std::vector<std::uint8_t>& bytes);
void atomic_write_file(const std::string& path, const std::string& text);

}  // namespace ivae
