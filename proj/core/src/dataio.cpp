#include "ivae/dataio.hpp"

#include <cmath>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>

namespace ivae {

namespace {

std::uint32_t read_be_u32(const std::vector<std::uint8_t>& bytes, std::size_t off) {
    if (off + 4 > bytes.size()) throw TruncatedPayload("IDX header truncated");
    return (std::uint32_t(bytes[off]) << 24) | (std::uint32_t(bytes[off + 1]) << 16) |
           (std::uint32_t(bytes[off + 2]) << 8) | std::uint32_t(bytes[off + 3]);
}

constexpr std::uint32_t kIdxImagesMagic = 0x00000803u;
constexpr std::uint32_t kIdxLabelsMagic = 0x00000801u;

}  // namespace

ImageBatch parse_idx_images(const std::vector<std::uint8_t>& bytes) {
    const std::uint32_t magic = read_be_u32(bytes, 0);
    if (magic != kIdxImagesMagic) {
        throw WrongMagic("IDX images: magic 0x" + std::to_string(magic) + ", expected 0x00000803");
    }
    const std::uint32_t count = read_be_u32(bytes, 4);
    const std::uint32_t rows = read_be_u32(bytes, 8);
    const std::uint32_t cols = read_be_u32(bytes, 12);
    const std::size_t need = 16 + std::size_t(count) * rows * cols;
    if (bytes.size() < need) {
        throw TruncatedPayload("IDX images: declared " + std::to_string(need) + " bytes, have " +
                               std::to_string(bytes.size()));
    }
    ImageBatch out;
    out.side = static_cast<int>(rows);
    out.data = Matrix<float>(static_cast<int>(count), static_cast<int>(rows * cols));
    const std::uint8_t* p = bytes.data() + 16;
    for (std::size_t k = 0; k < out.data.size(); ++k) out.data.v[k] = static_cast<float>(p[k]) / 255.0f;
    return out;
}

LabelBatch parse_idx_labels(const std::vector<std::uint8_t>& bytes) {
    const std::uint32_t magic = read_be_u32(bytes, 0);
    if (magic != kIdxLabelsMagic) {
        throw WrongMagic("IDX labels: magic 0x" + std::to_string(magic) + ", expected 0x00000801");
    }
    const std::uint32_t count = read_be_u32(bytes, 4);
    if (bytes.size() < 8 + std::size_t(count)) throw TruncatedPayload("IDX labels: payload shorter than count");
    LabelBatch out;
    out.labels.reserve(count);
    for (std::uint32_t i = 0; i < count; ++i) {
        const int v = bytes[8 + i];
        if (v > 9) throw LabelOutOfRange("IDX labels: value " + std::to_string(v) + " at index " + std::to_string(i));
        out.labels.push_back(v);
    }
    return out;
}

std::vector<std::uint8_t> read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoFailure("cannot open " + path);
    std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return bytes;
}

ImageBatch load_idx_images(const std::string& path) { return parse_idx_images(read_file(path)); }
LabelBatch load_idx_labels(const std::string& path) { return parse_idx_labels(read_file(path)); }

GridGeometry grid_geometry(int n, int cols, int side) {
    GridGeometry g;
    g.cols = cols < n ? cols : n;
    if (g.cols < 1) g.cols = 1;
    g.rows = (n + g.cols - 1) / g.cols;
    if (g.rows < 1) g.rows = 1;
    g.width = g.cols * side + 2 * (g.cols - 1);
    g.height = g.rows * side + 2 * (g.rows - 1);
    return g;
}

namespace {

std::uint8_t pixel_byte(float v) {
    float c = v;
    if (c < 0.0f) c = 0.0f;
    if (c > 1.0f) c = 1.0f;
    // nearbyint under the default FP environment rounds half to even.
    return static_cast<std::uint8_t>(std::nearbyint(c * 255.0f));
}

}  // namespace

std::vector<std::uint8_t> render_grid(const ImageBatch& batch, int cols) {
    const int side = batch.side;
    const GridGeometry g = grid_geometry(batch.count(), cols, side);
    std::string header = "P5\n" + std::to_string(g.width) + " " + std::to_string(g.height) + "\n255\n";
    std::vector<std::uint8_t> out(header.size() + std::size_t(g.width) * g.height, 255);
    std::memcpy(out.data(), header.data(), header.size());
    std::uint8_t* canvas = out.data() + header.size();
    for (int i = 0; i < batch.count(); ++i) {
        const int cell_r = i / g.cols;
        const int cell_c = i % g.cols;
        const int y0 = cell_r * (side + 2);
        const int x0 = cell_c * (side + 2);
        const float* img = batch.data.row(i);
        for (int r = 0; r < side; ++r) {
            std::uint8_t* dst = canvas + std::size_t(y0 + r) * g.width + x0;
            for (int c = 0; c < side; ++c) dst[c] = pixel_byte(img[r * side + c]);
        }
    }
    return out;
}

void write_grid(const ImageBatch& batch, int cols, const std::string& path) {
    atomic_write_file(path, render_grid(batch, cols));
}

const char* model_kind_name(ModelKind kind) {
    switch (kind) {
        case ModelKind::sigma_vae: return "sigma_vae";
        case ModelKind::alpha_vae: return "alpha_vae";
        case ModelKind::beta_vae: return "beta_vae";
        case ModelKind::bernoulli_vae: return "bernoulli_vae";
        case ModelKind::deen: return "deen";
    }
    return "unknown";
}

namespace {

// Little-endian scalar writers/readers for the checkpoint format.
void put_u32(std::vector<std::uint8_t>& out, std::uint32_t x) {
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(x >> (8 * i)));
}

void put_u64(std::vector<std::uint8_t>& out, std::uint64_t x) {
    for (int i = 0; i < 8; ++i) out.push_back(static_cast<std::uint8_t>(x >> (8 * i)));
}

void put_f64(std::vector<std::uint8_t>& out, double x) {
    std::uint64_t bits;
    std::memcpy(&bits, &x, 8);
    put_u64(out, bits);
}

void put_f32(std::vector<std::uint8_t>& out, float x) {
    std::uint32_t bits;
    std::memcpy(&bits, &x, 4);
    put_u32(out, bits);
}

struct Reader {
    const std::vector<std::uint8_t>& bytes;
    std::size_t off = 0;

    void need(std::size_t n) const {
        if (off + n > bytes.size()) throw CorruptArray("checkpoint truncated at offset " + std::to_string(off));
    }
    std::uint8_t u8() {
        need(1);
        return bytes[off++];
    }
    std::uint32_t u32() {
        need(4);
        std::uint32_t x = 0;
        for (int i = 0; i < 4; ++i) x |= std::uint32_t(bytes[off + i]) << (8 * i);
        off += 4;
        return x;
    }
    std::uint64_t u64() {
        need(8);
        std::uint64_t x = 0;
        for (int i = 0; i < 8; ++i) x |= std::uint64_t(bytes[off + i]) << (8 * i);
        off += 8;
        return x;
    }
    double f64() {
        const std::uint64_t bits = u64();
        double x;
        std::memcpy(&x, &bits, 8);
        return x;
    }
    float f32() {
        const std::uint32_t bits = u32();
        float x;
        std::memcpy(&x, &bits, 4);
        return x;
    }
    std::string str(std::size_t n) {
        need(n);
        std::string s(reinterpret_cast<const char*>(bytes.data() + off), n);
        off += n;
        return s;
    }
};

}  // namespace

std::vector<std::uint8_t> serialize_checkpoint(const Checkpoint& ckpt) {
    std::vector<std::uint8_t> out;
    out.insert(out.end(), {'I', 'V', 'A', 'E'});
    put_u32(out, 1u);
    out.push_back(static_cast<std::uint8_t>(ckpt.kind));
    put_f64(out, ckpt.hyper.sigma);
    put_f64(out, ckpt.hyper.alpha);
    put_f64(out, ckpt.hyper.beta);
    put_u32(out, ckpt.shape.d);
    put_u32(out, ckpt.shape.d_z);
    put_u32(out, static_cast<std::uint32_t>(ckpt.shape.encoder_widths.size()));
    for (auto w : ckpt.shape.encoder_widths) put_u32(out, w);
    put_u32(out, static_cast<std::uint32_t>(ckpt.shape.decoder_widths.size()));
    for (auto w : ckpt.shape.decoder_widths) put_u32(out, w);
    put_u64(out, ckpt.meta.seed);
    put_u32(out, ckpt.meta.epochs);
    put_u32(out, ckpt.meta.batch_size);
    put_f64(out, ckpt.meta.lr);
    put_u32(out, static_cast<std::uint32_t>(ckpt.params.count()));
    for (int i = 0; i < ckpt.params.count(); ++i) {
        const std::string& name = ckpt.params.name(i);
        const Matrix<float>& m = ckpt.params.value(i);
        put_u32(out, static_cast<std::uint32_t>(name.size()));
        out.insert(out.end(), name.begin(), name.end());
        put_u32(out, 2u);  // rank: all arrays are matrices (vectors are 1×n)
        put_u32(out, static_cast<std::uint32_t>(m.rows));
        put_u32(out, static_cast<std::uint32_t>(m.cols));
        for (float x : m.v) put_f32(out, x);
    }
    return out;
}

Checkpoint parse_checkpoint(const std::vector<std::uint8_t>& bytes) {
    Reader r{bytes};
    const std::string magic = r.str(4);
    if (magic != "IVAE") throw BadMagic("checkpoint magic \"" + magic + "\", expected \"IVAE\"");
    const std::uint32_t version = r.u32();
    if (version != 1) throw UnsupportedVersion("checkpoint version " + std::to_string(version));
    Checkpoint ckpt;
    const std::uint8_t kind = r.u8();
    if (kind > 4) throw CorruptArray("checkpoint model kind " + std::to_string(kind));
    ckpt.kind = static_cast<ModelKind>(kind);
    ckpt.hyper.sigma = r.f64();
    ckpt.hyper.alpha = r.f64();
    ckpt.hyper.beta = r.f64();
    ckpt.shape.d = r.u32();
    ckpt.shape.d_z = r.u32();
    const std::uint32_t ne = r.u32();
    for (std::uint32_t i = 0; i < ne; ++i) ckpt.shape.encoder_widths.push_back(r.u32());
    const std::uint32_t nd = r.u32();
    for (std::uint32_t i = 0; i < nd; ++i) ckpt.shape.decoder_widths.push_back(r.u32());
    ckpt.meta.seed = r.u64();
    ckpt.meta.epochs = r.u32();
    ckpt.meta.batch_size = r.u32();
    ckpt.meta.lr = r.f64();
    const std::uint32_t arrays = r.u32();
    for (std::uint32_t i = 0; i < arrays; ++i) {
        const std::uint32_t name_len = r.u32();
        const std::string name = r.str(name_len);
        const std::uint32_t rank = r.u32();
        if (rank != 2) throw CorruptArray("checkpoint array " + name + ": rank " + std::to_string(rank));
        const std::uint32_t rows = r.u32();
        const std::uint32_t cols = r.u32();
        Matrix<float> m(static_cast<int>(rows), static_cast<int>(cols));
        for (std::size_t k = 0; k < m.size(); ++k) m.v[k] = r.f32();
        ckpt.params.add(name, std::move(m));
    }
    return ckpt;
}

void save_checkpoint(const Checkpoint& ckpt, const std::string& path) {
    atomic_write_file(path, serialize_checkpoint(ckpt));
}

Checkpoint load_checkpoint(const std::string& path) { return parse_checkpoint(read_file(path)); }

std::string format_real(double x) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", x);
    return buf;
}

std::string render_csv(const std::vector<std::string>& header, const std::vector<CsvRow>& rows) {
    std::string out;
    for (std::size_t i = 0; i < header.size(); ++i) {
        if (i) out += ',';
        out += header[i];
    }
    out += '\n';
    for (const auto& row : rows) {
        out += row.label;
        for (double v : row.values) {
            out += ',';
            out += format_real(v);
        }
        out += '\n';
    }
    return out;
}

void write_csv(const std::vector<std::string>& header, const std::vector<CsvRow>& rows, const std::string& path) {
    atomic_write_file(path, render_csv(header, rows));
}

CsvTable read_csv(const std::string& path) {
    const auto bytes = read_file(path);
    std::string text(bytes.begin(), bytes.end());
    CsvTable table;
    std::size_t pos = 0;
    bool first = true;
    while (pos < text.size()) {
        std::size_t end = text.find('\n', pos);
        if (end == std::string::npos) end = text.size();
        std::string line = text.substr(pos, end - pos);
        pos = end + 1;
        if (line.empty()) continue;
        std::vector<std::string> cells;
        std::size_t c = 0;
        while (true) {
            std::size_t comma = line.find(',', c);
            if (comma == std::string::npos) {
                cells.push_back(line.substr(c));
                break;
            }
            cells.push_back(line.substr(c, comma - c));
            c = comma + 1;
        }
        if (first) {
            table.header = cells;
            first = false;
            continue;
        }
        CsvRow row;
        row.label = cells.empty() ? "" : cells[0];
        for (std::size_t i = 1; i < cells.size(); ++i) {
            try {
                row.values.push_back(std::stod(cells[i]));
            } catch (const std::exception&) {
                throw IoFailure(path + ": cell \"" + cells[i] + "\" is not a real");
            }
        }
        table.rows.push_back(std::move(row));
    }
    return table;
}

void atomic_write_file(const std::string& path, const void* data, std::size_t size) {
    namespace fs = std::filesystem;
    const fs::path target(path);
    if (target.has_parent_path()) {
        std::error_code ec;
        fs::create_directories(target.parent_path(), ec);
    }
    const std::string tmp = path + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw IoFailure("cannot open " + tmp + " for writing");
        out.write(static_cast<const char*>(data), static_cast<std::streamsize>(size));
        if (!out) throw IoFailure("short write to " + tmp);
    }
    std::error_code ec;
    fs::rename(tmp, target, ec);
    if (ec) throw IoFailure("rename " + tmp + " -> " + path + ": " + ec.message());
}

void atomic_write_file(const std::string& path, const std::vector<std::uint8_t>& bytes) {
    atomic_write_file(path, bytes.data(), bytes.size());
}

void atomic_write_file(const std::string& path, const std::string& text) {
    atomic_write_file(path, text.data(), text.size());
}

}  // namespace ivae
