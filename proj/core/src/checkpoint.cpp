#include "coge/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <map>
#include <sstream>

#include "coge/dataset_io.hpp"

namespace coge {
namespace {

constexpr char kMagic[8] = {'C', 'O', 'G', 'E', 'G', 'C', 'N', '\0'};

static_assert(std::endian::native == std::endian::little,
              "checkpoint I/O assumes a little-endian host");

void put_u32(std::string& out, std::uint32_t x) {
    char buf[4];
    std::memcpy(buf, &x, 4);
    out.append(buf, 4);
}

void put_tensor(std::string& out, const std::string& name, const double* data, Eigen::Index rows,
                Eigen::Index cols) {
    put_u32(out, static_cast<std::uint32_t>(name.size()));
    out += name;
    put_u32(out, static_cast<std::uint32_t>(rows));
    put_u32(out, static_cast<std::uint32_t>(cols));
    out.append(reinterpret_cast<const char*>(data),
               static_cast<std::size_t>(rows * cols) * sizeof(double));
}

class Reader {
public:
    explicit Reader(const std::string& bytes) : bytes_(bytes) {}

    void read(void* dst, std::size_t n) {
        if (pos_ + n > bytes_.size()) {
            throw CheckpointError("checkpoint truncated at byte " + std::to_string(pos_));
        }
        std::memcpy(dst, bytes_.data() + pos_, n);
        pos_ += n;
    }

    std::uint32_t u32() {
        std::uint32_t x = 0;
        read(&x, 4);
        return x;
    }

    bool done() const { return pos_ == bytes_.size(); }

private:
    const std::string& bytes_;
    std::size_t pos_ = 0;
};

}  // namespace

std::string model_to_bytes(const GcnModel& model) {
    std::string out(kMagic, sizeof(kMagic));
    put_u32(out, kCheckpointVersion);
    put_u32(out, static_cast<std::uint32_t>(model.propagation));
    put_u32(out, static_cast<std::uint32_t>(model.conv.size() + 2));
    for (std::size_t i = 0; i < model.conv.size(); ++i) {
        const Matrix& w = model.conv[i];
        put_tensor(out, "conv" + std::to_string(i) + ".weight", w.data(), w.rows(), w.cols());
    }
    const DenseLayer& c = model.classifier;
    put_tensor(out, "classifier.weight", c.weight.data(), c.weight.rows(), c.weight.cols());
    put_tensor(out, "classifier.bias", c.bias.data(), 1, c.bias.size());
    return out;
}

GcnModel model_from_bytes(const std::string& bytes) {
    Reader in(bytes);
    char magic[8];
    in.read(magic, sizeof(magic));
    if (std::memcmp(magic, kMagic, sizeof(kMagic)) != 0) {
        throw CheckpointError("not a coge checkpoint (bad magic)");
    }
    const std::uint32_t version = in.u32();
    if (version != kCheckpointVersion) {
        throw CheckpointError("unsupported checkpoint version " + std::to_string(version) +
                              " (expected " + std::to_string(kCheckpointVersion) + ")");
    }
    const std::uint32_t propagation = in.u32();
    if (propagation > static_cast<std::uint32_t>(Propagation::degree_scaled)) {
        throw CheckpointError("unknown propagation code " + std::to_string(propagation));
    }
    const std::uint32_t count = in.u32();
    if (count < 3 || count > 1024) {
        throw CheckpointError("corrupt tensor count " + std::to_string(count));
    }
    std::map<std::string, Matrix> tensors;
    for (std::uint32_t t = 0; t < count; ++t) {
        const std::uint32_t name_len = in.u32();
        if (name_len > 256) {
            throw CheckpointError("corrupt tensor name length");
        }
        std::string name(name_len, '\0');
        in.read(name.data(), name_len);
        const std::uint32_t rows = in.u32();
        const std::uint32_t cols = in.u32();
        if (static_cast<std::uint64_t>(rows) * cols > (1u << 24)) {
            throw CheckpointError("corrupt tensor shape for " + name);
        }
        Matrix m(rows, cols);
        in.read(m.data(), static_cast<std::size_t>(rows) * cols * sizeof(double));
        tensors.emplace(std::move(name), std::move(m));
    }
    if (!in.done()) {
        throw CheckpointError("trailing bytes after last tensor");
    }

    auto take = [&](const std::string& name) -> Matrix& {
        auto it = tensors.find(name);
        if (it == tensors.end()) {
            throw CheckpointError("missing tensor " + name);
        }
        return it->second;
    };
    GcnModel model;
    model.propagation = static_cast<Propagation>(propagation);
    const std::size_t layers = count - 2;
    for (std::size_t i = 0; i < layers; ++i) {
        model.conv.push_back(take("conv" + std::to_string(i) + ".weight"));
        if (i > 0 && model.conv[i].rows() != model.conv[i - 1].cols()) {
            throw CheckpointError("layer shapes do not chain at conv" + std::to_string(i));
        }
    }
    model.classifier.weight = take("classifier.weight");
    const Matrix& bias = take("classifier.bias");
    if (bias.rows() != 1 || bias.cols() != model.classifier.weight.cols()) {
        throw CheckpointError("bias shape mismatch for classifier");
    }
    model.classifier.bias = bias.row(0);
    if (model.conv.empty() || model.classifier.weight.rows() != model.conv.back().cols()) {
        throw CheckpointError("classifier shape does not match last conv layer");
    }
    return model;
}

void save_model(const GcnModel& model, const std::filesystem::path& path) {
    write_file_atomically(path, model_to_bytes(model));
}

GcnModel load_model(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw CheckpointError("cannot open " + path.string());
    }
    std::ostringstream buffer;
    buffer << in.rdbuf();
    return model_from_bytes(buffer.str());
}

}  // namespace coge
