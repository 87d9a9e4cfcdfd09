#include "ecgseg/checkpoint.h"

#include "ecgseg/errors.h"

#include <array>
#include <bit>
#include <cstring>
#include <fstream>
#include <istream>
#include <map>
#include <ostream>
#include <span>
#include <type_traits>

namespace ecgseg {

namespace {

constexpr std::array<char, 8> kMagic{'E', 'C', 'G', 'S', 'E', 'G', 'C', 'K'};
constexpr std::uint32_t kVersion = 1;

template <typename T>
void put(std::ostream& out, T v) {
    static_assert(std::is_integral_v<T>);
    for (std::size_t i = 0; i < sizeof(T); ++i) {
        out.put(static_cast<char>((static_cast<std::uint64_t>(v) >> (8 * i)) & 0xFF));
    }
}

void put_f64(std::ostream& out, double v) { put(out, std::bit_cast<std::uint64_t>(v)); }

template <typename T>
T get(std::istream& in) {
    static_assert(std::is_integral_v<T>);
    std::uint64_t v = 0;
    for (std::size_t i = 0; i < sizeof(T); ++i) {
        const int c = in.get();
        if (c == std::char_traits<char>::eof()) {
            throw CheckpointError("checkpoint truncated");
        }
        v |= static_cast<std::uint64_t>(static_cast<unsigned char>(c)) << (8 * i);
    }
    return static_cast<T>(v);
}

double get_f64(std::istream& in) { return std::bit_cast<double>(get<std::uint64_t>(in)); }

void put_blob(std::ostream& out, const std::string& name, std::size_t d0, std::size_t d1, std::size_t d2,
              std::span<const double> values) {
    put<std::uint16_t>(out, static_cast<std::uint16_t>(name.size()));
    out.write(name.data(), static_cast<std::streamsize>(name.size()));
    put<std::uint32_t>(out, static_cast<std::uint32_t>(d0));
    put<std::uint32_t>(out, static_cast<std::uint32_t>(d1));
    put<std::uint32_t>(out, static_cast<std::uint32_t>(d2));
    for (double v : values) {
        put_f64(out, v);
    }
}

struct Blob {
    std::array<std::size_t, 3> shape{};
    std::vector<double> values;
};

struct RawCheckpoint {
    ModelConfig config;
    std::uint64_t step = 0;
    std::optional<nn::AdamConfig> adam;
    std::uint64_t adam_steps = 0;
    std::map<std::string, Blob> blobs;
};

RawCheckpoint read_raw(std::istream& in) {
    std::array<char, 8> magic{};
    in.read(magic.data(), magic.size());
    if (in.gcount() != static_cast<std::streamsize>(magic.size()) || magic != kMagic) {
        throw CheckpointError("not a checkpoint: bad magic bytes");
    }
    const auto version = get<std::uint32_t>(in);
    if (version != kVersion) {
        throw CheckpointError("unsupported checkpoint version " + std::to_string(version));
    }
    RawCheckpoint r;
    auto& c = r.config;
    for (auto& w : c.encoder_widths) {
        w = get<std::uint32_t>(in);
    }
    c.bottleneck_width = get<std::uint32_t>(in);
    c.n_classes = get<std::uint32_t>(in);
    c.conv_kernel = get<std::uint32_t>(in);
    c.conv_padding = get<std::uint32_t>(in);
    c.deconv_kernel = get<std::uint32_t>(in);
    c.deconv_stride = get<std::uint32_t>(in);
    c.deconv_padding = get<std::uint32_t>(in);
    c.final_kernel = get<std::uint32_t>(in);
    c.seed = get<std::uint64_t>(in);
    r.step = get<std::uint64_t>(in);
    const auto has_opt = get<std::uint8_t>(in);
    if (has_opt > 1) {
        throw CheckpointError("corrupt optimizer flag");
    }
    if (has_opt) {
        nn::AdamConfig a;
        a.learning_rate = get_f64(in);
        a.beta1 = get_f64(in);
        a.beta2 = get_f64(in);
        a.epsilon = get_f64(in);
        r.adam = a;
        r.adam_steps = get<std::uint64_t>(in);
    }
    const auto count = get<std::uint32_t>(in);
    for (std::uint32_t i = 0; i < count; ++i) {
        const auto len = get<std::uint16_t>(in);
        std::string name(len, '\0');
        in.read(name.data(), len);
        if (in.gcount() != len) {
            throw CheckpointError("checkpoint truncated in blob name");
        }
        Blob b;
        for (auto& d : b.shape) {
            d = get<std::uint32_t>(in);
        }
        const std::size_t n = b.shape[0] * b.shape[1] * b.shape[2];
        if (n > (std::size_t{1} << 32)) {
            throw CheckpointError("blob " + name + " is implausibly large");
        }
        b.values.resize(n);
        for (double& v : b.values) {
            v = get_f64(in);
        }
        if (!r.blobs.emplace(name, std::move(b)).second) {
            throw CheckpointError("duplicate blob " + name);
        }
    }
    return r;
}

std::string shape_str(const std::array<std::size_t, 3>& s) {
    return "(" + std::to_string(s[0]) + ", " + std::to_string(s[1]) + ", " + std::to_string(s[2]) + ")";
}

void apply(RawCheckpoint& r, UNet& model, nn::Adam* optimizer) {
    for (Parameter* p : model.parameters()) {
        const auto it = r.blobs.find(p->name);
        if (it == r.blobs.end()) {
            throw CheckpointError("checkpoint incompatible: missing " + p->name);
        }
        const std::array<std::size_t, 3> want{p->value.batch(), p->value.channels(), p->value.length()};
        if (it->second.shape != want) {
            throw CheckpointError("checkpoint incompatible: " + p->name + " has shape " + shape_str(it->second.shape) +
                                  ", model expects " + shape_str(want));
        }
        std::copy(it->second.values.begin(), it->second.values.end(), p->value.values().begin());
    }
    for (const NamedBuffer& b : model.buffers()) {
        const auto it = r.blobs.find(b.name);
        if (it == r.blobs.end()) {
            throw CheckpointError("checkpoint incompatible: missing " + b.name);
        }
        if (it->second.values.size() != b.values->size()) {
            throw CheckpointError("checkpoint incompatible: " + b.name + " has " +
                                  std::to_string(it->second.values.size()) + " values, model expects " +
                                  std::to_string(b.values->size()));
        }
        *b.values = it->second.values;
    }
    if (!(r.config == model.config())) {
        throw CheckpointError("checkpoint incompatible: model configuration differs");
    }
    model.training_step = r.step;
    if (optimizer && r.adam) {
        std::map<std::string, nn::Adam::Moments> moments;
        for (Parameter* p : model.parameters()) {
            const auto m = r.blobs.find("adam.m:" + p->name);
            const auto v = r.blobs.find("adam.v:" + p->name);
            if (m == r.blobs.end() || v == r.blobs.end()) {
                continue;
            }
            const Tensor& t = p->value;
            nn::Adam::Moments mo{Tensor(t.batch(), t.channels(), t.length()), Tensor(t.batch(), t.channels(), t.length())};
            if (m->second.values.size() != t.size() || v->second.values.size() != t.size()) {
                throw CheckpointError("checkpoint incompatible: optimizer state for " + p->name);
            }
            std::copy(m->second.values.begin(), m->second.values.end(), mo.first.values().begin());
            std::copy(v->second.values.begin(), v->second.values.end(), mo.second.values().begin());
            moments.emplace(p->name, std::move(mo));
        }
        *optimizer = nn::Adam(*r.adam);
        optimizer->restore(r.adam_steps, std::move(moments));
    }
}

} // namespace

void save_checkpoint(std::ostream& out, const UNet& model, const nn::Adam* optimizer) {
    out.write(kMagic.data(), kMagic.size());
    put<std::uint32_t>(out, kVersion);
    const auto& c = model.config();
    for (auto w : c.encoder_widths) {
        put<std::uint32_t>(out, static_cast<std::uint32_t>(w));
    }
    for (auto v : {c.bottleneck_width, c.n_classes, c.conv_kernel, c.conv_padding, c.deconv_kernel, c.deconv_stride,
                   c.deconv_padding, c.final_kernel}) {
        put<std::uint32_t>(out, static_cast<std::uint32_t>(v));
    }
    put<std::uint64_t>(out, c.seed);
    put<std::uint64_t>(out, model.training_step);
    put<std::uint8_t>(out, optimizer ? 1 : 0);
    if (optimizer) {
        const auto& a = optimizer->config();
        put_f64(out, a.learning_rate);
        put_f64(out, a.beta1);
        put_f64(out, a.beta2);
        put_f64(out, a.epsilon);
        put<std::uint64_t>(out, optimizer->steps());
    }

    auto& mut = const_cast<UNet&>(model);
    const auto params = model.parameters();
    const auto buffers = mut.buffers();
    std::size_t count = params.size() + buffers.size();
    if (optimizer) {
        count += 2 * optimizer->moments().size();
    }
    put<std::uint32_t>(out, static_cast<std::uint32_t>(count));
    for (const Parameter* p : params) {
        put_blob(out, p->name, p->value.batch(), p->value.channels(), p->value.length(), p->value.values());
    }
    for (const NamedBuffer& b : buffers) {
        put_blob(out, b.name, 1, 1, b.values->size(), *b.values);
    }
    if (optimizer) {
        for (const auto& [name, m] : optimizer->moments()) {
            put_blob(out, "adam.m:" + name, m.first.batch(), m.first.channels(), m.first.length(), m.first.values());
            put_blob(out, "adam.v:" + name, m.second.batch(), m.second.channels(), m.second.length(),
                     m.second.values());
        }
    }
    if (!out) {
        throw CheckpointError("failed to write checkpoint");
    }
}

void save_checkpoint(const std::filesystem::path& path, const UNet& model, const nn::Adam* optimizer) {
    const auto tmp = path.string() + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary);
        if (!out) {
            throw CheckpointError("cannot write " + tmp);
        }
        save_checkpoint(out, model, optimizer);
    }
    std::filesystem::rename(tmp, path);
}

Checkpoint load_checkpoint(std::istream& in) {
    RawCheckpoint raw = read_raw(in);
    try {
        raw.config.validate();
    } catch (const std::invalid_argument& e) {
        throw CheckpointError(std::string("checkpoint holds an invalid config: ") + e.what());
    }
    Checkpoint ck{UNet(raw.config), std::nullopt};
    if (raw.adam) {
        ck.optimizer.emplace(*raw.adam);
    }
    apply(raw, ck.model, ck.optimizer ? &*ck.optimizer : nullptr);
    return ck;
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw CheckpointError("cannot open " + path.string());
    }
    return load_checkpoint(in);
}

void load_weights_into(std::istream& in, UNet& model) {
    RawCheckpoint raw = read_raw(in);
    apply(raw, model, nullptr);
}

} // namespace ecgseg
