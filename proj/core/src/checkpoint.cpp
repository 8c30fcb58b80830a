#include "histokit/checkpoint.hpp"

#include <cstring>
#include <fstream>

#include <nlohmann/json.hpp>

namespace histokit::io {

using nlohmann::json;
using nn::LayerSpec;

namespace {

json layer_to_json(const LayerSpec& l) {
    json j;
    j["kind"] = nn::layer_kind_name(l.kind);
    switch (l.kind) {
        case LayerSpec::Kind::Conv2D:
            j["filters"] = l.filters;
            j["kernel_size"] = l.kernel_size;
            j["activation"] = nn::activation_name(l.activation);
            break;
        case LayerSpec::Kind::MaxPool2D:
            j["window"] = l.window;
            break;
        case LayerSpec::Kind::Dense:
            j["units"] = l.units;
            j["activation"] = nn::activation_name(l.activation);
            break;
        case LayerSpec::Kind::Dropout:
            j["rate"] = l.rate;
            break;
        case LayerSpec::Kind::Residual: {
            json inner = json::array();
            for (const LayerSpec& in : l.inner) inner.push_back(layer_to_json(in));
            j["inner"] = std::move(inner);
            break;
        }
        case LayerSpec::Kind::LstmCell:
        case LayerSpec::Kind::GruCell:
            j["units"] = l.units;
            break;
        case LayerSpec::Kind::SoftmaxOutput:
            j["classes"] = l.classes;
            break;
        case LayerSpec::Kind::Upsample2D:
            j["factor"] = l.factor;
            break;
        case LayerSpec::Kind::Reshape:
            j["shape"] = l.target_shape;
            break;
        case LayerSpec::Kind::Flatten:
            break;
    }
    return j;
}

LayerSpec layer_from_json(const json& j) {
    const std::string kind = j.at("kind").get<std::string>();
    if (kind == "conv2d") {
        return LayerSpec::conv2d(j.at("filters").get<int>(), j.at("kernel_size").get<int>(),
                                 nn::activation_from_name(j.at("activation").get<std::string>()));
    }
    if (kind == "maxpool2d") return LayerSpec::maxpool2d(j.at("window").get<int>());
    if (kind == "dense") {
        return LayerSpec::dense(j.at("units").get<int>(),
                                nn::activation_from_name(j.at("activation").get<std::string>()));
    }
    if (kind == "flatten") return LayerSpec::flatten();
    if (kind == "dropout") return LayerSpec::dropout(j.at("rate").get<float>());
    if (kind == "residual") {
        std::vector<LayerSpec> inner;
        for (const json& in : j.at("inner")) inner.push_back(layer_from_json(in));
        return LayerSpec::residual(std::move(inner));
    }
    if (kind == "lstm") return LayerSpec::lstm_cell(j.at("units").get<int>());
    if (kind == "gru") return LayerSpec::gru_cell(j.at("units").get<int>());
    if (kind == "softmax_output") return LayerSpec::softmax_output(j.at("classes").get<int>());
    if (kind == "upsample2d") return LayerSpec::upsample2d(j.at("factor").get<int>());
    if (kind == "reshape") return LayerSpec::reshape(j.at("shape").get<std::vector<int>>());
    throw FormatError("unknown layer kind in checkpoint: " + kind);
}

void put_u32(std::string& out, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

void put_u64(std::string& out, std::uint64_t v) {
    for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

void put_f32(std::string& out, float f) {
    std::uint32_t bits = 0;
    std::memcpy(&bits, &f, 4);
    put_u32(out, bits);
}

class Reader {
public:
    Reader(const std::string& data, const std::string& path) : data_(data), path_(path) {}

    std::uint32_t u32() {
        need(4);
        std::uint32_t v = 0;
        for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(static_cast<unsigned char>(data_[pos_ + static_cast<std::size_t>(i)])) << (8 * i);
        pos_ += 4;
        return v;
    }

    std::uint64_t u64() {
        need(8);
        std::uint64_t v = 0;
        for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(static_cast<unsigned char>(data_[pos_ + static_cast<std::size_t>(i)])) << (8 * i);
        pos_ += 8;
        return v;
    }

    float f32() {
        const std::uint32_t bits = u32();
        float f = 0;
        std::memcpy(&f, &bits, 4);
        return f;
    }

    std::uint8_t u8() {
        need(1);
        return static_cast<std::uint8_t>(data_[pos_++]);
    }

    std::string bytes(std::size_t n) {
        need(n);
        std::string s = data_.substr(pos_, n);
        pos_ += n;
        return s;
    }

    bool done() const { return pos_ == data_.size(); }

private:
    void need(std::size_t n) {
        if (pos_ + n > data_.size()) throw FormatError(path_ + ": truncated checkpoint");
    }
    const std::string& data_;
    std::string path_;
    std::size_t pos_ = 0;
};

void put_tensor_block(std::string& out, const nn::Parameters& params) {
    const auto tensors = nn::tensor_list(params);
    put_u64(out, tensors.size());
    for (const Tensor* t : tensors) {
        put_u32(out, static_cast<std::uint32_t>(t->shape.size()));
        for (const int d : t->shape) put_u32(out, static_cast<std::uint32_t>(d));
        for (const float v : t->data) put_f32(out, v);
    }
}

// Reads a tensor block into the (already shaped) parameter tree.
void read_tensor_block(Reader& r, nn::Parameters& params, const std::string& path) {
    auto tensors = nn::tensor_list(params);
    const std::uint64_t count = r.u64();
    if (count != tensors.size()) {
        throw FormatError(path + ": tensor count " + std::to_string(count) + " does not match spec (" +
                          std::to_string(tensors.size()) + ")");
    }
    for (Tensor* t : tensors) {
        const std::uint32_t rank = r.u32();
        if (rank != t->shape.size()) throw FormatError(path + ": tensor rank mismatch");
        for (const int d : t->shape) {
            if (r.u32() != static_cast<std::uint32_t>(d)) {
                throw FormatError(path + ": tensor shape mismatch");
            }
        }
        for (float& v : t->data) v = r.f32();
    }
}

json optimizer_to_json(const optim::OptimizerState& st) {
    json j;
    j["kind"] = optim::optimizer_kind_name(st.config.kind);
    j["lr"] = st.config.lr;
    j["momentum"] = st.config.momentum;
    j["beta1"] = st.config.beta1;
    j["beta2"] = st.config.beta2;
    j["decay"] = st.config.decay;
    j["eps"] = st.config.eps;
    j["t"] = st.t;
    return j;
}

optim::OptimizerConfig optimizer_config_from_json(const json& j) {
    optim::OptimizerConfig c;
    c.kind = optim::optimizer_kind_from_name(j.at("kind").get<std::string>());
    c.lr = j.at("lr").get<double>();
    c.momentum = j.at("momentum").get<double>();
    c.beta1 = j.at("beta1").get<double>();
    c.beta2 = j.at("beta2").get<double>();
    c.decay = j.at("decay").get<double>();
    c.eps = j.at("eps").get<double>();
    return c;
}

}  // namespace

std::string network_spec_to_json(const nn::NetworkSpec& spec) {
    json j;
    j["input_shape"] = spec.input_shape;
    json layers = json::array();
    for (const LayerSpec& l : spec.layers) layers.push_back(layer_to_json(l));
    j["layers"] = std::move(layers);
    return j.dump();
}

nn::NetworkSpec network_spec_from_json(const std::string& json_text) {
    json j;
    try {
        j = json::parse(json_text);
    } catch (const json::exception& e) {
        throw FormatError(std::string("bad network spec json: ") + e.what());
    }
    nn::NetworkSpec spec;
    spec.input_shape = j.at("input_shape").get<std::vector<int>>();
    for (const json& l : j.at("layers")) spec.layers.push_back(layer_from_json(l));
    return spec;
}

void save_checkpoint(const Checkpoint& checkpoint, const std::string& path) {
    std::string out;
    out.append(kCheckpointMagic, sizeof(kCheckpointMagic));
    put_u32(out, kCheckpointVersion);

    const std::string spec_json = network_spec_to_json(checkpoint.spec);
    put_u64(out, spec_json.size());
    out += spec_json;

    put_tensor_block(out, checkpoint.params);

    if (checkpoint.optimizer) {
        out.push_back(1);
        const std::string opt_json = optimizer_to_json(*checkpoint.optimizer).dump();
        put_u64(out, opt_json.size());
        out += opt_json;
        put_tensor_block(out, checkpoint.optimizer->aux1);
        put_tensor_block(out, checkpoint.optimizer->aux2);
    } else {
        out.push_back(0);
    }

    std::ofstream f(path, std::ios::binary);
    if (!f) throw FormatError("cannot write checkpoint " + path);
    f.write(out.data(), static_cast<std::streamsize>(out.size()));
    if (!f) throw FormatError("failed writing checkpoint " + path);
}

Checkpoint load_checkpoint(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw FormatError("cannot open checkpoint " + path);
    std::string data((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
    Reader r(data, path);

    const std::string magic = r.bytes(sizeof(kCheckpointMagic));
    if (std::memcmp(magic.data(), kCheckpointMagic, sizeof(kCheckpointMagic)) != 0) {
        throw FormatError(path + ": not a checkpoint (bad magic)");
    }
    const std::uint32_t version = r.u32();
    if (version != kCheckpointVersion) {
        throw FormatError(path + ": unsupported checkpoint version " + std::to_string(version) +
                          " (expected " + std::to_string(kCheckpointVersion) + ")");
    }

    Checkpoint ck;
    const std::uint64_t spec_len = r.u64();
    ck.spec = network_spec_from_json(r.bytes(spec_len));

    // Shape the tree from the spec, then fill values.
    ck.params = nn::init_parameters(ck.spec, 0);
    nn::for_each_tensor(ck.params, [](Tensor& t) { t.fill(0.0f); });
    read_tensor_block(r, ck.params, path);

    if (r.u8() == 1) {
        const std::uint64_t opt_len = r.u64();
        json j;
        try {
            j = json::parse(r.bytes(opt_len));
        } catch (const json::exception& e) {
            throw FormatError(path + ": bad optimizer json: " + e.what());
        }
        optim::OptimizerState st = optim::make_optimizer_state(optimizer_config_from_json(j), ck.params);
        st.t = j.at("t").get<long long>();
        read_tensor_block(r, st.aux1, path);
        read_tensor_block(r, st.aux2, path);
        ck.optimizer = std::move(st);
    }
    if (!r.done()) throw FormatError(path + ": trailing bytes after checkpoint payload");
    return ck;
}

}  // namespace histokit::io
