#include "preictal/model.hpp"

#include <cmath>
#include <cstring>
#include <fstream>

namespace preictal {

void ModelConfig::validate() const {
    if (in_channels <= 0) throw ConfigError("model: in_channels must be positive");
    for (int c : conv_channels)
        if (c <= 0) throw ConfigError("model: conv channels must be positive");
    if (!(conv_channels[0] < conv_channels[1] && conv_channels[1] < conv_channels[2]))
        throw ConfigError("model: conv_channels must be strictly increasing");
    if (kernel_h <= 0 || kernel_w <= 0) throw ConfigError("model: kernel dims must be positive");
    if (dropout_p < 0.0 || dropout_p >= 1.0) throw ConfigError("model: need 0 <= dropout < 1");
    if (se_reduction <= 0 || conv_channels[2] % se_reduction != 0)
        throw ConfigError("model: se_reduction must divide conv_channels[2] (" +
                          std::to_string(se_reduction) + " vs " + std::to_string(conv_channels[2]) + ")");
    if (dense_units <= 0) throw ConfigError("model: dense_units must be positive");
    int h = input_h, w = input_w;
    for (int i = 0; i < 3; ++i) {
        h /= 2;
        w /= 2;
    }
    if (h < 1 || w < 1) throw ConfigError("model: input too small for three pooling stages");
}

Var se_block(const Var& x, const Var& w1, const Var& b1, const Var& w2, const Var& b2,
             Tensor* attention_out, bool pin_ones) {
    const Var z = global_avg_pool2d(x);                    // squeeze
    const Var hidden = relu(linear(z, w1, b1));            // excitation bottleneck
    Var s = sigmoid(linear(hidden, w2, b2));
    if (pin_ones) s = constant(Tensor::full(s.value().shape(), 1.0));
    if (attention_out) *attention_out = s.value();
    return channelwise_mul(x, s);                          // recalibration
}

SeizurePredictor::SeizurePredictor(const ModelConfig& cfg) : cfg_(cfg) {
    cfg_.validate();
    auto add = [&](const std::string& name, Tensor t) {
        names_.push_back(name);
        params_.push_back(parameter(std::move(t)));
    };
    int cin = cfg_.in_channels;
    for (int i = 0; i < 3; ++i) {
        const int cout = cfg_.conv_channels[i];
        const std::string blk = "block" + std::to_string(i + 1);
        add(blk + ".conv.w", Tensor::zeros({cout, cin, cfg_.kernel_h, cfg_.kernel_w}));
        add(blk + ".conv.b", Tensor::zeros({cout}));
        add(blk + ".bn.gamma", Tensor::full({cout}, 1.0));
        add(blk + ".bn.beta", Tensor::zeros({cout}));
        bn_.emplace_back(cout);
        cin = cout;
    }
    const int c = cfg_.conv_channels[2];
    const int cr = c / cfg_.se_reduction;
    if (cfg_.use_attention) {
        add("se.w1", Tensor::zeros({c, cr}));
        add("se.b1", Tensor::zeros({cr}));
        add("se.w2", Tensor::zeros({cr, c}));
        add("se.b2", Tensor::zeros({c}));
    }
    int h = cfg_.input_h, w = cfg_.input_w;
    for (int i = 0; i < 3; ++i) {
        h /= 2;
        w /= 2;
    }
    const int flat = c * h * w;
    add("dense.w", Tensor::zeros({flat, cfg_.dense_units}));
    add("dense.b", Tensor::zeros({cfg_.dense_units}));
    add("out.w", Tensor::zeros({cfg_.dense_units, 1}));
    add("out.b", Tensor::zeros({1}));
}

SeizurePredictor SeizurePredictor::init(const ModelConfig& cfg, std::uint64_t seed) {
    SeizurePredictor m(cfg);
    Rng rng(seed);
    for (std::size_t i = 0; i < m.params_.size(); ++i) {
        const std::string& name = m.names_[i];
        Tensor& t = m.params_[i].value_mut();
        const bool is_weight = name.ends_with(".w") || name.ends_with(".w1") || name.ends_with(".w2");
        if (!is_weight) continue;  // biases zero, gamma/beta already 1/0
        std::size_t fan_in;
        if (t.ndim() == 4)
            fan_in = static_cast<std::size_t>(t.dim(1)) * t.dim(2) * t.dim(3);
        else
            fan_in = static_cast<std::size_t>(t.dim(0));
        const double bound = std::sqrt(6.0 / static_cast<double>(fan_in));  // He uniform
        for (double& v : t.vec()) v = rng.uniform(-bound, bound);
    }
    return m;
}

std::size_t SeizurePredictor::param_count() const {
    std::size_t n = 0;
    for (const Var& p : params_) n += p.value().size();
    return n;
}

Var* SeizurePredictor::param(const std::string& name) {
    for (std::size_t i = 0; i < names_.size(); ++i)
        if (names_[i] == name) return &params_[i];
    return nullptr;
}

Var* SeizurePredictor::find_parameter(const std::string& name) { return param(name); }

Var SeizurePredictor::forward(const Var& batch, const ForwardOptions& opt) {
    const Tensor& xv = batch.value();
    if (xv.ndim() != 4 || xv.dim(1) != cfg_.in_channels || xv.dim(2) != cfg_.input_h ||
        xv.dim(3) != cfg_.input_w)
        throw ShapeError("forward: expected [N," + std::to_string(cfg_.in_channels) + "," +
                         std::to_string(cfg_.input_h) + "," + std::to_string(cfg_.input_w) +
                         "], got " + shape_string(xv.shape()));
    if (opt.mode == Mode::train && cfg_.dropout_p > 0.0 && opt.rng == nullptr)
        throw UsageError("forward: train mode with dropout needs an RNG");

    const int ph = (cfg_.kernel_h - 1 + 1) / 2;  // ceil((kh-1)/2)
    const int pw = (cfg_.kernel_w - 1 + 1) / 2;

    Var h = batch;
    for (int i = 0; i < 3; ++i) {
        const std::string blk = "block" + std::to_string(i + 1);
        const int in_h = h.value().dim(2), in_w = h.value().dim(3);
        h = conv2d(h, *param(blk + ".conv.w"), *param(blk + ".conv.b"), ph, pw);
        if (h.value().dim(2) != in_h || h.value().dim(3) != in_w) h = crop2d(h, in_h, in_w);
        h = batchnorm2d(h, *param(blk + ".bn.gamma"), *param(blk + ".bn.beta"), bn_[i], opt.mode);
        h = relu(h);
        if (cfg_.dropout_p > 0.0 && opt.mode == Mode::train)
            h = dropout(h, cfg_.dropout_p, opt.mode, *opt.rng);
        h = maxpool2d(h, 2, 2);
    }

    if (cfg_.use_attention)
        h = se_block(h, *param("se.w1"), *param("se.b1"), *param("se.w2"), *param("se.b2"),
                     opt.attention_out, opt.pin_attention_ones);

    h = flatten(h);
    h = relu(linear(h, *param("dense.w"), *param("dense.b")));
    h = sigmoid(linear(h, *param("out.w"), *param("out.b")));

    if (!h.value().all_finite()) throw NonFiniteError("forward: non-finite output probability");
    return h;
}

std::vector<double> SeizurePredictor::predict(const Tensor& batch) {
    ForwardOptions opt;
    const Var p = forward(constant(batch), opt);
    return p.value().vec();
}

std::vector<int> SeizurePredictor::classify(const Tensor& batch) {
    const std::vector<double> p = predict(batch);
    std::vector<int> labels(p.size());
    for (std::size_t i = 0; i < p.size(); ++i) labels[i] = p[i] >= 0.5 ? 1 : 0;
    return labels;
}

void SeizurePredictor::zero_grads() {
    for (Var& p : params_) p.zero_grad();
}

std::vector<Tensor> SeizurePredictor::snapshot() const {
    std::vector<Tensor> snap;
    snap.reserve(params_.size() + 2 * bn_.size());
    for (const Var& p : params_) snap.push_back(p.value());
    for (const auto& s : bn_) {
        snap.push_back(s.running_mean);
        snap.push_back(s.running_var);
    }
    return snap;
}

void SeizurePredictor::restore(const std::vector<Tensor>& snap) {
    if (snap.size() != params_.size() + 2 * bn_.size())
        throw UsageError("restore: snapshot does not match this model");
    std::size_t i = 0;
    for (Var& p : params_) p.value_mut() = snap[i++];
    for (auto& s : bn_) {
        s.running_mean = snap[i++];
        s.running_var = snap[i++];
    }
}

// ---- checkpoints ---------------------------------------------------------------
//
// Layout (little-endian): magic "PICKPT01", u32 version (1), the ModelConfig
// fields, u64 step counter, u32 blob count, then per blob: u32 name length,
// name bytes, u32 ndim, u32 dims..., f64 data. Blobs cover learnable
// parameters and batchnorm running statistics.

namespace {

constexpr char kMagic[8] = {'P', 'I', 'C', 'K', 'P', 'T', '0', '1'};
constexpr std::uint32_t kVersion = 1;

template <typename T>
void put(std::ofstream& f, T v) {
    f.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T get(std::ifstream& f, const std::string& path) {
    T v;
    f.read(reinterpret_cast<char*>(&v), sizeof(T));
    if (!f) throw FormatError("checkpoint truncated: " + path);
    return v;
}

void put_blob(std::ofstream& f, const std::string& name, const Tensor& t) {
    put<std::uint32_t>(f, static_cast<std::uint32_t>(name.size()));
    f.write(name.data(), static_cast<std::streamsize>(name.size()));
    put<std::uint32_t>(f, static_cast<std::uint32_t>(t.ndim()));
    for (std::size_t i = 0; i < t.ndim(); ++i) put<std::uint32_t>(f, static_cast<std::uint32_t>(t.dim(i)));
    f.write(reinterpret_cast<const char*>(t.data()), static_cast<std::streamsize>(t.size() * 8));
}

}  // namespace

void save_checkpoint(const SeizurePredictor& model, const std::string& path) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw IoError("cannot open for writing: " + path);
    const ModelConfig& c = model.config();
    f.write(kMagic, 8);
    put<std::uint32_t>(f, kVersion);
    put<std::int32_t>(f, c.in_channels);
    for (int ch : c.conv_channels) put<std::int32_t>(f, ch);
    put<std::int32_t>(f, c.kernel_h);
    put<std::int32_t>(f, c.kernel_w);
    put<double>(f, c.dropout_p);
    put<std::int32_t>(f, c.se_reduction);
    put<std::int32_t>(f, c.dense_units);
    put<std::uint8_t>(f, c.use_attention ? 1 : 0);
    put<std::int32_t>(f, c.input_h);
    put<std::int32_t>(f, c.input_w);
    put<std::uint64_t>(f, model.step);

    auto& m = const_cast<SeizurePredictor&>(model);
    const std::uint32_t blob_count =
        static_cast<std::uint32_t>(m.parameters().size() + 2 * m.bn_states().size());
    put<std::uint32_t>(f, blob_count);
    for (std::size_t i = 0; i < m.parameters().size(); ++i)
        put_blob(f, m.parameter_names()[i], m.parameters()[i].value());
    for (std::size_t i = 0; i < m.bn_states().size(); ++i) {
        put_blob(f, "bn_state" + std::to_string(i + 1) + ".mean", m.bn_states()[i].running_mean);
        put_blob(f, "bn_state" + std::to_string(i + 1) + ".var", m.bn_states()[i].running_var);
    }
    if (!f) throw IoError("short write: " + path);
}

SeizurePredictor load_checkpoint(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw IoError("cannot open checkpoint: " + path);
    char magic[8];
    f.read(magic, 8);
    if (!f || std::memcmp(magic, kMagic, 8) != 0)
        throw FormatError("checkpoint: bad magic: " + path);
    const auto version = get<std::uint32_t>(f, path);
    if (version != kVersion)
        throw VersionError("checkpoint: unsupported version " + std::to_string(version));

    ModelConfig c;
    c.in_channels = get<std::int32_t>(f, path);
    for (int i = 0; i < 3; ++i) c.conv_channels[i] = get<std::int32_t>(f, path);
    c.kernel_h = get<std::int32_t>(f, path);
    c.kernel_w = get<std::int32_t>(f, path);
    c.dropout_p = get<double>(f, path);
    c.se_reduction = get<std::int32_t>(f, path);
    c.dense_units = get<std::int32_t>(f, path);
    c.use_attention = get<std::uint8_t>(f, path) != 0;
    c.input_h = get<std::int32_t>(f, path);
    c.input_w = get<std::int32_t>(f, path);

    SeizurePredictor model(c);
    model.step = get<std::uint64_t>(f, path);

    const auto blob_count = get<std::uint32_t>(f, path);
    std::size_t filled = 0;
    for (std::uint32_t bi = 0; bi < blob_count; ++bi) {
        const auto name_len = get<std::uint32_t>(f, path);
        std::string name(name_len, '\0');
        f.read(name.data(), name_len);
        if (!f) throw FormatError("checkpoint truncated: " + path);
        const auto ndim = get<std::uint32_t>(f, path);
        std::vector<int> dims(ndim);
        for (auto& d : dims) d = static_cast<int>(get<std::uint32_t>(f, path));

        Tensor* target = nullptr;
        if (Var* p = model.find_parameter(name)) {
            target = &p->value_mut();
        } else {
            for (std::size_t i = 0; i < model.bn_states().size(); ++i) {
                const std::string prefix = "bn_state" + std::to_string(i + 1);
                if (name == prefix + ".mean") target = &model.bn_states()[i].running_mean;
                if (name == prefix + ".var") target = &model.bn_states()[i].running_var;
            }
        }
        if (!target) throw VersionError("checkpoint: unknown blob '" + name + "'");
        if (target->shape() != dims)
            throw VersionError("checkpoint: blob '" + name + "' has shape " + shape_string(dims) +
                               ", model expects " + shape_string(target->shape()));
        f.read(reinterpret_cast<char*>(target->data()),
               static_cast<std::streamsize>(target->size() * 8));
        if (!f) throw FormatError("checkpoint truncated: " + path);
        ++filled;
    }
    const std::size_t expected = model.parameters().size() + 2 * model.bn_states().size();
    if (filled != expected)
        throw VersionError("checkpoint: " + std::to_string(filled) + " blobs, model expects " +
                           std::to_string(expected));
    return model;
}

}  // namespace preictal
