#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "preictal/autodiff.hpp"

namespace preictal {

struct ModelConfig {
    int in_channels = 19;
    std::array<int, 3> conv_channels{32, 64, 128};
    int kernel_h = 2, kernel_w = 2;
    double dropout_p = 0.3;
    int se_reduction = 8;
    int dense_units = 128;
    bool use_attention = true;
    int input_h = 20, input_w = 11;

    void validate() const;
    bool operator==(const ModelConfig&) const = default;
};

// squeeze -> excitation -> recalibration on a [N,C,H,W] map.
// w1: [C, C/r] (reduce), w2: [C/r, C] (restore); attention weights are written
// to *attention_out when given. pin_ones forces s = 1, which makes the block
// the identity and matches the no-attention ablation bit for bit.
Var se_block(const Var& x, const Var& w1, const Var& b1, const Var& w2, const Var& b2,
             Tensor* attention_out = nullptr, bool pin_ones = false);

// Three conv blocks (conv -> batchnorm -> relu -> dropout -> maxpool), SE
// attention on the final 128-channel map, then flatten -> dense -> relu ->
// dense(1) -> sigmoid.
class SeizurePredictor {
public:
    explicit SeizurePredictor(const ModelConfig& cfg);  // zero weights; use init()

    static SeizurePredictor init(const ModelConfig& cfg, std::uint64_t seed);

    const ModelConfig& config() const { return cfg_; }
    std::size_t param_count() const;  // learnable parameters only

    struct ForwardOptions {
        Mode mode = Mode::eval;
        Rng* rng = nullptr;               // dropout stream; required in train mode if p > 0
        bool pin_attention_ones = false;  // ablation parity hook
        Tensor* attention_out = nullptr;  // SE weights s, [N,C]
    };

    // batch: [N, in_channels, input_h, input_w] -> probabilities [N,1] in (0,1)
    Var forward(const Var& batch, const ForwardOptions& opt);
    Var forward(const Var& batch) { return forward(batch, ForwardOptions{}); }

    std::vector<double> predict(const Tensor& batch);  // eval mode
    std::vector<int> classify(const Tensor& batch);    // p >= 0.5 -> 1

    std::vector<Var>& parameters() { return params_; }
    const std::vector<std::string>& parameter_names() const { return names_; }
    Var* find_parameter(const std::string& name);
    std::vector<BatchNormState>& bn_states() { return bn_; }

    void zero_grads();
    std::vector<Tensor> snapshot() const;       // parameter values + running stats
    void restore(const std::vector<Tensor>& snap);

    std::uint64_t step = 0;  // optimizer steps taken, persisted in checkpoints

private:
    ModelConfig cfg_;
    std::vector<std::string> names_;
    std::vector<Var> params_;
    std::vector<BatchNormState> bn_;

    Var* param(const std::string& name);
};

void save_checkpoint(const SeizurePredictor& model, const std::string& path);
SeizurePredictor load_checkpoint(const std::string& path);

}  // namespace preictal
