#pragma once

#include <filesystem>
#include <optional>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "stst/dataset.hpp"
#include "stst/tensor.hpp"

namespace stst {

enum class NormType { Batch, Layer, Power };
enum class NormPlacement { Pre, Post };
enum class HeadType { Mlp, LstmMlp };
enum class EmbeddingType { Spatiotemporal, Temporal };

std::string to_string(NormType v);
std::string to_string(NormPlacement v);
std::string to_string(HeadType v);
std::string to_string(EmbeddingType v);
NormType norm_type_from(const std::string& s);
NormPlacement norm_placement_from(const std::string& s);
HeadType head_type_from(const std::string& s);
EmbeddingType embedding_from(const std::string& s);

// Architecture and regularization hyperparameters.
struct ModelConfig {
    std::size_t context_window = 32;  // N
    std::size_t n_features = kNumMarketFeatures;  // F
    std::size_t n_time = kNumTimeFeatures;        // T
    std::size_t d_model = 64;  // D
    std::size_t n_encoders = 4;
    std::size_t n_heads = 4;
    std::size_t d_ff = 2048;
    double ff_dropout = 0.3;
    double attn_dropout = 0.1;
    std::size_t n_lstm_layers = 2;
    std::size_t d_lstm_hidden = 256;
    NormType norm_type = NormType::Power;
    NormPlacement norm_placement = NormPlacement::Post;
    HeadType head = HeadType::LstmMlp;
    std::size_t time2vec_dim = 8;  // k
    EmbeddingType embedding = EmbeddingType::Spatiotemporal;

    void validate() const;

    std::size_t sample_width() const { return n_time + n_features; }
    // Temporal embedding adds the time encoding onto the token, so its width
    // must match d_model there.
    std::size_t time_encoding_dim() const {
        return embedding == EmbeddingType::Temporal ? d_model : time2vec_dim;
    }
    std::size_t token_count() const {
        return embedding == EmbeddingType::Spatiotemporal ? context_window * n_features
                                                          : context_window;
    }
    // Width of one classifier input row (C).
    std::size_t context_width() const {
        return embedding == EmbeddingType::Spatiotemporal ? n_features * d_model : d_model;
    }

    std::vector<std::pair<std::string, std::string>> entries() const;
    static ModelConfig from_entries(const std::vector<std::pair<std::string, std::string>>& kv);
};

// One normalization site. Which buffers exist depends on the type.
struct NormParams {
    Tensor gamma, beta;
    Tensor running_mean, running_var;  // batch
    Tensor running_sq;                 // power
};

struct EncoderParams {
    Tensor wq, bq, wk, bk, wv, bv, wo, bo;
    Tensor w1, b1, w2, b2;
    NormParams norm_attn, norm_ff;
};

struct LstmLayerParams {
    Tensor wx;  // input x 4H, gate order [input, forget, cell, output]
    Tensor wh;  // H x 4H
    Tensor b;   // 4H
};

// Every learnable tensor and statistics buffer of one STST model.
struct StstParameters {
    ModelConfig config;

    Tensor t2v_w, t2v_b;
    Tensor embed_w, embed_b;
    std::vector<EncoderParams> encoders;

    std::vector<LstmLayerParams> lstm;  // lstm_mlp head
    Tensor out_w, out_b;                // lstm_mlp: H -> 1
    Tensor mlp_w1, mlp_b1, mlp_w2, mlp_b2;  // mlp head: C -> hidden -> 1

    // Uniform [-1/sqrt(fan_in), 1/sqrt(fan_in)] weights, zero biases, unit
    // running statistics; deterministic in the seed.
    static StstParameters init(const ModelConfig& config, std::uint64_t seed);

    std::vector<Tensor> trainable() const;
    std::vector<std::pair<std::string, Tensor>> named_tensors() const;  // weights + buffers

    // Deep value copy (for best-epoch snapshots).
    std::vector<std::vector<double>> snapshot_values() const;
    void restore_values(const std::vector<std::vector<double>>& snapshot);
};

// Shapes observed during one forward pass, for structural checks.
struct ForwardTrace {
    Shape tokens;
    Shape embedded;
    Shape attention;  // first encoder, first head
    std::vector<double> attention_row_sums;
    Shape restacked;
};

Tensor time2vec_encode(const Tensor& time_rows, const StstParameters& p);
Tensor spatiotemporal_embed(const Tensor& x, const StstParameters& p, ForwardTrace* trace = nullptr);
Tensor encoder_forward(const Tensor& embedded, StstParameters& p, bool training,
                       std::mt19937_64& rng, ForwardTrace* trace = nullptr);
// NF x D -> N x (F*D), grouping each timestep's F token vectors.
Tensor restack(const Tensor& encoded, std::size_t n_features);
Tensor classifier_forward(const Tensor& context, const StstParameters& p, bool training,
                          std::mt19937_64& rng);

// Full forward pass to one probability in (0, 1). Eval mode (training=false)
// is deterministic and leaves running statistics untouched.
Tensor model_forward(const Tensor& x, StstParameters& p, bool training, std::mt19937_64& rng,
                     ForwardTrace* trace = nullptr);

Tensor sample_to_tensor(const WindowSample& sample);

// Versioned binary container with the config and all named tensors; raw
// 64-bit values, so reload is bit-exact on the writing platform.
void save_checkpoint(const std::filesystem::path& path, const StstParameters& params);
StstParameters load_checkpoint(const std::filesystem::path& path);

}  // namespace stst
