#include "stst/model.hpp"

#include <cmath>
#include <cstring>
#include <fstream>

#include "stst/csv.hpp"

namespace stst {

std::string to_string(NormType v) {
    switch (v) {
        case NormType::Batch: return "batch";
        case NormType::Layer: return "layer";
        case NormType::Power: return "power";
    }
    return "?";
}
std::string to_string(NormPlacement v) { return v == NormPlacement::Pre ? "pre" : "post"; }
std::string to_string(HeadType v) { return v == HeadType::Mlp ? "mlp" : "lstm_mlp"; }
std::string to_string(EmbeddingType v) {
    return v == EmbeddingType::Spatiotemporal ? "spatiotemporal" : "temporal";
}

NormType norm_type_from(const std::string& s) {
    if (s == "batch") return NormType::Batch;
    if (s == "layer") return NormType::Layer;
    if (s == "power") return NormType::Power;
    throw UsageError("unknown norm_type '" + s + "' (batch|layer|power)");
}
NormPlacement norm_placement_from(const std::string& s) {
    if (s == "pre") return NormPlacement::Pre;
    if (s == "post") return NormPlacement::Post;
    throw UsageError("unknown norm_placement '" + s + "' (pre|post)");
}
HeadType head_type_from(const std::string& s) {
    if (s == "mlp") return HeadType::Mlp;
    if (s == "lstm_mlp") return HeadType::LstmMlp;
    throw UsageError("unknown head '" + s + "' (mlp|lstm_mlp)");
}
EmbeddingType embedding_from(const std::string& s) {
    if (s == "spatiotemporal") return EmbeddingType::Spatiotemporal;
    if (s == "temporal") return EmbeddingType::Temporal;
    throw UsageError("unknown embedding '" + s + "' (spatiotemporal|temporal)");
}

void ModelConfig::validate() const {
    auto positive = [](const char* name, std::size_t v) {
        if (v == 0) throw UsageError(std::string(name) + " must be positive");
    };
    positive("context_window", context_window);
    positive("n_features", n_features);
    positive("n_time", n_time);
    positive("d_model", d_model);
    positive("n_encoders", n_encoders);
    positive("n_heads", n_heads);
    positive("d_ff", d_ff);
    positive("d_lstm_hidden", d_lstm_hidden);
    if (head == HeadType::LstmMlp) positive("n_lstm_layers", n_lstm_layers);
    if (d_model % n_heads != 0)
        throw UsageError("d_model (" + std::to_string(d_model) + ") must be divisible by n_heads (" +
                         std::to_string(n_heads) + ")");
    if (embedding == EmbeddingType::Spatiotemporal && time2vec_dim < 2)
        throw UsageError("time2vec_dim must be >= 2");
    auto rate = [](const char* name, double v) {
        if (!(v >= 0.0 && v <= 0.5))
            throw UsageError(std::string(name) + " must be in [0, 0.5], got " + fnum(v));
    };
    rate("ff_dropout", ff_dropout);
    rate("attn_dropout", attn_dropout);
}

std::vector<std::pair<std::string, std::string>> ModelConfig::entries() const {
    return {
        {"context_window", std::to_string(context_window)},
        {"n_features", std::to_string(n_features)},
        {"n_time", std::to_string(n_time)},
        {"d_model", std::to_string(d_model)},
        {"n_encoders", std::to_string(n_encoders)},
        {"n_heads", std::to_string(n_heads)},
        {"d_ff", std::to_string(d_ff)},
        {"ff_dropout", fnum(ff_dropout)},
        {"attn_dropout", fnum(attn_dropout)},
        {"n_lstm_layers", std::to_string(n_lstm_layers)},
        {"d_lstm_hidden", std::to_string(d_lstm_hidden)},
        {"norm_type", to_string(norm_type)},
        {"norm_placement", to_string(norm_placement)},
        {"head", to_string(head)},
        {"time2vec_dim", std::to_string(time2vec_dim)},
        {"embedding", to_string(embedding)},
    };
}

ModelConfig ModelConfig::from_entries(const std::vector<std::pair<std::string, std::string>>& kv) {
    ModelConfig c;
    std::size_t seen = 0;
    for (const auto& [key, value] : kv) {
        ++seen;
        if (key == "context_window") c.context_window = parse_long(value, key);
        else if (key == "n_features") c.n_features = parse_long(value, key);
        else if (key == "n_time") c.n_time = parse_long(value, key);
        else if (key == "d_model") c.d_model = parse_long(value, key);
        else if (key == "n_encoders") c.n_encoders = parse_long(value, key);
        else if (key == "n_heads") c.n_heads = parse_long(value, key);
        else if (key == "d_ff") c.d_ff = parse_long(value, key);
        else if (key == "ff_dropout") c.ff_dropout = parse_double(value, key);
        else if (key == "attn_dropout") c.attn_dropout = parse_double(value, key);
        else if (key == "n_lstm_layers") c.n_lstm_layers = parse_long(value, key);
        else if (key == "d_lstm_hidden") c.d_lstm_hidden = parse_long(value, key);
        else if (key == "norm_type") c.norm_type = norm_type_from(value);
        else if (key == "norm_placement") c.norm_placement = norm_placement_from(value);
        else if (key == "head") c.head = head_type_from(value);
        else if (key == "time2vec_dim") c.time2vec_dim = parse_long(value, key);
        else if (key == "embedding") c.embedding = embedding_from(value);
        else throw ValueError("unknown model config key '" + key + "'");
    }
    if (seen != c.entries().size()) throw ValueError("incomplete model config");
    c.validate();
    return c;
}

// ---------------------------------------------------------------------------
// parameters

namespace {

Tensor init_weight(Shape shape, std::size_t fan_in, std::mt19937_64& rng) {
    const double bound = 1.0 / std::sqrt(double(fan_in));
    return Tensor::uniform(std::move(shape), -bound, bound, rng, true);
}

NormParams make_norm(NormType type, std::size_t width) {
    NormParams np;
    np.gamma = Tensor::full({width}, 1.0, true);
    np.beta = Tensor::zeros({width}, true);
    if (type == NormType::Batch) {
        np.running_mean = Tensor::zeros({width});
        np.running_var = Tensor::full({width}, 1.0);
    } else if (type == NormType::Power) {
        np.running_sq = Tensor::full({width}, 1.0);
    }
    return np;
}

Tensor apply_norm(const Tensor& x, NormParams& np, NormType type, bool training) {
    switch (type) {
        case NormType::Layer: return layer_norm(x, np.gamma, np.beta);
        case NormType::Batch:
            return batch_norm(x, np.gamma, np.beta, np.running_mean, np.running_var, training);
        case NormType::Power: return power_norm(x, np.gamma, np.beta, np.running_sq, training);
    }
    throw UsageError("unreachable norm type");
}

void collect_norm(std::vector<std::pair<std::string, Tensor>>& out, const std::string& prefix,
                  const NormParams& np) {
    out.emplace_back(prefix + ".gamma", np.gamma);
    out.emplace_back(prefix + ".beta", np.beta);
    if (np.running_mean.defined()) out.emplace_back(prefix + ".running_mean", np.running_mean);
    if (np.running_var.defined()) out.emplace_back(prefix + ".running_var", np.running_var);
    if (np.running_sq.defined()) out.emplace_back(prefix + ".running_sq", np.running_sq);
}

}  // namespace

StstParameters StstParameters::init(const ModelConfig& config, std::uint64_t seed) {
    config.validate();
    StstParameters p;
    p.config = config;
    std::mt19937_64 rng(seed);

    const std::size_t kt = config.time_encoding_dim();
    p.t2v_w = init_weight({config.n_time, kt}, config.n_time, rng);
    p.t2v_b = Tensor::zeros({kt}, true);

    const std::size_t embed_in =
        config.embedding == EmbeddingType::Spatiotemporal ? 1 + config.time2vec_dim : config.n_features;
    p.embed_w = init_weight({embed_in, config.d_model}, embed_in, rng);
    p.embed_b = Tensor::zeros({config.d_model}, true);

    for (std::size_t e = 0; e < config.n_encoders; ++e) {
        EncoderParams enc;
        const std::size_t d = config.d_model;
        enc.wq = init_weight({d, d}, d, rng);
        enc.bq = Tensor::zeros({d}, true);
        enc.wk = init_weight({d, d}, d, rng);
        enc.bk = Tensor::zeros({d}, true);
        enc.wv = init_weight({d, d}, d, rng);
        enc.bv = Tensor::zeros({d}, true);
        enc.wo = init_weight({d, d}, d, rng);
        enc.bo = Tensor::zeros({d}, true);
        enc.w1 = init_weight({d, config.d_ff}, d, rng);
        enc.b1 = Tensor::zeros({config.d_ff}, true);
        enc.w2 = init_weight({config.d_ff, d}, config.d_ff, rng);
        enc.b2 = Tensor::zeros({d}, true);
        enc.norm_attn = make_norm(config.norm_type, d);
        enc.norm_ff = make_norm(config.norm_type, d);
        p.encoders.push_back(std::move(enc));
    }

    const std::size_t context = config.context_width();
    if (config.head == HeadType::LstmMlp) {
        const std::size_t h = config.d_lstm_hidden;
        for (std::size_t l = 0; l < config.n_lstm_layers; ++l) {
            const std::size_t in = l == 0 ? context : h;
            LstmLayerParams layer;
            layer.wx = init_weight({in, 4 * h}, in, rng);
            layer.wh = init_weight({h, 4 * h}, h, rng);
            layer.b = Tensor::zeros({4 * h}, true);
            p.lstm.push_back(std::move(layer));
        }
        p.out_w = init_weight({h, 1}, h, rng);
        p.out_b = Tensor::zeros({1}, true);
    } else {
        const std::size_t h = config.d_lstm_hidden;  // shared hidden-size knob
        p.mlp_w1 = init_weight({context, h}, context, rng);
        p.mlp_b1 = Tensor::zeros({h}, true);
        p.mlp_w2 = init_weight({h, 1}, h, rng);
        p.mlp_b2 = Tensor::zeros({1}, true);
    }
    return p;
}

std::vector<std::pair<std::string, Tensor>> StstParameters::named_tensors() const {
    std::vector<std::pair<std::string, Tensor>> out;
    out.emplace_back("t2v.w", t2v_w);
    out.emplace_back("t2v.b", t2v_b);
    out.emplace_back("embed.w", embed_w);
    out.emplace_back("embed.b", embed_b);
    for (std::size_t e = 0; e < encoders.size(); ++e) {
        const auto& enc = encoders[e];
        const std::string pre = "enc" + std::to_string(e);
        out.emplace_back(pre + ".wq", enc.wq);
        out.emplace_back(pre + ".bq", enc.bq);
        out.emplace_back(pre + ".wk", enc.wk);
        out.emplace_back(pre + ".bk", enc.bk);
        out.emplace_back(pre + ".wv", enc.wv);
        out.emplace_back(pre + ".bv", enc.bv);
        out.emplace_back(pre + ".wo", enc.wo);
        out.emplace_back(pre + ".bo", enc.bo);
        out.emplace_back(pre + ".w1", enc.w1);
        out.emplace_back(pre + ".b1", enc.b1);
        out.emplace_back(pre + ".w2", enc.w2);
        out.emplace_back(pre + ".b2", enc.b2);
        collect_norm(out, pre + ".norm_attn", enc.norm_attn);
        collect_norm(out, pre + ".norm_ff", enc.norm_ff);
    }
    for (std::size_t l = 0; l < lstm.size(); ++l) {
        const std::string pre = "lstm" + std::to_string(l);
        out.emplace_back(pre + ".wx", lstm[l].wx);
        out.emplace_back(pre + ".wh", lstm[l].wh);
        out.emplace_back(pre + ".b", lstm[l].b);
    }
    if (out_w.defined()) {
        out.emplace_back("out.w", out_w);
        out.emplace_back("out.b", out_b);
    }
    if (mlp_w1.defined()) {
        out.emplace_back("mlp.w1", mlp_w1);
        out.emplace_back("mlp.b1", mlp_b1);
        out.emplace_back("mlp.w2", mlp_w2);
        out.emplace_back("mlp.b2", mlp_b2);
    }
    return out;
}

std::vector<Tensor> StstParameters::trainable() const {
    std::vector<Tensor> out;
    for (const auto& [name, t] : named_tensors())
        if (t.requires_grad()) out.push_back(t);
    return out;
}

std::vector<std::vector<double>> StstParameters::snapshot_values() const {
    std::vector<std::vector<double>> out;
    for (const auto& [name, t] : named_tensors()) out.push_back(t.values());
    return out;
}

void StstParameters::restore_values(const std::vector<std::vector<double>>& snapshot) {
    auto named = named_tensors();
    if (named.size() != snapshot.size())
        throw ValueError("parameter snapshot does not match model layout");
    for (std::size_t i = 0; i < named.size(); ++i) {
        if (named[i].second.size() != snapshot[i].size())
            throw ValueError("parameter snapshot shape mismatch at " + named[i].first);
        named[i].second.values() = snapshot[i];
    }
}

// ---------------------------------------------------------------------------
// forward pieces

Tensor time2vec_encode(const Tensor& time_rows, const StstParameters& p) {
    if (time_rows.cols() != p.config.n_time)
        throw ShapeError("time2vec_encode: expected " + std::to_string(p.config.n_time) +
                         " time columns, got " + shape_str(time_rows.shape()));
    return periodic_activation(dense(time_rows, p.t2v_w, p.t2v_b));
}

Tensor spatiotemporal_embed(const Tensor& x, const StstParameters& p, ForwardTrace* trace) {
    const ModelConfig& c = p.config;
    if (x.cols() != c.sample_width())
        throw ShapeError("spatiotemporal_embed: input has " + std::to_string(x.cols()) +
                         " columns, expected n_time + n_features = " +
                         std::to_string(c.sample_width()));
    const std::size_t n = x.rows();
    const Tensor time_part = slice_cols(x, 0, c.n_time);
    const Tensor feature_part = slice_cols(x, c.n_time, c.n_features);
    const Tensor time_enc = time2vec_encode(time_part, p);

    // Timestep-major flatten: all F features of timestep 0, then timestep 1,
    // and so on. Each scalar token gets its timestep's time encoding.
    const Tensor flat = reshape(feature_part, {n * c.n_features, 1});
    const Tensor time_rep = repeat_rows(time_enc, c.n_features);
    const Tensor tokens = concat_cols({flat, time_rep});
    if (trace) trace->tokens = tokens.shape();
    Tensor embedded = dense(tokens, p.embed_w, p.embed_b);
    if (trace) trace->embedded = embedded.shape();
    return embedded;
}

namespace {

Tensor multi_head_attention(const Tensor& x, const EncoderParams& enc, const ModelConfig& c,
                            bool training, std::mt19937_64& rng, ForwardTrace* trace) {
    const std::size_t dh = c.d_model / c.n_heads;
    const Tensor q = dense(x, enc.wq, enc.bq);
    const Tensor k = dense(x, enc.wk, enc.bk);
    const Tensor v = dense(x, enc.wv, enc.bv);
    std::vector<Tensor> heads;
    heads.reserve(c.n_heads);
    for (std::size_t h = 0; h < c.n_heads; ++h) {
        const Tensor qh = slice_cols(q, h * dh, dh);
        const Tensor kh = slice_cols(k, h * dh, dh);
        const Tensor vh = slice_cols(v, h * dh, dh);
        const Tensor scores = scale(matmul(qh, transpose(kh)), 1.0 / std::sqrt(double(dh)));
        Tensor weights = softmax_lastdim(scores);
        if (trace && h == 0) {
            trace->attention = weights.shape();
            trace->attention_row_sums.clear();
            for (std::size_t i = 0; i < weights.rows(); ++i) {
                double total = 0.0;
                for (std::size_t j = 0; j < weights.cols(); ++j) total += weights.at(i, j);
                trace->attention_row_sums.push_back(total);
            }
        }
        weights = dropout(weights, c.attn_dropout, training, rng);
        heads.push_back(matmul(weights, vh));
    }
    const Tensor merged = c.n_heads == 1 ? heads[0] : concat_cols(heads);
    return dense(merged, enc.wo, enc.bo);
}

Tensor feed_forward(const Tensor& x, const EncoderParams& enc, const ModelConfig& c, bool training,
                    std::mt19937_64& rng) {
    Tensor hidden = relu(dense(x, enc.w1, enc.b1));
    hidden = dropout(hidden, c.ff_dropout, training, rng);
    return dense(hidden, enc.w2, enc.b2);
}

}  // namespace

Tensor encoder_forward(const Tensor& embedded, StstParameters& p, bool training,
                       std::mt19937_64& rng, ForwardTrace* trace) {
    const ModelConfig& c = p.config;
    Tensor x = embedded;
    for (std::size_t e = 0; e < p.encoders.size(); ++e) {
        EncoderParams& enc = p.encoders[e];
        ForwardTrace* block_trace = (trace && e == 0) ? trace : nullptr;
        if (c.norm_placement == NormPlacement::Pre) {
            const Tensor a =
                multi_head_attention(apply_norm(x, enc.norm_attn, c.norm_type, training), enc, c,
                                     training, rng, block_trace);
            x = add(x, a);
            const Tensor f =
                feed_forward(apply_norm(x, enc.norm_ff, c.norm_type, training), enc, c, training, rng);
            x = add(x, f);
        } else {
            const Tensor a = multi_head_attention(x, enc, c, training, rng, block_trace);
            x = apply_norm(add(x, a), enc.norm_attn, c.norm_type, training);
            const Tensor f = feed_forward(x, enc, c, training, rng);
            x = apply_norm(add(x, f), enc.norm_ff, c.norm_type, training);
        }
    }
    return x;
}

Tensor restack(const Tensor& encoded, std::size_t n_features) {
    if (encoded.rows() % n_features != 0)
        throw ShapeError("restack: row count " + std::to_string(encoded.rows()) +
                         " not divisible by feature count " + std::to_string(n_features));
    // Timestep-major token order makes the regrouping a contiguous reshape.
    return reshape(encoded, {encoded.rows() / n_features, n_features * encoded.cols()});
}

Tensor classifier_forward(const Tensor& context, const StstParameters& p, bool training,
                          std::mt19937_64& rng) {
    (void)training;
    (void)rng;
    const ModelConfig& c = p.config;
    if (context.cols() != c.context_width())
        throw ShapeError("classifier_forward: context width " + std::to_string(context.cols()) +
                         " does not match configuration (" + std::to_string(c.context_width()) + ")");
    const std::size_t n = context.rows();
    if (c.head == HeadType::Mlp) {
        const Tensor last = select_row(context, n - 1);
        const Tensor hidden = relu(dense(last, p.mlp_w1, p.mlp_b1));
        const Tensor logit = dense(hidden, p.mlp_w2, p.mlp_b2);
        return sigmoid(reshape(logit, {1}));
    }

    const std::size_t h = c.d_lstm_hidden;
    std::vector<Tensor> seq;
    seq.reserve(n);
    for (std::size_t t = 0; t < n; ++t) seq.push_back(select_row(context, t));
    for (const LstmLayerParams& layer : p.lstm) {
        Tensor hidden = Tensor::zeros({1, h});
        Tensor cell = Tensor::zeros({1, h});
        std::vector<Tensor> outputs;
        outputs.reserve(n);
        for (std::size_t t = 0; t < n; ++t) {
            const Tensor gates =
                add_row(add(matmul(seq[t], layer.wx), matmul(hidden, layer.wh)), layer.b);
            const Tensor gate_i = sigmoid(slice_cols(gates, 0, h));
            const Tensor gate_f = sigmoid(slice_cols(gates, h, h));
            const Tensor gate_g = tanh(slice_cols(gates, 2 * h, h));
            const Tensor gate_o = sigmoid(slice_cols(gates, 3 * h, h));
            cell = add(hadamard(gate_f, cell), hadamard(gate_i, gate_g));
            hidden = hadamard(gate_o, tanh(cell));
            outputs.push_back(hidden);
        }
        seq = std::move(outputs);
    }
    const Tensor logit = dense(seq.back(), p.out_w, p.out_b);
    return sigmoid(reshape(logit, {1}));
}

Tensor model_forward(const Tensor& x, StstParameters& p, bool training, std::mt19937_64& rng,
                     ForwardTrace* trace) {
    const ModelConfig& c = p.config;
    Tensor embedded;
    if (c.embedding == EmbeddingType::Spatiotemporal) {
        embedded = spatiotemporal_embed(x, p, trace);
    } else {
        if (x.cols() != c.sample_width())
            throw ShapeError("model_forward: input has " + std::to_string(x.cols()) +
                             " columns, expected " + std::to_string(c.sample_width()));
        const Tensor time_part = slice_cols(x, 0, c.n_time);
        const Tensor feature_part = slice_cols(x, c.n_time, c.n_features);
        // Whole-timestep tokens with the time encoding added positionally.
        embedded = add(dense(feature_part, p.embed_w, p.embed_b), time2vec_encode(time_part, p));
        if (trace) {
            trace->tokens = embedded.shape();
            trace->embedded = embedded.shape();
        }
    }
    Tensor encoded = encoder_forward(embedded, p, training, rng, trace);
    Tensor context =
        c.embedding == EmbeddingType::Spatiotemporal ? restack(encoded, c.n_features) : encoded;
    if (trace) trace->restacked = context.shape();
    return classifier_forward(context, p, training, rng);
}

Tensor sample_to_tensor(const WindowSample& sample) {
    return Tensor::from({sample.n_rows, sample.n_cols}, sample.x);
}

// ---------------------------------------------------------------------------
// checkpoint io

namespace {

constexpr char kMagic[8] = {'S', 'T', 'S', 'T', 'C', 'K', 'P', '1'};

void write_u32(std::ostream& out, std::uint32_t v) { out.write(reinterpret_cast<const char*>(&v), 4); }
void write_u64(std::ostream& out, std::uint64_t v) { out.write(reinterpret_cast<const char*>(&v), 8); }
void write_str(std::ostream& out, const std::string& s) {
    write_u32(out, std::uint32_t(s.size()));
    out.write(s.data(), std::streamsize(s.size()));
}

std::uint32_t read_u32(std::istream& in) {
    std::uint32_t v = 0;
    in.read(reinterpret_cast<char*>(&v), 4);
    return v;
}
std::uint64_t read_u64(std::istream& in) {
    std::uint64_t v = 0;
    in.read(reinterpret_cast<char*>(&v), 8);
    return v;
}
std::string read_str(std::istream& in) {
    const std::uint32_t len = read_u32(in);
    std::string s(len, '\0');
    in.read(s.data(), len);
    return s;
}

}  // namespace

void save_checkpoint(const std::filesystem::path& path, const StstParameters& params) {
    AtomicFile file(path);
    std::ostream& out = file.out();
    out.write(kMagic, sizeof(kMagic));

    const auto config_entries = params.config.entries();
    write_u32(out, std::uint32_t(config_entries.size()));
    for (const auto& [key, value] : config_entries) {
        write_str(out, key);
        write_str(out, value);
    }

    const auto named = params.named_tensors();
    write_u64(out, named.size());
    for (const auto& [name, tensor] : named) {
        write_str(out, name);
        write_u32(out, std::uint32_t(tensor.shape().size()));
        for (auto d : tensor.shape()) write_u64(out, d);
        out.write(reinterpret_cast<const char*>(tensor.values().data()),
                  std::streamsize(tensor.values().size() * sizeof(double)));
    }
    file.commit();
}

StstParameters load_checkpoint(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ValueError("cannot open checkpoint: " + path.string());
    char magic[8];
    in.read(magic, 8);
    if (!in || std::memcmp(magic, kMagic, 8) != 0)
        throw ValueError("not a checkpoint file (bad magic): " + path.string());

    const std::uint32_t n_entries = read_u32(in);
    std::vector<std::pair<std::string, std::string>> entries;
    for (std::uint32_t i = 0; i < n_entries; ++i) {
        std::string key = read_str(in);
        std::string value = read_str(in);
        entries.emplace_back(std::move(key), std::move(value));
    }
    const ModelConfig config = ModelConfig::from_entries(entries);
    StstParameters params = StstParameters::init(config, 0);

    auto named = params.named_tensors();
    const std::uint64_t n_tensors = read_u64(in);
    if (n_tensors != named.size())
        throw ValueError("checkpoint tensor count " + std::to_string(n_tensors) +
                         " does not match model layout (" + std::to_string(named.size()) + ")");
    for (std::uint64_t i = 0; i < n_tensors; ++i) {
        const std::string name = read_str(in);
        const std::uint32_t rank = read_u32(in);
        Shape shape(rank);
        for (auto& d : shape) d = read_u64(in);
        auto it = std::find_if(named.begin(), named.end(),
                               [&](const auto& kv) { return kv.first == name; });
        if (it == named.end()) throw ValueError("checkpoint has unknown tensor '" + name + "'");
        Tensor t = it->second;
        if (t.shape() != shape)
            throw ValueError("checkpoint tensor '" + name + "' has shape " + shape_str(shape) +
                             ", expected " + shape_str(t.shape()));
        in.read(reinterpret_cast<char*>(t.values().data()),
                std::streamsize(t.values().size() * sizeof(double)));
        if (!in) throw ValueError("checkpoint truncated at tensor '" + name + "'");
    }
    return params;
}

}  // namespace stst
