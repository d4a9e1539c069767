#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <filesystem>

#include "stst/model.hpp"
#include "stst/training.hpp"
#include "testutil.hpp"

using namespace stst;
using testutil::make_rng;

namespace {

// The micro configuration used throughout the gradient and learning checks.
ModelConfig micro_config() {
    ModelConfig c;
    c.context_window = 4;
    c.n_features = 3;
    c.n_time = 4;
    c.d_model = 8;
    c.n_encoders = 1;
    c.n_heads = 2;
    c.d_ff = 16;
    c.ff_dropout = 0.0;
    c.attn_dropout = 0.0;
    c.n_lstm_layers = 1;
    c.d_lstm_hidden = 8;
    c.time2vec_dim = 4;
    return c;
}

ModelConfig paper_config() {
    ModelConfig c;  // defaults follow the published selection
    c.ff_dropout = 0.0;
    c.attn_dropout = 0.0;
    return c;
}

Tensor random_input(const ModelConfig& c, std::mt19937_64& rng) {
    Tensor x = Tensor::zeros({c.context_window, c.sample_width()});
    std::uniform_real_distribution<double> time01(0.0, 1.0);
    std::uniform_real_distribution<double> feat(-1.0, 1.0);
    for (std::size_t r = 0; r < c.context_window; ++r) {
        for (std::size_t t = 0; t < c.n_time; ++t) x.values()[r * c.sample_width() + t] = time01(rng);
        for (std::size_t f = 0; f < c.n_features; ++f)
            x.values()[r * c.sample_width() + c.n_time + f] = feat(rng);
    }
    return x;
}

}  // namespace

TEST_CASE("time2vec encoding") {
    ModelConfig c = micro_config();
    c.context_window = 32;
    c.time2vec_dim = 8;
    StstParameters p = StstParameters::init(c, 3);

    auto rng = make_rng(4);
    Tensor time_rows = Tensor::uniform({32, 4}, 0.0, 1.0, rng);

    SUBCASE("zero parameters give a zero encoding") {
        std::fill(p.t2v_w.values().begin(), p.t2v_w.values().end(), 0.0);
        const Tensor enc = time2vec_encode(time_rows, p);
        for (double v : enc.values()) CHECK(v == 0.0);
    }
    SUBCASE("periodic coordinates are bounded by one") {
        const Tensor enc = time2vec_encode(time_rows, p);
        CHECK(enc.shape() == Shape{32, 8});
        for (std::size_t r = 0; r < 32; ++r)
            for (std::size_t j = 1; j < 8; ++j) CHECK(std::abs(enc.at(r, j)) <= 1.0);
    }
}

TEST_CASE("spatiotemporal embedding shapes and token order") {
    ModelConfig c = paper_config();
    StstParameters p = StstParameters::init(c, 5);
    auto rng = make_rng(6);
    const Tensor x = random_input(c, rng);

    ForwardTrace trace;
    const Tensor e = spatiotemporal_embed(x, p, &trace);
    CHECK(trace.tokens == Shape{768, 9});  // NF x (1 + k)
    CHECK(e.shape() == Shape{768, 64});

    // timestep-major flatten: token 0 carries feature (0,0), token F carries
    // feature (1,0); verify through a zeroed time2vec and identity-ish embed
    std::fill(p.t2v_w.values().begin(), p.t2v_w.values().end(), 0.0);
    std::fill(p.embed_w.values().begin(), p.embed_w.values().end(), 0.0);
    std::fill(p.embed_b.values().begin(), p.embed_b.values().end(), 0.0);
    p.embed_w.values()[0] = 1.0;  // first input coordinate (the scalar) -> dim 0
    const Tensor e2 = spatiotemporal_embed(x, p);
    CHECK(e2.at(0, 0) == x.at(0, c.n_time + 0));
    CHECK(e2.at(c.n_features, 0) == x.at(1, c.n_time + 0));

    // zero features with a zero time encoding collapse onto the bias
    Tensor zero_x = Tensor::zeros({c.context_window, c.sample_width()});
    std::fill(p.embed_b.values().begin(), p.embed_b.values().end(), 0.25);
    const Tensor e3 = spatiotemporal_embed(zero_x, p);
    for (double v : e3.values()) CHECK(v == 0.25);
}

TEST_CASE("embedding rejects wrong column counts") {
    ModelConfig c = micro_config();
    StstParameters p = StstParameters::init(c, 1);
    const Tensor bad = Tensor::zeros({4, 9});
    CHECK_THROWS_AS(spatiotemporal_embed(bad, p), ShapeError);
}

TEST_CASE("encoder preserves shape across block counts and placements") {
    for (std::size_t blocks : {1u, 2u, 4u}) {
        for (NormPlacement placement : {NormPlacement::Pre, NormPlacement::Post}) {
            ModelConfig c = micro_config();
            c.n_encoders = blocks;
            c.norm_placement = placement;
            StstParameters p = StstParameters::init(c, 7);
            auto rng = make_rng(8);
            const Tensor e = Tensor::uniform({12, 8}, -1, 1, rng);
            std::mt19937_64 drop_rng(9);
            const Tensor y = encoder_forward(e, p, false, drop_rng);
            CHECK(y.shape() == e.shape());
        }
    }
}

TEST_CASE("restack groups timesteps and preserves entries") {
    auto rng = make_rng(10);
    const Tensor y = Tensor::uniform({768, 64}, -1, 1, rng);
    const Tensor y2 = restack(y, 24);
    CHECK(y2.shape() == Shape{32, 1536});
    CHECK(y2.values() == y.values());  // pure regrouping

    // round trip back to token rows
    const Tensor back = reshape(y2, {768, 64});
    CHECK(back.values() == y.values());

    // single-feature case is the identity reshape
    const Tensor single = Tensor::uniform({5, 3}, -1, 1, rng);
    CHECK(restack(single, 1).shape() == Shape{5, 3});

    CHECK_THROWS_AS(restack(Tensor::zeros({7, 4}), 3), ShapeError);
}

TEST_CASE("classifier output lies strictly inside (0,1)") {
    for (HeadType head : {HeadType::Mlp, HeadType::LstmMlp}) {
        ModelConfig c = micro_config();
        c.head = head;
        StstParameters p = StstParameters::init(c, 11);
        auto rng = make_rng(12);
        const Tensor context = Tensor::uniform({4, c.context_width()}, -2, 2, rng);
        std::mt19937_64 drop_rng(13);
        const double prob = classifier_forward(context, p, false, drop_rng).value();
        CHECK(prob > 0.0);
        CHECK(prob < 1.0);
    }
}

TEST_CASE("zero lstm weights collapse onto the output bias") {
    ModelConfig c = micro_config();
    StstParameters p = StstParameters::init(c, 14);
    for (auto& layer : p.lstm) {
        std::fill(layer.wx.values().begin(), layer.wx.values().end(), 0.0);
        std::fill(layer.wh.values().begin(), layer.wh.values().end(), 0.0);
        std::fill(layer.b.values().begin(), layer.b.values().end(), 0.0);
    }
    p.out_b.values()[0] = 0.7;
    auto rng = make_rng(15);
    const Tensor context = Tensor::uniform({4, c.context_width()}, -2, 2, rng);
    std::mt19937_64 drop_rng(16);
    const double prob = classifier_forward(context, p, false, drop_rng).value();
    CHECK(prob == doctest::Approx(1.0 / (1.0 + std::exp(-0.7))).epsilon(1e-12));
}

TEST_CASE("paper-configuration shape chain") {
    ModelConfig c = paper_config();
    c.validate();
    StstParameters p = StstParameters::init(c, 17);
    auto rng = make_rng(18);
    const Tensor x = random_input(c, rng);
    std::mt19937_64 drop_rng(19);
    ForwardTrace trace;
    const Tensor prob = model_forward(x, p, false, drop_rng, &trace);

    CHECK(trace.tokens == Shape{768, 9});
    CHECK(trace.embedded == Shape{768, 64});
    CHECK(trace.attention == Shape{768, 768});
    CHECK(trace.restacked == Shape{32, 1536});
    CHECK(prob.size() == 1);
    for (double s : trace.attention_row_sums) CHECK(std::abs(s - 1.0) <= 1e-10);
}

TEST_CASE("temporal ablation uses timestep tokens") {
    ModelConfig c = paper_config();
    c.embedding = EmbeddingType::Temporal;
    StstParameters p = StstParameters::init(c, 20);
    auto rng = make_rng(21);
    const Tensor x = random_input(c, rng);
    std::mt19937_64 drop_rng(22);
    ForwardTrace trace;
    const Tensor prob = model_forward(x, p, false, drop_rng, &trace);
    CHECK(trace.attention == Shape{32, 32});
    CHECK(trace.restacked == Shape{32, 64});
    CHECK(prob.size() == 1);
    for (double s : trace.attention_row_sums) CHECK(std::abs(s - 1.0) <= 1e-10);
}

TEST_CASE("eval mode forward is bitwise deterministic") {
    ModelConfig c = micro_config();
    c.ff_dropout = 0.3;  // exercised only in training mode
    c.attn_dropout = 0.1;
    StstParameters p = StstParameters::init(c, 23);
    auto rng = make_rng(24);
    const Tensor x = random_input(c, rng);
    std::mt19937_64 r1(1), r2(999);
    const double a = model_forward(x, p, false, r1).value();
    const double b = model_forward(x, p, false, r2).value();
    CHECK(a == b);
}

TEST_CASE("end-to-end gradients match finite differences on the micro model") {
    struct Case {
        const char* name;
        NormType norm;
        NormPlacement placement;
        HeadType head;
        EmbeddingType embedding;
    };
    const Case cases[] = {
        {"power post lstm spatio", NormType::Power, NormPlacement::Post, HeadType::LstmMlp,
         EmbeddingType::Spatiotemporal},
        {"layer pre lstm spatio", NormType::Layer, NormPlacement::Pre, HeadType::LstmMlp,
         EmbeddingType::Spatiotemporal},
        {"batch post mlp spatio", NormType::Batch, NormPlacement::Post, HeadType::Mlp,
         EmbeddingType::Spatiotemporal},
        {"power post lstm temporal", NormType::Power, NormPlacement::Post, HeadType::LstmMlp,
         EmbeddingType::Temporal},
    };
    for (const Case& tc : cases) {
        INFO(tc.name);
        ModelConfig c = micro_config();
        c.norm_type = tc.norm;
        c.norm_placement = tc.placement;
        c.head = tc.head;
        c.embedding = tc.embedding;
        StstParameters p = StstParameters::init(c, 31);
        auto rng = make_rng(32);
        const Tensor x1 = random_input(c, rng);
        const Tensor x2 = random_input(c, rng);
        const std::vector<double> labels = {1.0, 0.0};

        auto loss_fn = [&]() {
            std::mt19937_64 drop_rng(0);
            std::vector<Tensor> probs = {model_forward(x1, p, false, drop_rng),
                                         model_forward(x2, p, false, drop_rng)};
            return bce_loss(stack_scalars(probs), labels);
        };
        const auto report = grad_check_params(loss_fn, p.trainable(), 1e-5, 1e-4);
        INFO(report.worst);
        CHECK(report.pass);
        CHECK(report.max_rel_err < 1e-4);
    }
}

TEST_CASE("permuting feature columns with matching classifier blocks is a no-op") {
    ModelConfig c = micro_config();
    c.head = HeadType::Mlp;
    StstParameters p = StstParameters::init(c, 41);
    auto rng = make_rng(42);
    const Tensor x = random_input(c, rng);
    std::mt19937_64 drop_rng(0);
    const double base = model_forward(x, p, false, drop_rng).value();

    // rotate market features left by one and rotate the classifier's
    // per-feature weight-row blocks the same way
    const std::vector<std::size_t> perm = {1, 2, 0};
    Tensor xp = Tensor::zeros({c.context_window, c.sample_width()});
    for (std::size_t r = 0; r < c.context_window; ++r) {
        for (std::size_t t = 0; t < c.n_time; ++t)
            xp.values()[r * c.sample_width() + t] = x.at(r, t);
        for (std::size_t f = 0; f < c.n_features; ++f)
            xp.values()[r * c.sample_width() + c.n_time + f] = x.at(r, c.n_time + perm[f]);
    }
    StstParameters pp = StstParameters::init(c, 41);
    pp.restore_values(p.snapshot_values());
    const std::size_t d = c.d_model;
    const std::size_t width = c.d_lstm_hidden;
    for (std::size_t f = 0; f < c.n_features; ++f)
        for (std::size_t j = 0; j < d; ++j)
            for (std::size_t h = 0; h < width; ++h)
                pp.mlp_w1.values()[(f * d + j) * width + h] =
                    p.mlp_w1.values()[(perm[f] * d + j) * width + h];

    const double permuted = model_forward(xp, pp, false, drop_rng).value();
    CHECK(permuted == doctest::Approx(base).epsilon(1e-9));
}

TEST_CASE("checkpoints round-trip bitwise") {
    ModelConfig c = micro_config();
    c.norm_type = NormType::Batch;  // include running stats in the file
    StstParameters p = StstParameters::init(c, 51);

    // dirty the running statistics so the round trip covers buffers
    auto rng = make_rng(52);
    std::mt19937_64 drop_rng(53);
    for (int i = 0; i < 3; ++i) model_forward(random_input(c, rng), p, true, drop_rng);

    const auto path = std::filesystem::temp_directory_path() / "stst_test_checkpoint.stst";
    save_checkpoint(path, p);
    StstParameters loaded = load_checkpoint(path);

    const auto a = p.named_tensors();
    const auto b = loaded.named_tensors();
    REQUIRE(a.size() == b.size());
    for (std::size_t i = 0; i < a.size(); ++i) {
        CHECK(a[i].first == b[i].first);
        CHECK(a[i].second.values() == b[i].second.values());  // bit-exact
    }
    CHECK(loaded.config.entries() == p.config.entries());

    // the reloaded model computes the identical forward pass
    const Tensor x = random_input(c, rng);
    std::mt19937_64 r1(0), r2(0);
    CHECK(model_forward(x, p, false, r1).value() == model_forward(x, loaded, false, r2).value());
}

TEST_CASE("checkpoint loader rejects foreign files") {
    const auto path = std::filesystem::temp_directory_path() / "stst_not_checkpoint.bin";
    {
        std::ofstream out(path, std::ios::binary);
        out << "definitely not a checkpoint";
    }
    CHECK_THROWS_WITH_AS(load_checkpoint(path), doctest::Contains("magic"), ValueError);
}

TEST_CASE("config validation") {
    ModelConfig c = micro_config();
    c.n_heads = 3;  // 8 % 3 != 0
    CHECK_THROWS_AS(c.validate(), UsageError);

    ModelConfig d = micro_config();
    d.ff_dropout = 0.9;
    CHECK_THROWS_AS(d.validate(), UsageError);

    ModelConfig ok = micro_config();
    ok.validate();
    CHECK(ok.token_count() == 12);
    CHECK(ok.context_width() == 24);
}
