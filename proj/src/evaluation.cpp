#include "stst/evaluation.hpp"

#include <cmath>

namespace stst {

double accuracy(const ConfusionCounts& c) {
    if (c.total() == 0) throw ValueError("accuracy: no evaluated samples");
    return double(c.tp + c.tn) / double(c.total());
}

double mcc(const ConfusionCounts& c) {
    const double tp = double(c.tp), tn = double(c.tn), fp = double(c.fp), fn = double(c.fn);
    const double f1 = tp + fp, f2 = tp + fn, f3 = tn + fp, f4 = tn + fn;
    if (f1 == 0.0 || f2 == 0.0 || f3 == 0.0 || f4 == 0.0) return 0.0;
    return (tp * tn - fn * fp) / std::sqrt(f1 * f2 * f3 * f4);
}

EvalResult evaluate(StstParameters& params, const std::vector<WindowSample>& samples,
                    double threshold) {
    EvalResult result;
    std::mt19937_64 rng(0);  // unused in eval mode
    for (const auto& s : samples) {
        if (s.n_cols != params.config.sample_width() || s.n_rows != params.config.context_window)
            throw ShapeError("evaluate: sample " + std::to_string(s.n_rows) + "x" +
                             std::to_string(s.n_cols) + " does not match checkpoint configuration " +
                             std::to_string(params.config.context_window) + "x" +
                             std::to_string(params.config.sample_width()));
        const double prob = model_forward(sample_to_tensor(s), params, false, rng).value();
        const int pred = prob > threshold ? 1 : 0;
        result.probabilities.push_back(prob);
        result.predictions.push_back(pred);
        if (pred == 1 && s.label == 1) ++result.counts.tp;
        else if (pred == 0 && s.label == 0) ++result.counts.tn;
        else if (pred == 1 && s.label == 0) ++result.counts.fp;
        else ++result.counts.fn;
    }
    if (!samples.empty()) {
        result.accuracy_value = accuracy(result.counts);
        result.mcc_value = mcc(result.counts);
    }
    return result;
}

const std::array<AblationVariant, 4>& ablation_variants() {
    static const std::array<AblationVariant, 4> variants = {{
        {"STST-MLP-T", EmbeddingType::Temporal, HeadType::Mlp},
        {"STST-T", EmbeddingType::Temporal, HeadType::LstmMlp},
        {"STST-MLP", EmbeddingType::Spatiotemporal, HeadType::Mlp},
        {"STST", EmbeddingType::Spatiotemporal, HeadType::LstmMlp},
    }};
    return variants;
}

std::string variant_name(EmbeddingType embedding, HeadType head) {
    for (const auto& v : ablation_variants())
        if (v.embedding == embedding && v.head == head) return v.name;
    return "STST";
}

std::vector<AblationOutcome> ablation_suite(const std::vector<WindowSample>& train,
                                            const std::vector<WindowSample>& valid,
                                            const std::vector<WindowSample>& test,
                                            const ModelConfig& base_config, const TrainSpec& spec) {
    std::vector<AblationOutcome> out;
    for (const auto& variant : ablation_variants()) {
        AblationOutcome outcome;
        outcome.variant = variant;
        try {
            ModelConfig config = base_config;
            config.embedding = variant.embedding;
            config.head = variant.head;
            config.validate();
            StstParameters params = StstParameters::init(config, spec.seed);
            outcome.record = fit(params, train, valid, spec);
            outcome.test = evaluate(params, test);
        } catch (const std::exception& e) {
            outcome.failed = true;
            outcome.error = e.what();
        }
        out.push_back(std::move(outcome));
    }
    return out;
}

}  // namespace stst
