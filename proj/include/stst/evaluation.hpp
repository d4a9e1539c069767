#pragma once

#include <array>
#include <string>
#include <vector>

#include "stst/model.hpp"
#include "stst/training.hpp"

namespace stst {

struct ConfusionCounts {
    std::size_t tp = 0, tn = 0, fp = 0, fn = 0;
    std::size_t total() const { return tp + tn + fp + fn; }
};

// (tp + tn) / total; throws on an empty count.
double accuracy(const ConfusionCounts& c);

// Matthews correlation coefficient in [-1, 1]; 0 whenever a denominator
// factor vanishes.
double mcc(const ConfusionCounts& c);

struct EvalResult {
    ConfusionCounts counts;
    double accuracy_value = 0;
    double mcc_value = 0;
    std::vector<double> probabilities;  // one per sample, input order
    std::vector<int> predictions;
};

// Deterministic eval-mode pass: prediction = 1 iff probability > threshold.
EvalResult evaluate(StstParameters& params, const std::vector<WindowSample>& samples,
                    double threshold = 0.5);

struct AblationVariant {
    std::string name;
    EmbeddingType embedding;
    HeadType head;
};

// The four model variants in the reporting order STST-MLP-T, STST-T,
// STST-MLP, STST.
const std::array<AblationVariant, 4>& ablation_variants();
std::string variant_name(EmbeddingType embedding, HeadType head);

struct AblationOutcome {
    AblationVariant variant;
    bool failed = false;
    std::string error;
    RunRecord record;
    EvalResult test;
};

// Trains and evaluates each variant from the shared base configuration,
// seed and data. A failing variant is recorded; the others proceed.
std::vector<AblationOutcome> ablation_suite(const std::vector<WindowSample>& train,
                                            const std::vector<WindowSample>& valid,
                                            const std::vector<WindowSample>& test,
                                            const ModelConfig& base_config, const TrainSpec& spec);

}  // namespace stst
