#include "stst/training.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <numeric>
#include <thread>

#include "stst/csv.hpp"
#include "stst/evaluation.hpp"

namespace stst {

void TrainSpec::validate() const {
    if (!(learning_rate > 0)) throw UsageError("learning_rate must be positive");
    if (batch_size < 1) throw UsageError("batch_size must be >= 1");
    if (max_epochs < 1) throw UsageError("max_epochs must be >= 1");
}

Tensor bce_loss(const Tensor& probs, const std::vector<double>& labels) {
    if (probs.shape().size() != 1 || probs.size() != labels.size())
        throw ShapeError("bce_loss: probabilities " + shape_str(probs.shape()) + " vs " +
                         std::to_string(labels.size()) + " labels");
    const std::size_t n = labels.size();
    const Tensor y = Tensor::from({n}, labels);
    const Tensor ones = Tensor::full({n}, 1.0);
    const Tensor p = clamp(probs, 1e-7, 1.0 - 1e-7);
    const Tensor term = add(hadamard(y, log(p)), hadamard(sub(ones, y), log(sub(ones, p))));
    return scale(mean(term), -1.0);
}

double bce_value(double prob, double label) {
    const double p = std::min(std::max(prob, 1e-7), 1.0 - 1e-7);
    return -(label * std::log(p) + (1.0 - label) * std::log(1.0 - p));
}

double lr_at_step(std::size_t step, double lr_max, std::size_t warmup) {
    if (step < warmup) return lr_max * double(step) / double(warmup);
    return lr_max;
}

AdamOptimizer::AdamOptimizer(std::vector<Tensor> params, double beta1, double beta2, double eps)
    : params_(std::move(params)), beta1_(beta1), beta2_(beta2), eps_(eps) {
    for (const auto& p : params_) {
        m_.emplace_back(p.size(), 0.0);
        v_.emplace_back(p.size(), 0.0);
    }
}

void AdamOptimizer::zero_grad() {
    for (auto& p : params_) p.zero_grad();
}

void AdamOptimizer::step(double lr, double clip_norm) {
    ++t_;
    double scale = 1.0;
    if (clip_norm > 0.0) {
        double sq = 0.0;
        for (const auto& p : params_)
            for (double g : p.grad()) sq += g * g;
        const double norm = std::sqrt(sq);
        if (norm > clip_norm) scale = clip_norm / norm;
    }
    const double bc1 = 1.0 - std::pow(beta1_, double(t_));
    const double bc2 = 1.0 - std::pow(beta2_, double(t_));
    for (std::size_t i = 0; i < params_.size(); ++i) {
        auto& vals = params_[i].values();
        const auto& grad = params_[i].grad();
        if (grad.empty()) continue;
        for (std::size_t j = 0; j < vals.size(); ++j) {
            const double g = grad[j] * scale;
            m_[i][j] = beta1_ * m_[i][j] + (1.0 - beta1_) * g;
            v_[i][j] = beta2_ * v_[i][j] + (1.0 - beta2_) * g * g;
            const double mhat = m_[i][j] / bc1;
            const double vhat = v_[i][j] / bc2;
            vals[j] -= lr * mhat / (std::sqrt(vhat) + eps_);
        }
    }
}

bool apply_hyperparameter(ModelConfig& config, TrainSpec& spec, const std::string& key,
                          const std::string& value) {
    if (key == "learning_rate") spec.learning_rate = parse_double(value, key);
    else if (key == "batch_size") spec.batch_size = parse_long(value, key);
    else if (key == "warmup_steps") spec.warmup_steps = parse_long(value, key);
    else if (key == "max_epochs") spec.max_epochs = parse_long(value, key);
    else if (key == "early_stop_patience") spec.early_stop_patience = parse_long(value, key);
    else if (key == "seed") spec.seed = std::uint64_t(parse_long(value, key));
    else if (key == "grad_clip_norm") spec.grad_clip_norm = parse_double(value, key);
    else if (key == "context_window") config.context_window = parse_long(value, key);
    else if (key == "n_features") config.n_features = parse_long(value, key);
    else if (key == "n_time") config.n_time = parse_long(value, key);
    else if (key == "d_model") config.d_model = parse_long(value, key);
    else if (key == "n_encoders") config.n_encoders = parse_long(value, key);
    else if (key == "n_heads") config.n_heads = parse_long(value, key);
    else if (key == "d_ff") config.d_ff = parse_long(value, key);
    else if (key == "ff_dropout") config.ff_dropout = parse_double(value, key);
    else if (key == "attn_dropout") config.attn_dropout = parse_double(value, key);
    else if (key == "n_lstm_layers") config.n_lstm_layers = parse_long(value, key);
    else if (key == "d_lstm_hidden") config.d_lstm_hidden = parse_long(value, key);
    else if (key == "norm_type") config.norm_type = norm_type_from(value);
    else if (key == "norm_placement") config.norm_placement = norm_placement_from(value);
    else if (key == "head") config.head = head_type_from(value);
    else if (key == "time2vec_dim") config.time2vec_dim = parse_long(value, key);
    else if (key == "embedding") config.embedding = embedding_from(value);
    else return false;
    return true;
}

std::pair<double, double> evaluate_split(StstParameters& params,
                                         const std::vector<WindowSample>& samples) {
    std::mt19937_64 rng(0);  // unused in eval mode
    double loss = 0.0;
    std::size_t correct = 0;
    for (const auto& s : samples) {
        const double prob = model_forward(sample_to_tensor(s), params, false, rng).value();
        loss += bce_value(prob, double(s.label));
        const int pred = prob > 0.5 ? 1 : 0;
        correct += pred == s.label ? 1 : 0;
    }
    const double n = double(samples.size());
    return {loss / n, double(correct) / n};
}

RunRecord fit(StstParameters& params, const std::vector<WindowSample>& train,
              const std::vector<WindowSample>& valid, const TrainSpec& spec) {
    spec.validate();
    if (train.empty() || valid.empty())
        throw ValueError("fit: train and validation sets must be nonempty");
    for (const auto& s : train)
        if (s.n_cols != params.config.sample_width())
            throw ShapeError("fit: sample width " + std::to_string(s.n_cols) +
                             " does not match model configuration (" +
                             std::to_string(params.config.sample_width()) + ")");

    const auto t0 = std::chrono::steady_clock::now();
    // All randomness flows from spec.seed: one stream for shuffling, one for
    // dropout masks.
    std::mt19937_64 shuffle_rng(spec.seed);
    std::mt19937_64 dropout_rng(spec.seed ^ 0x9e3779b97f4a7c15ULL);

    AdamOptimizer opt(params.trainable());
    RunRecord record;
    record.config = params.config;
    record.spec = spec;

    std::vector<std::size_t> indices(train.size());
    std::iota(indices.begin(), indices.end(), 0);

    double best_loss = std::numeric_limits<double>::infinity();
    std::vector<std::vector<double>> best_values = params.snapshot_values();
    std::size_t epochs_since_best = 0;
    std::size_t global_step = 0;

    for (std::size_t epoch = 0; epoch < spec.max_epochs; ++epoch) {
        std::shuffle(indices.begin(), indices.end(), shuffle_rng);
        double train_loss_sum = 0.0;
        std::size_t train_correct = 0;

        for (std::size_t batch_start = 0; batch_start < indices.size();
             batch_start += spec.batch_size) {
            const std::size_t batch_end = std::min(batch_start + spec.batch_size, indices.size());
            std::vector<Tensor> probs;
            std::vector<double> labels;
            probs.reserve(batch_end - batch_start);
            for (std::size_t i = batch_start; i < batch_end; ++i) {
                const WindowSample& s = train[indices[i]];
                Tensor prob = model_forward(sample_to_tensor(s), params, true, dropout_rng);
                if (!std::isfinite(prob.value()))
                    throw DivergenceError("training diverged at optimizer step " +
                                          std::to_string(global_step) + " (non-finite probability)");
                const int pred = prob.value() > 0.5 ? 1 : 0;
                train_correct += pred == s.label ? 1 : 0;
                probs.push_back(std::move(prob));
                labels.push_back(double(s.label));
            }
            opt.zero_grad();
            const Tensor loss = bce_loss(stack_scalars(probs), labels);
            if (!std::isfinite(loss.value()))
                throw DivergenceError("training diverged at optimizer step " +
                                      std::to_string(global_step) + " (non-finite loss)");
            backward(loss);
            opt.step(lr_at_step(global_step, spec.learning_rate, spec.warmup_steps),
                     spec.grad_clip_norm);
            ++global_step;
            train_loss_sum += loss.value() * double(batch_end - batch_start);
        }

        EpochStats stats;
        stats.train_loss = train_loss_sum / double(train.size());
        stats.train_acc = double(train_correct) / double(train.size());
        std::tie(stats.valid_loss, stats.valid_acc) = evaluate_split(params, valid);
        record.epochs.push_back(stats);

        if (stats.valid_loss < best_loss) {
            best_loss = stats.valid_loss;
            best_values = params.snapshot_values();
            record.best_epoch = epoch;
            epochs_since_best = 0;
        } else {
            ++epochs_since_best;
            if (epochs_since_best > spec.early_stop_patience) break;
        }
    }

    params.restore_values(best_values);
    record.best_valid_loss = best_loss;

    const EvalResult er = evaluate(params, valid);
    record.valid_accuracy = er.accuracy_value;
    record.valid_mcc = er.mcc_value;
    record.wall_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return record;
}

std::vector<GridTrial> grid_search(const ModelConfig& base_config, const TrainSpec& base_spec,
                                   const WindowProvider& provider, std::size_t budget,
                                   std::size_t jobs) {
    if (base_spec.grid.empty()) throw UsageError("grid_search: empty search space");
    for (const auto& [key, values] : base_spec.grid) {
        if (values.empty()) throw UsageError("grid_search: no candidates for '" + key + "'");
        ModelConfig probe_config = base_config;
        TrainSpec probe_spec = base_spec;
        if (!apply_hyperparameter(probe_config, probe_spec, key, values.front()))
            throw UsageError("grid_search: unknown parameter '" + key + "'");
    }

    std::size_t total = 1;
    for (const auto& [key, values] : base_spec.grid) total *= values.size();

    std::vector<std::size_t> chosen(total);
    std::iota(chosen.begin(), chosen.end(), 0);
    if (budget > 0 && budget < total) {
        std::mt19937_64 rng(base_spec.seed);
        std::shuffle(chosen.begin(), chosen.end(), rng);
        chosen.resize(budget);
        std::sort(chosen.begin(), chosen.end());
    }

    std::vector<GridTrial> trials(chosen.size());
    for (std::size_t slot = 0; slot < chosen.size(); ++slot) {
        GridTrial& trial = trials[slot];
        trial.index = chosen[slot];
        trial.config = base_config;
        trial.spec = base_spec;
        trial.spec.grid.clear();
        // Decode the enumeration index: first grid key varies slowest.
        std::size_t radix = total;
        std::size_t rem = chosen[slot];
        for (const auto& [key, values] : base_spec.grid) {
            radix /= values.size();
            const std::string& value = values[rem / radix];
            rem %= radix;
            trial.assignment.emplace_back(key, value);
            apply_hyperparameter(trial.config, trial.spec, key, value);
        }
    }

    std::atomic<std::size_t> next{0};
    auto worker = [&]() {
        while (true) {
            const std::size_t slot = next.fetch_add(1);
            if (slot >= trials.size()) return;
            GridTrial& trial = trials[slot];
            try {
                trial.config.validate();
                trial.spec.validate();
                auto [train, valid] = provider(trial.config.context_window);
                StstParameters params = StstParameters::init(trial.config, trial.spec.seed);
                trial.record = fit(params, train, valid, trial.spec);
            } catch (const std::exception& e) {
                trial.failed = true;
                trial.error = e.what();
            }
        }
    };
    if (jobs <= 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        for (std::size_t i = 0; i < std::min(jobs, trials.size()); ++i) pool.emplace_back(worker);
        for (auto& t : pool) t.join();
    }

    std::stable_sort(trials.begin(), trials.end(), [](const GridTrial& a, const GridTrial& b) {
        if (a.failed != b.failed) return !a.failed;
        if (a.failed) return a.index < b.index;
        if (a.record.valid_accuracy != b.record.valid_accuracy)
            return a.record.valid_accuracy > b.record.valid_accuracy;
        if (a.record.valid_mcc != b.record.valid_mcc) return a.record.valid_mcc > b.record.valid_mcc;
        return a.index < b.index;
    });
    return trials;
}

}  // namespace stst
