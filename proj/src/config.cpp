#include "stst/config.hpp"

#include <fstream>
#include <sstream>

#include "stst/csv.hpp"

namespace stst {

namespace {

std::string trim(const std::string& s) {
    std::size_t a = s.find_first_not_of(" \t\r");
    std::size_t b = s.find_last_not_of(" \t\r");
    if (a == std::string::npos) return "";
    return s.substr(a, b - a + 1);
}

std::vector<std::string> split_list(const std::string& s) {
    std::vector<std::string> out;
    std::size_t start = 0;
    while (start <= s.size()) {
        const std::size_t comma = s.find(',', start);
        if (comma == std::string::npos) {
            out.push_back(trim(s.substr(start)));
            break;
        }
        out.push_back(trim(s.substr(start, comma - start)));
        start = comma + 1;
    }
    return out;
}

}  // namespace

void RunConfiguration::apply_set(const std::string& key, const std::string& value) {
    if (key == "data_dir") data_dir = value;
    else if (key == "output_dir") output_dir = value;
    else if (key == "benchmark_csv") benchmark_csv = value;
    else if (key == "checkpoint") checkpoint = value;
    else if (key == "predictions_csv") predictions_csv = value;
    else if (key == "dataset_name") dataset_name = value;
    else if (key == "train_start") train_start = Date::parse(value);
    else if (key == "train_end") train_end = Date::parse(value);
    else if (key == "valid_start") valid_start = Date::parse(value);
    else if (key == "valid_end") valid_end = Date::parse(value);
    else if (key == "test_start") test_start = Date::parse(value);
    else if (key == "test_end") test_end = Date::parse(value);
    else if (key == "threshold") threshold = parse_double(value, key);
    else if (key == "top_k") top_k = parse_long(value, key);
    else if (key == "initial_cash") initial_cash = parse_double(value, key);
    else if (key == "gridsearch_budget") gridsearch_budget = parse_long(value, key);
    else if (key.rfind("grid.", 0) == 0) {
        const std::string param = key.substr(5);
        ModelConfig probe_config = model;
        TrainSpec probe_spec = train;
        const auto values = split_list(value);
        if (values.empty() || values.front().empty())
            throw UsageError("empty candidate list for '" + key + "'");
        for (const auto& v : values)
            if (!apply_hyperparameter(probe_config, probe_spec, param, v))
                throw UsageError("unknown grid parameter '" + param + "'");
        // Redefinition replaces the previous candidate list.
        for (auto& entry : train.grid)
            if (entry.first == param) {
                entry.second = values;
                return;
            }
        train.grid.emplace_back(param, values);
    } else if (!apply_hyperparameter(model, train, key, value)) {
        throw UsageError("unknown configuration key '" + key + "'");
    }
}

RunConfiguration RunConfiguration::parse_text(const std::string& text, const std::string& origin) {
    RunConfiguration cfg;
    std::istringstream in(text);
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const std::string stripped = trim(line);
        if (stripped.empty() || stripped[0] == '#') continue;
        const std::size_t eq = stripped.find('=');
        if (eq == std::string::npos)
            throw UsageError(origin + ":" + std::to_string(lineno) + ": expected key = value");
        const std::string key = trim(stripped.substr(0, eq));
        const std::string value = trim(stripped.substr(eq + 1));
        if (key.empty())
            throw UsageError(origin + ":" + std::to_string(lineno) + ": empty key");
        try {
            cfg.apply_set(key, value);
        } catch (const Error& e) {
            throw UsageError(origin + ":" + std::to_string(lineno) + ": " + e.what());
        }
    }
    return cfg;
}

RunConfiguration RunConfiguration::load(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw UsageError("cannot open configuration file: " + path.string());
    std::stringstream buffer;
    buffer << in.rdbuf();
    return parse_text(buffer.str(), path.string());
}

std::string RunConfiguration::normalized() const {
    std::ostringstream out;
    auto put = [&](const std::string& key, const std::string& value) {
        out << key << " = " << value << "\n";
    };
    if (!data_dir.empty()) put("data_dir", data_dir.string());
    put("output_dir", output_dir.string());
    if (!benchmark_csv.empty()) put("benchmark_csv", benchmark_csv.string());
    if (!checkpoint.empty()) put("checkpoint", checkpoint.string());
    if (!predictions_csv.empty()) put("predictions_csv", predictions_csv.string());
    put("dataset_name", dataset_name);
    if (train_start) put("train_start", train_start->str());
    if (train_end) put("train_end", train_end->str());
    if (valid_start) put("valid_start", valid_start->str());
    if (valid_end) put("valid_end", valid_end->str());
    if (test_start) put("test_start", test_start->str());
    if (test_end) put("test_end", test_end->str());
    for (const auto& [key, value] : model.entries()) put(key, value);
    put("learning_rate", fnum(train.learning_rate));
    put("batch_size", std::to_string(train.batch_size));
    put("warmup_steps", std::to_string(train.warmup_steps));
    put("max_epochs", std::to_string(train.max_epochs));
    put("early_stop_patience", std::to_string(train.early_stop_patience));
    put("seed", std::to_string(train.seed));
    put("grad_clip_norm", fnum(train.grad_clip_norm));
    put("threshold", fnum(threshold));
    put("top_k", std::to_string(top_k));
    put("initial_cash", fnum(initial_cash));
    put("gridsearch_budget", std::to_string(gridsearch_budget));
    for (const auto& [param, values] : train.grid) {
        std::string joined;
        for (const auto& v : values) joined += (joined.empty() ? "" : ",") + v;
        put("grid." + param, joined);
    }
    return out.str();
}

SplitSpec RunConfiguration::split() const {
    auto need = [](const char* name, const std::optional<Date>& d) {
        if (!d) throw UsageError(std::string("missing configuration key '") + name + "'");
        return *d;
    };
    SplitSpec s;
    s.train_start = need("train_start", train_start);
    s.train_end = need("train_end", train_end);
    s.valid_start = need("valid_start", valid_start);
    s.valid_end = need("valid_end", valid_end);
    s.test_start = need("test_start", test_start);
    s.test_end = need("test_end", test_end);
    s.validate();
    return s;
}

}  // namespace stst
