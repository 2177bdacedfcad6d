#include <fstream>
#include <map>
#include <sstream>

#include "amss/harness.hpp"

namespace amss {

std::string strategy_name(Strategy s) {
    switch (s) {
        case Strategy::Baseline: return "baseline";
        case Strategy::GlobalWise: return "global_wise";
        case Strategy::UniformMask: return "uniform_mask";
        case Strategy::Amss: return "amss";
        case Strategy::AmssPlus: return "amss_plus";
        case Strategy::TheoreticalUnbiased: return "theoretical_unbiased";
    }
    return "?";
}

Strategy strategy_from_name(const std::string& s) {
    if (s == "baseline") return Strategy::Baseline;
    if (s == "global_wise") return Strategy::GlobalWise;
    if (s == "uniform_mask") return Strategy::UniformMask;
    if (s == "amss") return Strategy::Amss;
    if (s == "amss_plus") return Strategy::AmssPlus;
    if (s == "theoretical_unbiased") return Strategy::TheoreticalUnbiased;
    throw Error("unknown strategy '" + s + "'");
}

void RunConfig::validate() const {
    if (data_path.empty()) data.validate();
    if (strategy == Strategy::GlobalWise) {
        if (global_v.empty())
            throw Error("config: strategy.v is required for global_wise");
    } else if (!global_v.empty()) {
        throw Error("config: strategy.v is only valid for global_wise");
    }
    if (strategy == Strategy::UniformMask) {
        if (uniform_rho.empty())
            throw Error("config: strategy.rho is required for uniform_mask");
        for (double r : uniform_rho)
            if (r <= 0.0 || r > 1.0)
                throw Error("config: strategy.rho entries must lie in (0,1]");
    } else if (!uniform_rho.empty()) {
        throw Error("config: strategy.rho is only valid for uniform_mask");
    }
    if (lambda < 0.0 || lambda > 1.0) throw Error("config: sig.lambda must lie in [0,1]");
    if (tau <= 0.0) throw Error("config: sig.tau must be positive");
    if (lr <= 0.0) throw Error("config: opt.lr must be positive");
    if (momentum < 0.0 || momentum >= 1.0) throw Error("config: opt.momentum must lie in [0,1)");
    if (decay < 0.0) throw Error("config: opt.decay must be >= 0");
    if (epochs == 0 || batch == 0) throw Error("config: train.epochs and train.batch must be >= 1");
    if (fisher_stride == 0) throw Error("config: mask.fisher_stride must be >= 1");
}

ModelSpec RunConfig::model_spec(const DataSpec& d) const {
    ModelSpec ms;
    ms.modalities = d.modalities;
    ms.classes = d.classes;
    ms.input_dims = d.dims;
    ms.hidden = hidden;
    ms.fusion = fusion;
    if (ms.hidden.empty()) ms.hidden.assign(ms.modalities, {});
    ms.validate();
    return ms;
}

static std::vector<double> parse_double_list(const std::string& v, const std::string& key) {
    std::vector<double> out;
    std::stringstream ss(v);
    std::string tok;
    while (std::getline(ss, tok, ',')) {
        if (tok.empty()) continue;
        try {
            out.push_back(std::stod(tok));
        } catch (...) {
            throw Error("config: bad number '" + tok + "' in " + key);
        }
    }
    return out;
}

static std::vector<std::size_t> parse_size_list(const std::string& v, const std::string& key) {
    std::vector<std::size_t> out;
    for (double d : parse_double_list(v, key)) {
        if (d < 0 || d != static_cast<double>(static_cast<std::size_t>(d)))
            throw Error("config: expected non-negative integers in " + key);
        out.push_back(static_cast<std::size_t>(d));
    }
    return out;
}

static double parse_double(const std::string& v, const std::string& key) {
    try {
        return std::stod(v);
    } catch (...) {
        throw Error("config: bad number '" + v + "' for " + key);
    }
}

static std::size_t parse_size(const std::string& v, const std::string& key) {
    try {
        return static_cast<std::size_t>(std::stoull(v));
    } catch (...) {
        throw Error("config: bad integer '" + v + "' for " + key);
    }
}

RunConfig parse_config_text(const std::string& text, const std::string& origin) {
    RunConfig cfg;
    cfg.data.dims.clear();
    cfg.data.snr.clear();
    std::map<std::size_t, std::vector<std::size_t>> hidden_by_mod;
    std::istringstream in(text);
    std::string line;
    std::size_t lineno = 0;
    auto fail = [&](const std::string& msg) {
        throw Error(origin + ":" + std::to_string(lineno) + ": " + msg);
    };
    while (std::getline(in, line)) {
        ++lineno;
        const auto h = line.find('#');
        if (h != std::string::npos) line.erase(h);
        while (!line.empty() && (line.back() == ' ' || line.back() == '\t' || line.back() == '\r'))
            line.pop_back();
        std::size_t start = line.find_first_not_of(" \t");
        if (start == std::string::npos) continue;
        line.erase(0, start);
        const auto eq = line.find('=');
        if (eq == std::string::npos) fail("expected key=value");
        const std::string key = line.substr(0, eq), val = line.substr(eq + 1);

        try {
            if (key == "data.path") cfg.data_path = val;
            else if (key == "data.seed") cfg.data.seed = parse_size(val, key);
            else if (key == "data.modalities") cfg.data.modalities = parse_size(val, key);
            else if (key == "data.classes") cfg.data.classes = parse_size(val, key);
            else if (key == "data.dims") cfg.data.dims = parse_size_list(val, key);
            else if (key == "data.snr") cfg.data.snr = parse_double_list(val, key);
            else if (key == "data.train") cfg.data.train = parse_size(val, key);
            else if (key == "data.val") cfg.data.val = parse_size(val, key);
            else if (key == "data.test") cfg.data.test = parse_size(val, key);
            else if (key == "model.fusion") cfg.fusion = fusion_from_name(val);
            else if (key.rfind("model.hidden.", 0) == 0) {
                const std::size_t k = parse_size(key.substr(13), key);
                hidden_by_mod[k] = parse_size_list(val, key);
            } else if (key == "strategy") cfg.strategy = strategy_from_name(val);
            else if (key == "strategy.v") cfg.global_v = parse_double_list(val, key);
            else if (key == "strategy.rho") cfg.uniform_rho = parse_double_list(val, key);
            else if (key == "mask.scope") cfg.scope = scope_from_name(val);
            else if (key == "mask.fisher_stride") cfg.fisher_stride = parse_size(val, key);
            else if (key == "sig.lambda") cfg.lambda = parse_double(val, key);
            else if (key == "sig.tau") cfg.tau = parse_double(val, key);
            else if (key == "opt.lr") cfg.lr = parse_double(val, key);
            else if (key == "opt.momentum") cfg.momentum = parse_double(val, key);
            else if (key == "opt.decay") cfg.decay = parse_double(val, key);
            else if (key == "opt.patience") cfg.lr_patience = parse_size(val, key);
            else if (key == "train.epochs") cfg.epochs = parse_size(val, key);
            else if (key == "train.batch") cfg.batch = parse_size(val, key);
            else if (key == "seed") cfg.seed = parse_size(val, key);
            else if (key == "out.dir") cfg.out_dir = val;
            else fail("unknown key '" + key + "'");
        } catch (const Error& e) {
            if (std::string(e.what()).rfind(origin, 0) == 0) throw;
            fail(e.what());
        }
    }
    if (!hidden_by_mod.empty()) {
        std::size_t maxk = 0;
        for (const auto& [k, v] : hidden_by_mod) maxk = std::max(maxk, k);
        cfg.hidden.assign(maxk + 1, {});
        for (const auto& [k, v] : hidden_by_mod) cfg.hidden[k] = v;
    }
    cfg.validate();
    return cfg;
}

RunConfig parse_config_file(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw Error("cannot open config file: " + path);
    std::stringstream ss;
    ss << f.rdbuf();
    return parse_config_text(ss.str(), path);
}

}  // namespace amss
