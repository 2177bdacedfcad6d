#include <cstdio>
#include <fstream>
#include <sstream>

#include "amss/harness.hpp"
#include "amss/significance.hpp"

namespace amss {

static std::vector<std::size_t> argmax_rows(const Tensor& m) {
    std::vector<std::size_t> out(m.rows());
    for (std::size_t i = 0; i < m.rows(); ++i) {
        std::size_t best = 0;
        for (std::size_t c = 1; c < m.cols(); ++c)
            if (m.at(i, c) > m.at(i, best)) best = c;
        out[i] = best;
    }
    return out;
}

static double accuracy_of(const std::vector<std::size_t>& pred,
                          const std::vector<std::size_t>& truth) {
    std::size_t hits = 0;
    for (std::size_t i = 0; i < pred.size(); ++i) hits += pred[i] == truth[i];
    return static_cast<double>(hits) / static_cast<double>(pred.size());
}

// Unweighted mean of per-class F1; precision, recall and F1 with zero
// denominators count as 0.
static double macro_f1_of(const std::vector<std::size_t>& pred,
                          const std::vector<std::size_t>& truth, std::size_t classes) {
    std::vector<double> tp(classes, 0), fp(classes, 0), fn(classes, 0);
    for (std::size_t i = 0; i < pred.size(); ++i) {
        if (pred[i] == truth[i]) tp[pred[i]] += 1;
        else {
            fp[pred[i]] += 1;
            fn[truth[i]] += 1;
        }
    }
    double f1sum = 0.0;
    for (std::size_t c = 0; c < classes; ++c) {
        const double prec = tp[c] + fp[c] > 0 ? tp[c] / (tp[c] + fp[c]) : 0.0;
        const double rec = tp[c] + fn[c] > 0 ? tp[c] / (tp[c] + fn[c]) : 0.0;
        f1sum += prec + rec > 0 ? 2.0 * prec * rec / (prec + rec) : 0.0;
    }
    return f1sum / static_cast<double>(classes);
}

EvalResult evaluate(const Model& m, const LabeledBatch& split) {
    if (split.size() == 0) throw Error("evaluate: empty split");
    const auto truth = argmax_rows(split.y);
    EvalResult r;
    const auto pred = argmax_rows(predict_joint(m, split));
    r.accuracy = accuracy_of(pred, truth);
    r.macro_f1 = macro_f1_of(pred, truth, m.spec.classes);
    for (std::size_t k = 0; k < m.spec.modalities; ++k) {
        const auto bp = argmax_rows(predict_unimodal(m, split, k));
        r.branch_acc.push_back(accuracy_of(bp, truth));
    }
    return r;
}

double imbalance_degree(const std::vector<double>& u) {
    if (u.size() < 2) throw Error("imbalance_degree needs at least two modalities");
    return std::max(u[0], kEntropyFloor) / std::max(u[1], kEntropyFloor);
}

static void append_num(std::string& s, double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.12g", v);
    s += buf;
}

void write_metrics_csv(const std::string& path, const std::vector<MetricsRow>& rows) {
    if (rows.empty()) throw Error("write_metrics_csv: no rows");
    std::ofstream f(path);
    if (!f) throw Error("cannot open metrics file for writing: " + path);
    const std::size_t K = rows[0].branch_acc.size();
    std::string hdr = "epoch,train_loss,accuracy,macro_f1";
    for (const char* base : {"branch_acc_", "u_hat_", "u_", "rho_"})
        for (std::size_t k = 0; k < K; ++k) hdr += "," + std::string(base) + std::to_string(k);
    hdr += ",imbalance";
    f << hdr << '\n';
    for (const auto& r : rows) {
        std::string line = std::to_string(r.epoch);
        for (const auto* vec : {&r.branch_acc, &r.u_hat, &r.u, &r.rho})
            if (vec->size() != K) throw Error("write_metrics_csv: inconsistent row width");
        line += ',';
        append_num(line, r.train_loss);
        line += ',';
        append_num(line, r.accuracy);
        line += ',';
        append_num(line, r.macro_f1);
        for (const auto* vec : {&r.branch_acc, &r.u_hat, &r.u, &r.rho})
            for (double v : *vec) {
                line += ',';
                append_num(line, v);
            }
        line += ',';
        append_num(line, r.imbalance);
        f << line << '\n';
    }
    if (!f) throw Error("metrics write failed: " + path);
}

std::size_t MetricsTable::col(const std::string& name) const {
    for (std::size_t i = 0; i < cols.size(); ++i)
        if (cols[i] == name) return i;
    throw Error("metrics table: missing column '" + name + "'");
}

MetricsTable read_metrics_csv(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw Error("cannot open metrics file: " + path);
    MetricsTable t;
    std::string line;
    if (!std::getline(f, line)) throw Error(path + ": empty metrics file");
    std::stringstream hs(line);
    std::string tok;
    while (std::getline(hs, tok, ',')) t.cols.push_back(tok);
    std::size_t lineno = 1;
    while (std::getline(f, line)) {
        ++lineno;
        if (line.empty()) continue;
        std::stringstream ss(line);
        std::vector<double> row;
        while (std::getline(ss, tok, ',')) {
            try {
                row.push_back(std::stod(tok));
            } catch (...) {
                throw Error(path + ":" + std::to_string(lineno) + ": bad value '" + tok + "'");
            }
        }
        if (row.size() != t.cols.size())
            throw Error(path + ":" + std::to_string(lineno) + ": row width " +
                        std::to_string(row.size()) + " != header width " +
                        std::to_string(t.cols.size()));
        t.rows.push_back(std::move(row));
    }
    return t;
}

}  // namespace amss
