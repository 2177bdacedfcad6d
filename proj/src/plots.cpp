#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "amss/harness.hpp"

namespace amss {

namespace {

constexpr double kWidth = 720.0;
constexpr double kHeight = 440.0;
constexpr double kMargin = 56.0;

const char* kPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd",
                          "#ff7f0e", "#8c564b", "#17becf", "#7f7f7f"};
constexpr std::size_t kPaletteSize = sizeof(kPalette) / sizeof(kPalette[0]);

struct Series {
    std::string label;
    std::vector<double> y;
};

std::string num(double v, const char* spec = "%.2f") {
    char buf[40];
    std::snprintf(buf, sizeof(buf), spec, v);
    return buf;
}

// Fixed-size line chart over the epoch index; identical inputs give
// identical bytes.
std::string render_chart(const std::string& title, const std::vector<Series>& series) {
    double lo = 0.0, hi = 1.0;
    std::size_t max_n = 0;
    bool any = false;
    for (const auto& s : series)
        for (const double v : s.y) {
            if (!any) {
                lo = hi = v;
                any = true;
            }
            lo = std::min(lo, v);
            hi = std::max(hi, v);
        }
    for (const auto& s : series) max_n = std::max(max_n, s.y.size());
    if (!any || !(hi > lo)) {
        lo -= 0.5;
        hi += 0.5;
    }

    const double x0 = kMargin, x1 = kWidth - kMargin;
    const double y0 = kHeight - kMargin, y1 = kMargin;
    auto sx = [&](std::size_t i) {
        const double t = max_n > 1 ? static_cast<double>(i) / static_cast<double>(max_n - 1) : 0.0;
        return x0 + t * (x1 - x0);
    };
    auto sy = [&](double v) { return y0 + (v - lo) / (hi - lo) * (y1 - y0); };

    std::string svg;
    svg += "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + num(kWidth, "%.0f") +
           "\" height=\"" + num(kHeight, "%.0f") + "\" viewBox=\"0 0 " + num(kWidth, "%.0f") +
           " " + num(kHeight, "%.0f") + "\">\n";
    svg += "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    svg += "<text x=\"" + num(kWidth / 2) + "\" y=\"28\" text-anchor=\"middle\" "
           "font-family=\"monospace\" font-size=\"16\">" + title + "</text>\n";
    svg += "<line x1=\"" + num(x0) + "\" y1=\"" + num(y0) + "\" x2=\"" + num(x1) + "\" y2=\"" +
           num(y0) + "\" stroke=\"black\"/>\n";
    svg += "<line x1=\"" + num(x0) + "\" y1=\"" + num(y0) + "\" x2=\"" + num(x0) + "\" y2=\"" +
           num(y1) + "\" stroke=\"black\"/>\n";
    svg += "<text x=\"" + num(x0 - 6) + "\" y=\"" + num(y0 + 4) +
           "\" text-anchor=\"end\" font-family=\"monospace\" font-size=\"11\">" +
           num(lo, "%.6g") + "</text>\n";
    svg += "<text x=\"" + num(x0 - 6) + "\" y=\"" + num(y1 + 4) +
           "\" text-anchor=\"end\" font-family=\"monospace\" font-size=\"11\">" +
           num(hi, "%.6g") + "</text>\n";
    svg += "<text x=\"" + num(x1) + "\" y=\"" + num(y0 + 16) +
           "\" text-anchor=\"end\" font-family=\"monospace\" font-size=\"11\">epoch " +
           std::to_string(max_n == 0 ? 0 : max_n - 1) + "</text>\n";

    for (std::size_t s = 0; s < series.size(); ++s) {
        const auto& ser = series[s];
        const char* color = kPalette[s % kPaletteSize];
        if (!ser.y.empty()) {
            std::string pts;
            for (std::size_t i = 0; i < ser.y.size(); ++i) {
                if (i > 0) pts += " ";
                pts += num(sx(i)) + "," + num(sy(ser.y[i]));
            }
            svg += "<polyline fill=\"none\" stroke=\"" + std::string(color) +
                   "\" stroke-width=\"1.5\" points=\"" + pts + "\"/>\n";
        }
        const double ly = y1 + 14.0 * static_cast<double>(s);
        svg += "<rect x=\"" + num(x1 - 150) + "\" y=\"" + num(ly - 8) +
               "\" width=\"10\" height=\"10\" fill=\"" + std::string(color) + "\"/>\n";
        svg += "<text x=\"" + num(x1 - 136) + "\" y=\"" + num(ly + 1) +
               "\" font-family=\"monospace\" font-size=\"11\">" + ser.label + "</text>\n";
    }
    svg += "</svg>\n";
    return svg;
}

void write_file(const std::string& path, const std::string& body) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot write " + path);
    out << body;
    if (!out) throw Error("short write to " + path);
}

}  // namespace

void emit_plots(const std::string& run_dir) {
    namespace fs = std::filesystem;
    std::vector<fs::path> files;
    for (const auto& e : fs::directory_iterator(run_dir)) {
        const std::string name = e.path().filename().string();
        if (name.size() >= 7 && name.rfind("metrics", 0) == 0 &&
            name.substr(name.size() - 4) == ".csv")
            files.push_back(e.path());
    }
    std::sort(files.begin(), files.end());
    if (files.empty()) throw Error("no metrics csv found in " + run_dir);

    std::vector<Series> loss, imbalance, branches;
    for (const auto& f : files) {
        const MetricsTable t = read_metrics_csv(f.string());
        if (t.rows.empty()) throw Error("empty metrics in " + f.string());
        std::string base = f.stem().string();
        Series ls{base, {}}, is{base, {}};
        const std::size_t cl = t.col("train_loss"), ci = t.col("imbalance");
        for (const auto& row : t.rows) {
            ls.y.push_back(row[cl]);
            is.y.push_back(row[ci]);
        }
        loss.push_back(std::move(ls));
        imbalance.push_back(std::move(is));
        for (std::size_t k = 0;; ++k) {
            const std::string col = "branch_acc_" + std::to_string(k);
            if (std::find(t.cols.begin(), t.cols.end(), col) == t.cols.end()) break;
            Series bs{base + ":b" + std::to_string(k), {}};
            const std::size_t cb = t.col(col);
            for (const auto& row : t.rows) bs.y.push_back(row[cb]);
            branches.push_back(std::move(bs));
        }
    }

    write_file(run_dir + "/loss.svg", render_chart("training loss", loss));
    write_file(run_dir + "/imbalance.svg", render_chart("imbalance degree", imbalance));
    write_file(run_dir + "/branches.svg", render_chart("branch accuracy", branches));
}

}  // namespace amss
