#include "amss/datagen.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "json.hpp"

namespace amss {

using nlohmann::json;

void DataSpec::validate() const {
    if (modalities < 1) throw Error("data spec: need at least one modality");
    if (classes < 2) throw Error("data spec: need at least two classes");
    if (dims.size() != modalities || snr.size() != modalities)
        throw Error("data spec: dims/snr must have one entry per modality");
    for (std::size_t d : dims)
        if (d == 0) throw Error("data spec: dimensions must be >= 1");
    for (double s : snr)
        if (s < 0.0) throw Error("data spec: snr must be >= 0");
    if (train < classes || test < classes)
        throw Error("data spec: train and test sizes must be >= class count");
}

std::vector<Tensor> draw_prototypes(Rng& rng, std::size_t classes,
                                    const std::vector<std::size_t>& dims) {
    std::vector<Tensor> protos;
    for (std::size_t d : dims) {
        Tensor p({classes, d});
        for (std::size_t c = 0; c < classes; ++c) {
            double norm2 = 0.0;
            for (std::size_t i = 0; i < d; ++i) {
                const double v = rng.normal();
                p.at(c, i) = v;
                norm2 += v * v;
            }
            const double inv = 1.0 / std::sqrt(norm2);
            for (std::size_t i = 0; i < d; ++i) p.at(c, i) *= inv;
        }
        protos.push_back(std::move(p));
    }
    return protos;
}

static LabeledBatch gen_split(const DataSpec& spec, const std::vector<Tensor>& protos,
                              std::size_t n, Rng& rng) {
    LabeledBatch b;
    std::vector<std::size_t> labels(n);
    for (std::size_t i = 0; i < n; ++i) labels[i] = i % spec.classes;
    rng.shuffle(labels);
    b.y = Tensor({n, spec.classes});
    for (std::size_t i = 0; i < n; ++i) b.y.at(i, labels[i]) = 1.0;
    for (std::size_t k = 0; k < spec.modalities; ++k) {
        Tensor x({n, spec.dims[k]});
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < spec.dims[k]; ++j)
                x.at(i, j) = spec.snr[k] * protos[k].at(labels[i], j) + rng.normal();
        b.x.push_back(std::move(x));
    }
    return b;
}

Dataset generate(const DataSpec& spec) {
    spec.validate();
    Dataset ds;
    ds.spec = spec;
    Rng rng(spec.seed, kStreamData);
    ds.prototypes = draw_prototypes(rng, spec.classes, spec.dims);
    ds.train = gen_split(spec, ds.prototypes, spec.train, rng);
    if (spec.val > 0) ds.val = gen_split(spec, ds.prototypes, spec.val, rng);
    ds.test = gen_split(spec, ds.prototypes, spec.test, rng);
    return ds;
}

static json spec_to_json(const DataSpec& s) {
    return json{{"modalities", s.modalities}, {"classes", s.classes}, {"dims", s.dims},
                {"snr", s.snr},               {"train", s.train},     {"val", s.val},
                {"test", s.test},             {"seed", s.seed}};
}

static DataSpec spec_from_json(const json& j) {
    DataSpec s;
    s.modalities = j.at("modalities").get<std::size_t>();
    s.classes = j.at("classes").get<std::size_t>();
    s.dims = j.at("dims").get<std::vector<std::size_t>>();
    s.snr = j.at("snr").get<std::vector<double>>();
    s.train = j.at("train").get<std::size_t>();
    s.val = j.at("val").get<std::size_t>();
    s.test = j.at("test").get<std::size_t>();
    s.seed = j.at("seed").get<std::uint64_t>();
    return s;
}

static void write_split(std::ofstream& f, const char* name, const LabeledBatch& b,
                        const DataSpec& spec) {
    char buf[64];
    for (std::size_t i = 0; i < b.size(); ++i) {
        std::size_t label = 0;
        for (std::size_t c = 0; c < spec.classes; ++c)
            if (b.y.at(i, c) == 1.0) label = c;
        f << name << ',' << label;
        for (std::size_t k = 0; k < spec.modalities; ++k)
            for (std::size_t j = 0; j < spec.dims[k]; ++j) {
                std::snprintf(buf, sizeof buf, "%.17g", b.x[k].at(i, j));
                f << ',' << buf;
            }
        f << '\n';
    }
}

void save_dataset(const Dataset& ds, const std::string& path) {
    std::ofstream f(path);
    if (!f) throw Error("cannot open dataset file for writing: " + path);
    f << "# " << spec_to_json(ds.spec).dump() << '\n';
    write_split(f, "train", ds.train, ds.spec);
    if (ds.spec.val > 0) write_split(f, "val", ds.val, ds.spec);
    write_split(f, "test", ds.test, ds.spec);
    if (!f) throw Error("dataset write failed: " + path);
}

Dataset load_dataset(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw Error("cannot open dataset file: " + path);
    std::string line;
    if (!std::getline(f, line) || line.size() < 2 || line[0] != '#')
        throw Error(path + ":1: missing dataset header line");
    DataSpec spec;
    try {
        spec = spec_from_json(json::parse(line.substr(1)));
    } catch (const json::exception& e) {
        throw Error(path + ":1: bad header: " + e.what());
    }
    spec.validate();

    std::size_t fields = 0;
    for (std::size_t d : spec.dims) fields += d;

    struct Rows {
        std::vector<std::size_t> labels;
        std::vector<std::vector<double>> values;
    };
    Rows rows[3];
    std::size_t lineno = 1;
    while (std::getline(f, line)) {
        ++lineno;
        if (line.empty()) continue;
        std::stringstream ss(line);
        std::string tok;
        if (!std::getline(ss, tok, ','))
            throw Error(path + ":" + std::to_string(lineno) + ": missing split field");
        int si;
        if (tok == "train") si = 0;
        else if (tok == "val") si = 1;
        else if (tok == "test") si = 2;
        else throw Error(path + ":" + std::to_string(lineno) + ": unknown split '" + tok + "'");
        if (!std::getline(ss, tok, ','))
            throw Error(path + ":" + std::to_string(lineno) + ": missing label field");
        std::size_t label = 0;
        try {
            label = std::stoul(tok);
        } catch (...) {
            throw Error(path + ":" + std::to_string(lineno) + ": bad label '" + tok + "'");
        }
        if (label >= spec.classes)
            throw Error(path + ":" + std::to_string(lineno) + ": label " + std::to_string(label) +
                        " out of range");
        std::vector<double> vals;
        vals.reserve(fields);
        while (std::getline(ss, tok, ',')) {
            try {
                vals.push_back(std::stod(tok));
            } catch (...) {
                throw Error(path + ":" + std::to_string(lineno) + ": field " +
                            std::to_string(vals.size() + 3) + ": bad value '" + tok + "'");
            }
        }
        if (vals.size() != fields)
            throw Error(path + ":" + std::to_string(lineno) + ": row has " +
                        std::to_string(vals.size()) + " feature fields, header declares " +
                        std::to_string(fields));
        rows[si].labels.push_back(label);
        rows[si].values.push_back(std::move(vals));
    }

    const std::size_t want[3] = {spec.train, spec.val, spec.test};
    const char* names[3] = {"train", "val", "test"};
    Dataset ds;
    ds.spec = spec;
    LabeledBatch* splits[3] = {&ds.train, &ds.val, &ds.test};
    for (int si = 0; si < 3; ++si) {
        const auto& r = rows[si];
        if (r.labels.size() != want[si])
            throw Error(path + ": split '" + names[si] + "' has " +
                        std::to_string(r.labels.size()) + " rows, header declares " +
                        std::to_string(want[si]));
        if (want[si] == 0) continue;
        LabeledBatch& b = *splits[si];
        const std::size_t n = r.labels.size();
        b.y = Tensor({n, spec.classes});
        for (std::size_t i = 0; i < n; ++i) b.y.at(i, r.labels[i]) = 1.0;
        std::size_t off = 0;
        for (std::size_t k = 0; k < spec.modalities; ++k) {
            Tensor x({n, spec.dims[k]});
            for (std::size_t i = 0; i < n; ++i)
                for (std::size_t j = 0; j < spec.dims[k]; ++j)
                    x.at(i, j) = r.values[i][off + j];
            off += spec.dims[k];
            b.x.push_back(std::move(x));
        }
    }
    return ds;
}

LabeledBatch gather(const LabeledBatch& b, const std::vector<std::size_t>& idx) {
    LabeledBatch out;
    out.y = take_rows(b.y, idx);
    for (const auto& x : b.x) out.x.push_back(take_rows(x, idx));
    return out;
}

}  // namespace amss
