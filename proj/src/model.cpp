#include "amss/model.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>

namespace amss {

std::string fusion_name(Fusion f) {
    switch (f) {
        case Fusion::Concat: return "concat";
        case Fusion::Sum: return "sum";
        case Fusion::Weight: return "weight";
    }
    return "?";
}

Fusion fusion_from_name(const std::string& s) {
    if (s == "concat") return Fusion::Concat;
    if (s == "sum") return Fusion::Sum;
    if (s == "weight") return Fusion::Weight;
    throw Error("unknown fusion kind '" + s + "' (expected concat|sum|weight)");
}

void ModelSpec::validate() const {
    if (modalities < 2) throw Error("model spec: need at least 2 modalities");
    if (classes < 2) throw Error("model spec: need at least 2 classes");
    if (input_dims.size() != modalities)
        throw Error("model spec: input_dims has " + std::to_string(input_dims.size()) +
                    " entries for " + std::to_string(modalities) + " modalities");
    if (hidden.size() != modalities)
        throw Error("model spec: hidden widths given for " + std::to_string(hidden.size()) +
                    " of " + std::to_string(modalities) + " modalities");
    for (std::size_t d : input_dims)
        if (d == 0) throw Error("model spec: input dimension must be >= 1");
    for (const auto& hs : hidden)
        for (std::size_t w : hs)
            if (w == 0) throw Error("model spec: hidden width must be >= 1");
}

std::vector<double> Model::fusion_weights() const {
    const std::size_t K = spec.modalities;
    if (spec.fusion == Fusion::Weight) return softmax_vec(gate.data);
    return std::vector<double>(K, 1.0 / static_cast<double>(K));
}

static LinearLayer make_layer(const std::string& id, int modality, std::size_t out,
                              std::size_t in, Rng& rng) {
    LinearLayer L;
    L.id = id;
    L.modality = modality;
    L.w = Tensor({out, in});
    L.b = Tensor({out});
    const double s = std::sqrt(6.0 / static_cast<double>(in + out));
    for (double& v : L.w.data) v = rng.uniform(-s, s);
    for (double& v : L.b.data) v = rng.uniform(-s, s);
    return L;
}

Model build_model(const ModelSpec& spec, Rng& rng) {
    spec.validate();
    Model m;
    m.spec = spec;
    const std::size_t K = spec.modalities;
    m.branch.resize(K);
    std::size_t concat_width = 0;
    for (std::size_t k = 0; k < K; ++k) {
        std::size_t in = spec.input_dims[k];
        std::size_t li = 0;
        for (std::size_t wdt : spec.hidden[k]) {
            m.branch[k].push_back(
                make_layer("m" + std::to_string(k) + ".enc" + std::to_string(li), static_cast<int>(k),
                           wdt, in, rng));
            in = wdt;
            ++li;
        }
        if (spec.late_fusion())
            m.branch[k].push_back(
                make_layer("m" + std::to_string(k) + ".clf", static_cast<int>(k), spec.classes, in, rng));
        concat_width += in;
    }
    if (spec.fusion == Fusion::Concat)
        m.joint = make_layer("joint.clf", kShared, spec.classes, concat_width, rng);
    if (spec.fusion == Fusion::Weight) m.gate = Tensor({K});
    return m;
}

std::vector<ParamRef> param_store(Model& m) {
    std::vector<ParamRef> ps;
    for (auto& br : m.branch)
        for (auto& L : br) {
            ps.push_back({L.id + ".w", &L.w, L.id, L.modality});
            ps.push_back({L.id + ".b", &L.b, L.id, L.modality});
        }
    if (m.spec.fusion == Fusion::Concat) {
        ps.push_back({m.joint.id + ".w", &m.joint.w, m.joint.id, kShared});
        ps.push_back({m.joint.id + ".b", &m.joint.b, m.joint.id, kShared});
    }
    if (m.spec.fusion == Fusion::Weight) ps.push_back({"fusion.gate", &m.gate, "fusion", kShared});
    return ps;
}

LinearLayer& layer_by_id(Model& m, const std::string& id) {
    for (auto& br : m.branch)
        for (auto& L : br)
            if (L.id == id) return L;
    if (m.spec.fusion == Fusion::Concat && m.joint.id == id) return m.joint;
    throw Error("no layer named '" + id + "'");
}

const LinearLayer& layer_by_id(const Model& m, const std::string& id) {
    return layer_by_id(const_cast<Model&>(m), id);
}

static void check_batch(const Model& m, const LabeledBatch& batch) {
    const auto& spec = m.spec;
    if (batch.x.size() != spec.modalities)
        throw Error("batch has " + std::to_string(batch.x.size()) + " modalities, model expects " +
                    std::to_string(spec.modalities));
    if (batch.size() == 0) throw Error("empty batch");
    for (std::size_t k = 0; k < spec.modalities; ++k) {
        if (batch.x[k].rows() != batch.size() || batch.x[k].cols() != spec.input_dims[k])
            throw Error("modality " + std::to_string(k) + ": batch shape " +
                        shape_str(batch.x[k].shape) + ", expected (" + std::to_string(batch.size()) +
                        "," + std::to_string(spec.input_dims[k]) + ")");
    }
    if (batch.y.cols() != spec.classes)
        throw Error("label matrix shape " + shape_str(batch.y.shape) + ", expected " +
                    std::to_string(spec.classes) + " classes");
}

// Runs branch k on x. acts, if given, receives the input of every layer.
// relu_top applies the activation to the last layer too (Concat encoders).
static Tensor run_branch(const Model& m, std::size_t k, const Tensor& x,
                         std::vector<Tensor>* acts, bool relu_top) {
    Tensor h = x;
    const auto& layers = m.branch[k];
    for (std::size_t l = 0; l < layers.size(); ++l) {
        if (acts) acts->push_back(h);
        Tensor z = linear_forward(h, layers[l].w, layers[l].b, layers[l].id);
        h = (l + 1 < layers.size() || relu_top) ? relu(z) : std::move(z);
    }
    return h;
}

static constexpr double kProbClamp = 1e-12;

std::pair<double, ForwardCache> forward(const Model& m, const LabeledBatch& batch) {
    check_batch(m, batch);
    const std::size_t K = m.spec.modalities, B = batch.size(), C = m.spec.classes;
    ForwardCache cache;
    cache.model = &m;
    cache.batch = batch;
    cache.acts.resize(K);
    cache.alpha = m.fusion_weights();

    if (m.spec.late_fusion()) {
        cache.logits.resize(K);
        cache.q.resize(K);
        cache.p = Tensor({B, C});
        for (std::size_t k = 0; k < K; ++k) {
            cache.logits[k] = run_branch(m, k, batch.x[k], &cache.acts[k], false);
            cache.q[k] = softmax_rows(cache.logits[k]);
            for (std::size_t i = 0; i < B * C; ++i)
                cache.p.data[i] += cache.alpha[k] * cache.q[k].data[i];
        }
    } else {
        cache.enc_out.resize(K);
        std::size_t width = 0;
        for (std::size_t k = 0; k < K; ++k) {
            cache.enc_out[k] = run_branch(m, k, batch.x[k], &cache.acts[k], true);
            width += cache.enc_out[k].cols();
        }
        cache.joint_in = Tensor({B, width});
        std::size_t off = 0;
        for (std::size_t k = 0; k < K; ++k) {
            const std::size_t w = cache.enc_out[k].cols();
            for (std::size_t i = 0; i < B; ++i)
                std::copy_n(&cache.enc_out[k].data[i * w], w, &cache.joint_in.data[i * width + off]);
            off += w;
        }
        cache.joint_logits = linear_forward(cache.joint_in, m.joint.w, m.joint.b, m.joint.id);
        cache.p = softmax_rows(cache.joint_logits);
    }

    cache.p_true.resize(B);
    double loss = 0.0;
    for (std::size_t i = 0; i < B; ++i) {
        double pt = 0.0;
        for (std::size_t c = 0; c < C; ++c) pt += cache.p.at(i, c) * batch.y.at(i, c);
        pt = std::clamp(pt, kProbClamp, 1.0);
        cache.p_true[i] = pt;
        loss -= std::log(pt);
    }
    cache.loss = loss / static_cast<double>(B);
    return {cache.loss, std::move(cache)};
}

// Backpropagates d (gradient at the branch's top output) through branch k,
// writing layer gradients. top_out is the stored post-relu output when the
// top layer is activated (Concat encoders), null for late-fusion heads.
static void branch_backward(const Model& m, std::size_t k, const std::vector<Tensor>& acts,
                            Tensor d, const Tensor* top_out, GradientSet& g) {
    const auto& layers = m.branch[k];
    if (top_out) d = relu_backward(d, *top_out);
    for (std::size_t l = layers.size(); l-- > 0;) {
        g[layers[l].id + ".w"] = matmul_tn(d, acts[l]);
        g[layers[l].id + ".b"] = colsum(d);
        if (l > 0) d = relu_backward(matmul(d, layers[l].w), acts[l]);
    }
}

GradientSet backward(ForwardCache& cache) {
    if (!cache.model) throw Error("backward: cache not produced by forward");
    if (cache.consumed) throw Error("backward: cache already consumed");
    cache.consumed = true;

    const Model& m = *cache.model;
    const std::size_t K = m.spec.modalities, B = cache.batch.size(), C = m.spec.classes;
    const Tensor& y = cache.batch.y;
    GradientSet g;

    if (m.spec.late_fusion()) {
        std::vector<double> gate_grad(K, 0.0);
        for (std::size_t k = 0; k < K; ++k) {
            Tensor d({B, C});
            for (std::size_t i = 0; i < B; ++i) {
                double qy = 0.0, py = cache.p_true[i];
                for (std::size_t c = 0; c < C; ++c) qy += cache.q[k].at(i, c) * y.at(i, c);
                const double scale = cache.alpha[k] * qy / (py * static_cast<double>(B));
                for (std::size_t c = 0; c < C; ++c)
                    d.at(i, c) = scale * (cache.q[k].at(i, c) - y.at(i, c));
                gate_grad[k] -= cache.alpha[k] * (qy - py) / py;
            }
            branch_backward(m, k, cache.acts[k], std::move(d), nullptr, g);
        }
        if (m.spec.fusion == Fusion::Weight) {
            Tensor gg({K});
            for (std::size_t k = 0; k < K; ++k) gg.data[k] = gate_grad[k] / static_cast<double>(B);
            g["fusion.gate"] = std::move(gg);
        }
    } else {
        Tensor d({B, C});
        for (std::size_t i = 0; i < B * C; ++i)
            d.data[i] = (cache.p.data[i] - y.data[i]) / static_cast<double>(B);
        g[m.joint.id + ".w"] = matmul_tn(d, cache.joint_in);
        g[m.joint.id + ".b"] = colsum(d);
        Tensor din = matmul(d, m.joint.w);
        std::size_t off = 0;
        for (std::size_t k = 0; k < K; ++k) {
            const std::size_t w = cache.enc_out[k].cols();
            Tensor dk({B, w});
            for (std::size_t i = 0; i < B; ++i)
                std::copy_n(&din.data[i * din.cols() + off], w, &dk.data[i * w]);
            off += w;
            branch_backward(m, k, cache.acts[k], std::move(dk), &cache.enc_out[k], g);
        }
    }
    return g;
}

Tensor predict_joint(const Model& m, const LabeledBatch& batch) {
    auto [loss, cache] = forward(m, batch);
    (void)loss;
    return cache.p;
}

Tensor predict_unimodal(const Model& m, const LabeledBatch& batch, std::size_t k) {
    if (k >= m.spec.modalities)
        throw Error("predict_unimodal: modality " + std::to_string(k) + " out of range (K=" +
                    std::to_string(m.spec.modalities) + ")");
    check_batch(m, batch);
    if (m.spec.late_fusion())
        return softmax_rows(run_branch(m, k, batch.x[k], nullptr, false));

    // Concat: zero-pad every other modality's encoder output.
    Tensor hk = run_branch(m, k, batch.x[k], nullptr, true);
    const std::size_t B = batch.size(), width = m.joint.w.cols();
    std::size_t off = 0;
    for (std::size_t j = 0; j < k; ++j) {
        const auto& br = m.branch[j];
        off += br.empty() ? m.spec.input_dims[j] : br.back().w.rows();
    }
    Tensor jin({B, width});
    for (std::size_t i = 0; i < B; ++i)
        std::copy_n(&hk.data[i * hk.cols()], hk.cols(), &jin.data[i * width + off]);
    return softmax_rows(linear_forward(jin, m.joint.w, m.joint.b, m.joint.id));
}

GradientSet finite_diff_gradient(const std::function<double()>& loss_fn,
                                 const std::vector<ParamRef>& params, double eps) {
    if (eps <= 0.0) throw Error("finite_diff_gradient: eps must be positive");
    GradientSet g;
    for (const auto& pr : params) {
        Tensor grad(pr.value->shape);
        for (std::size_t i = 0; i < pr.value->size(); ++i) {
            const double saved = pr.value->data[i];
            pr.value->data[i] = saved + eps;
            const double fp = loss_fn();
            pr.value->data[i] = saved - eps;
            const double fm = loss_fn();
            pr.value->data[i] = saved;
            grad.data[i] = (fp - fm) / (2.0 * eps);
        }
        g[pr.id] = std::move(grad);
    }
    return g;
}

static constexpr char kCkptMagic[8] = {'A', 'M', 'S', 'S', 'C', 'K', 'P', 'T'};
static constexpr unsigned char kCkptVersion = 1;

template <class T>
static void write_raw(std::ofstream& f, const T& v) {
    f.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <class T>
static void read_raw(std::ifstream& f, T& v, const std::string& what) {
    f.read(reinterpret_cast<char*>(&v), sizeof(T));
    if (!f) throw Error("checkpoint: truncated while reading " + what);
}

void save_checkpoint(Model& m, const std::string& path) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw Error("cannot open checkpoint file for writing: " + path);
    f.write(kCkptMagic, 8);
    write_raw(f, kCkptVersion);
    auto ps = param_store(m);
    write_raw(f, static_cast<std::uint32_t>(ps.size()));
    for (const auto& pr : ps) {
        write_raw(f, static_cast<std::uint32_t>(pr.id.size()));
        f.write(pr.id.data(), static_cast<std::streamsize>(pr.id.size()));
        write_raw(f, static_cast<std::uint32_t>(pr.value->shape.size()));
        for (std::size_t d : pr.value->shape) write_raw(f, static_cast<std::uint32_t>(d));
        f.write(reinterpret_cast<const char*>(pr.value->data.data()),
                static_cast<std::streamsize>(pr.value->data.size() * sizeof(double)));
    }
    if (!f) throw Error("checkpoint: write failed for " + path);
}

void load_checkpoint(Model& m, const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw Error("cannot open checkpoint file: " + path);
    char magic[8];
    f.read(magic, 8);
    if (!f || std::memcmp(magic, kCkptMagic, 8) != 0)
        throw Error("checkpoint: bad magic in " + path);
    unsigned char ver;
    read_raw(f, ver, "version");
    if (ver != kCkptVersion)
        throw Error("checkpoint: unsupported version " + std::to_string(ver));
    std::uint32_t count;
    read_raw(f, count, "parameter count");

    auto ps = param_store(m);
    if (count != ps.size())
        throw Error("checkpoint: holds " + std::to_string(count) + " parameters, model has " +
                    std::to_string(ps.size()));
    std::map<std::string, Tensor> loaded;
    for (std::uint32_t i = 0; i < count; ++i) {
        std::uint32_t idlen;
        read_raw(f, idlen, "id length");
        std::string id(idlen, '\0');
        f.read(id.data(), idlen);
        if (!f) throw Error("checkpoint: truncated while reading id");
        std::uint32_t ndim;
        read_raw(f, ndim, "rank of " + id);
        std::vector<std::size_t> shape(ndim);
        for (auto& d : shape) {
            std::uint32_t v;
            read_raw(f, v, "shape of " + id);
            d = v;
        }
        Tensor t(shape);
        f.read(reinterpret_cast<char*>(t.data.data()),
               static_cast<std::streamsize>(t.data.size() * sizeof(double)));
        if (!f) throw Error("checkpoint: truncated while reading values of " + id);
        loaded.emplace(std::move(id), std::move(t));
    }
    for (auto& pr : ps) {
        auto it = loaded.find(pr.id);
        if (it == loaded.end()) throw Error("checkpoint: missing parameter " + pr.id);
        if (it->second.shape != pr.value->shape)
            throw Error("checkpoint: parameter " + pr.id + " has shape " +
                        shape_str(it->second.shape) + ", model expects " +
                        shape_str(pr.value->shape));
        *pr.value = it->second;
    }
}

}  // namespace amss
