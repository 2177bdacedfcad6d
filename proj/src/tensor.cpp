#include "amss/tensor.hpp"

#include <algorithm>
#include <cmath>

namespace amss {

Tensor::Tensor(std::vector<std::size_t> s) : shape(std::move(s)) {
    std::size_t n = 1;
    for (std::size_t d : shape) {
        if (d == 0) throw Error("tensor dimension must be positive, got shape " + shape_str(shape));
        n *= d;
    }
    data.assign(n, 0.0);
}

std::size_t Tensor::rows() const {
    if (shape.size() != 2) throw Error("rows() on non-matrix tensor of shape " + shape_str(shape));
    return shape[0];
}

std::size_t Tensor::cols() const {
    if (shape.size() != 2) throw Error("cols() on non-matrix tensor of shape " + shape_str(shape));
    return shape[1];
}

std::string shape_str(const std::vector<std::size_t>& s) {
    std::string out = "(";
    for (std::size_t i = 0; i < s.size(); ++i) {
        if (i) out += ",";
        out += std::to_string(s[i]);
    }
    return out + ")";
}

void check_finite(const Tensor& t, const std::string& what) {
    for (double v : t.data)
        if (!std::isfinite(v)) throw Error("non-finite value in " + what);
}

Tensor linear_forward(const Tensor& x, const Tensor& w, const Tensor& b,
                      const std::string& layer_id) {
    if (x.shape.size() != 2 || w.shape.size() != 2 || x.cols() != w.cols())
        throw Error("layer " + layer_id + ": input shape " + shape_str(x.shape) +
                    " does not match weight shape " + shape_str(w.shape));
    if (b.size() != w.rows())
        throw Error("layer " + layer_id + ": bias size " + std::to_string(b.size()) +
                    " does not match " + std::to_string(w.rows()) + " output units");
    const std::size_t B = x.rows(), in = x.cols(), out = w.rows();
    Tensor y({B, out});
    for (std::size_t i = 0; i < B; ++i) {
        const double* xi = &x.data[i * in];
        double* yi = &y.data[i * out];
        for (std::size_t j = 0; j < out; ++j) {
            const double* wj = &w.data[j * in];
            double acc = b.data[j];
            for (std::size_t c = 0; c < in; ++c) acc += xi[c] * wj[c];
            yi[j] = acc;
        }
    }
    return y;
}

Tensor matmul_tn(const Tensor& d, const Tensor& x) {
    if (d.rows() != x.rows())
        throw Error("matmul_tn: row mismatch " + shape_str(d.shape) + " vs " + shape_str(x.shape));
    const std::size_t B = d.rows(), out = d.cols(), in = x.cols();
    Tensor g({out, in});
    for (std::size_t i = 0; i < B; ++i) {
        const double* di = &d.data[i * out];
        const double* xi = &x.data[i * in];
        for (std::size_t j = 0; j < out; ++j) {
            double* gj = &g.data[j * in];
            const double dij = di[j];
            if (dij == 0.0) continue;
            for (std::size_t c = 0; c < in; ++c) gj[c] += dij * xi[c];
        }
    }
    return g;
}

Tensor matmul(const Tensor& d, const Tensor& w) {
    if (d.cols() != w.rows())
        throw Error("matmul: inner mismatch " + shape_str(d.shape) + " vs " + shape_str(w.shape));
    const std::size_t B = d.rows(), out = d.cols(), in = w.cols();
    Tensor y({B, in});
    for (std::size_t i = 0; i < B; ++i) {
        const double* di = &d.data[i * out];
        double* yi = &y.data[i * in];
        for (std::size_t j = 0; j < out; ++j) {
            const double dij = di[j];
            if (dij == 0.0) continue;
            const double* wj = &w.data[j * in];
            for (std::size_t c = 0; c < in; ++c) yi[c] += dij * wj[c];
        }
    }
    return y;
}

Tensor colsum(const Tensor& d) {
    const std::size_t B = d.rows(), out = d.cols();
    Tensor s({out});
    for (std::size_t i = 0; i < B; ++i)
        for (std::size_t j = 0; j < out; ++j) s.data[j] += d.data[i * out + j];
    return s;
}

Tensor relu(const Tensor& z) {
    Tensor h = z;
    for (double& v : h.data) v = std::max(v, 0.0);
    return h;
}

Tensor relu_backward(const Tensor& d, const Tensor& h) {
    if (!d.same_shape(h))
        throw Error("relu_backward: shape mismatch " + shape_str(d.shape) + " vs " + shape_str(h.shape));
    Tensor g = d;
    for (std::size_t i = 0; i < g.size(); ++i)
        if (h.data[i] <= 0.0) g.data[i] = 0.0;
    return g;
}

Tensor softmax_rows(const Tensor& logits) {
    const std::size_t B = logits.rows(), C = logits.cols();
    Tensor q({B, C});
    for (std::size_t i = 0; i < B; ++i) {
        const double* z = &logits.data[i * C];
        double* qi = &q.data[i * C];
        double m = z[0];
        for (std::size_t c = 1; c < C; ++c) m = std::max(m, z[c]);
        double sum = 0.0;
        for (std::size_t c = 0; c < C; ++c) {
            qi[c] = std::exp(z[c] - m);
            sum += qi[c];
        }
        for (std::size_t c = 0; c < C; ++c) qi[c] /= sum;
    }
    return q;
}

std::vector<double> softmax_vec(const std::vector<double>& v) {
    double m = v[0];
    for (double x : v) m = std::max(m, x);
    std::vector<double> p(v.size());
    double sum = 0.0;
    for (std::size_t i = 0; i < v.size(); ++i) {
        p[i] = std::exp(v[i] - m);
        sum += p[i];
    }
    for (double& x : p) x /= sum;
    return p;
}

Tensor take_rows(const Tensor& m, const std::vector<std::size_t>& idx) {
    const std::size_t C = m.cols();
    Tensor out({idx.size(), C});
    for (std::size_t i = 0; i < idx.size(); ++i) {
        if (idx[i] >= m.rows()) throw Error("take_rows: index out of range");
        std::copy_n(&m.data[idx[i] * C], C, &out.data[i * C]);
    }
    return out;
}

}  // namespace amss
