#pragma once
#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

namespace amss {

struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/**
 * Dense row-major tensor of doubles. In practice everything here is a
 * vector (1-d) or matrix (2-d); shapes are validated at operation
 * boundaries and violations throw Error naming the expected/actual shapes.
 */
struct Tensor {
    std::vector<std::size_t> shape;
    std::vector<double> data;

    Tensor() = default;
    explicit Tensor(std::vector<std::size_t> s);

    static Tensor zeros(std::vector<std::size_t> s) { return Tensor(std::move(s)); }

    std::size_t size() const { return data.size(); }
    std::size_t rows() const;
    std::size_t cols() const;

    double& at(std::size_t r, std::size_t c) { return data[r * cols() + c]; }
    double at(std::size_t r, std::size_t c) const { return data[r * cols() + c]; }

    bool same_shape(const Tensor& o) const { return shape == o.shape; }
};

std::string shape_str(const std::vector<std::size_t>& s);

// Throws if any entry is NaN or infinite.
void check_finite(const Tensor& t, const std::string& what);

// x (B x in) through a linear layer with weight w (out x in), bias b (out).
Tensor linear_forward(const Tensor& x, const Tensor& w, const Tensor& b,
                      const std::string& layer_id);

// d^T x, the weight gradient of a linear layer: d (B x out), x (B x in) -> out x in
Tensor matmul_tn(const Tensor& d, const Tensor& x);

// d w, backpropagation through a linear layer: d (B x out), w (out x in) -> B x in
Tensor matmul(const Tensor& d, const Tensor& w);

// column sums of d (B x out) -> out, the bias gradient
Tensor colsum(const Tensor& d);

Tensor relu(const Tensor& z);

// zeroes d where the stored post-activation h is zero
Tensor relu_backward(const Tensor& d, const Tensor& h);

// row-wise softmax with max subtraction
Tensor softmax_rows(const Tensor& logits);

// vec (K) -> softmax probabilities
std::vector<double> softmax_vec(const std::vector<double>& v);

// gathers the given rows of m into a new tensor
Tensor take_rows(const Tensor& m, const std::vector<std::size_t>& idx);

}  // namespace amss
