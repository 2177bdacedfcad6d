#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cmath>

#include "amss/model.hpp"
#include "doctest.h"

using namespace amss;

namespace {

// Two encoder-free modalities feeding a joint classifier; the weights are
// set by each test.
Model hand_concat(std::size_t d0, std::size_t d1, std::size_t C) {
    Model m;
    m.spec.modalities = 2;
    m.spec.classes = C;
    m.spec.input_dims = {d0, d1};
    m.spec.hidden = {{}, {}};
    m.spec.fusion = Fusion::Concat;
    m.branch.resize(2);
    m.joint.id = "joint.clf";
    m.joint.modality = kShared;
    m.joint.w = Tensor({C, d0 + d1});
    m.joint.b = Tensor({C});
    return m;
}

LabeledBatch batch_of(const std::vector<std::vector<double>>& x0,
                      const std::vector<std::vector<double>>& x1,
                      const std::vector<std::size_t>& labels, std::size_t C) {
    LabeledBatch b;
    const std::size_t B = labels.size();
    Tensor t0({B, x0[0].size()}), t1({B, x1[0].size()});
    for (std::size_t i = 0; i < B; ++i) {
        for (std::size_t j = 0; j < x0[i].size(); ++j) t0.at(i, j) = x0[i][j];
        for (std::size_t j = 0; j < x1[i].size(); ++j) t1.at(i, j) = x1[i][j];
    }
    b.x = {t0, t1};
    b.y = Tensor({B, C});
    for (std::size_t i = 0; i < B; ++i) b.y.at(i, labels[i]) = 1.0;
    return b;
}

}  // namespace

TEST_CASE("tensor shape bookkeeping") {
    Tensor t({2, 3});
    CHECK(t.size() == 6);
    CHECK(t.rows() == 2);
    CHECK(t.cols() == 3);
    t.at(1, 2) = 5.0;
    CHECK(t.data[5] == 5.0);
    CHECK(shape_str({2, 3}) == "(2,3)");
}

TEST_CASE("check_finite rejects NaN and Inf") {
    Tensor t({2});
    CHECK_NOTHROW(check_finite(t, "t"));
    t.data[0] = std::nan("");
    CHECK_THROWS_AS(check_finite(t, "t"), Error);
    t.data[0] = 1.0;
    t.data[1] = INFINITY;
    CHECK_THROWS_AS(check_finite(t, "t"), Error);
}

TEST_CASE("linear primitives") {
    Tensor x({2, 2});
    x.data = {1.0, 2.0, -1.0, 0.5};
    Tensor w({2, 2});
    w.data = {1.0, 0.0, -1.0, 2.0};
    Tensor b({2});
    b.data = {0.5, -0.5};

    const Tensor z = linear_forward(x, w, b, "lay");
    CHECK(z.at(0, 0) == doctest::Approx(1.5).epsilon(1e-12));
    CHECK(z.at(0, 1) == doctest::Approx(2.5).epsilon(1e-12));
    CHECK(z.at(1, 0) == doctest::Approx(-0.5).epsilon(1e-12));
    CHECK(z.at(1, 1) == doctest::Approx(1.5).epsilon(1e-12));

    Tensor bad({2, 3});
    CHECK_THROWS_WITH_AS(linear_forward(bad, w, b, "lay"),
                         doctest::Contains("lay"), Error);

    const Tensor wg = matmul_tn(z, x);
    CHECK(wg.rows() == 2);
    CHECK(wg.cols() == 2);
    CHECK(wg.at(0, 0) == doctest::Approx(1.5 * 1.0 + (-0.5) * (-1.0)));

    const Tensor dx = matmul(z, w);
    CHECK(dx.at(0, 0) == doctest::Approx(1.5 * 1.0 + 2.5 * (-1.0)));

    const Tensor bs = colsum(z);
    CHECK(bs.data[0] == doctest::Approx(1.0));
    CHECK(bs.data[1] == doctest::Approx(4.0));
}

TEST_CASE("relu and its backward zero dead units") {
    Tensor z({1, 3});
    z.data = {-1.0, 0.0, 2.0};
    const Tensor h = relu(z);
    CHECK(h.data == std::vector<double>{0.0, 0.0, 2.0});
    Tensor d({1, 3});
    d.data = {5.0, 5.0, 5.0};
    const Tensor dz = relu_backward(d, h);
    CHECK(dz.data == std::vector<double>{0.0, 0.0, 5.0});
}

TEST_CASE("softmax rows sum to one and ignore shifts") {
    Tensor z({2, 3});
    z.data = {1.0, 2.0, 3.0, 1000.0, 1001.0, 1002.0};
    const Tensor q = softmax_rows(z);
    for (std::size_t i = 0; i < 2; ++i) {
        double s = 0.0;
        for (std::size_t c = 0; c < 3; ++c) s += q.at(i, c);
        CHECK(s == doctest::Approx(1.0).epsilon(1e-12));
    }
    for (std::size_t c = 0; c < 3; ++c)
        CHECK(q.at(0, c) == doctest::Approx(q.at(1, c)).epsilon(1e-12));
}

TEST_CASE("take_rows gathers") {
    Tensor m({3, 2});
    m.data = {1, 2, 3, 4, 5, 6};
    const Tensor g = take_rows(m, {2, 0});
    CHECK(g.data == std::vector<double>{5, 6, 1, 2});
}

TEST_CASE("forward: saturated-correct prediction gives near-zero loss") {
    Model m = hand_concat(3, 1, 3);
    for (std::size_t c = 0; c < 3; ++c) m.joint.w.at(c, c) = 10.0;
    const auto b = batch_of({{20, 0, 0}, {0, 0, 20}}, {{0}, {0}}, {0, 2}, 3);
    const auto [loss, cache] = forward(m, b);
    CHECK(loss >= 0.0);
    CHECK(loss < 1e-6);
}

TEST_CASE("forward: uniform logits cost ln C") {
    Model m = hand_concat(2, 1, 3);
    const auto b = batch_of({{0.3, -0.2}, {1.0, 2.0}}, {{0.5}, {-0.5}}, {1, 2}, 3);
    const auto [loss, cache] = forward(m, b);
    CHECK(loss == doctest::Approx(std::log(3.0)).epsilon(1e-12));
}

TEST_CASE("forward: hand-built 2x2 model matches scalar arithmetic") {
    Model m = hand_concat(2, 1, 2);
    m.joint.w.data = {1.0, -0.5, 0.0, 0.25, 0.75, 0.0};
    m.joint.b.data = {0.1, -0.2};
    const auto b = batch_of({{0.3, -0.7}, {-1.2, 0.4}}, {{0}, {0}}, {0, 1}, 2);
    const auto [loss, cache] = forward(m, b);
    CHECK(loss == doctest::Approx(0.25387636751694087).epsilon(1e-12));
}

TEST_CASE("forward is deterministic and validates shapes") {
    Model m = hand_concat(2, 1, 2);
    m.joint.w.data = {1.0, -0.5, 0.2, 0.25, 0.75, -0.3};
    const auto b = batch_of({{0.3, -0.7}}, {{0.4}}, {0}, 2);
    const double l1 = forward(m, b).first;
    const double l2 = forward(m, b).first;
    CHECK(l1 == l2);

    auto bad = b;
    bad.x[0] = Tensor({1, 3});
    CHECK_THROWS_WITH_AS(forward(m, bad), doctest::Contains("modality 0"), Error);
}

TEST_CASE("backward: logit gradient is (q - y)/B via zero-input bias path") {
    Model m = hand_concat(2, 1, 3);
    m.joint.b.data = {0.4, -0.1, 0.3};
    const auto b = batch_of({{0, 0}, {0, 0}}, {{0}, {0}}, {0, 2}, 3);
    auto [loss, cache] = forward(m, b);
    const GradientSet g = backward(cache);

    const Tensor& wg = g.at("joint.clf.w");
    for (double v : wg.data) CHECK(v == 0.0);

    // all rows share q = softmax(b); bias grad = sum_i (q - y_i) / B
    std::vector<double> q(3);
    double s = 0.0;
    for (std::size_t c = 0; c < 3; ++c) s += std::exp(m.joint.b.data[c]);
    for (std::size_t c = 0; c < 3; ++c) q[c] = std::exp(m.joint.b.data[c]) / s;
    const Tensor& bg = g.at("joint.clf.b");
    CHECK(bg.data[0] == doctest::Approx((2 * q[0] - 1.0) / 2.0).epsilon(1e-12));
    CHECK(bg.data[1] == doctest::Approx(2 * q[1] / 2.0).epsilon(1e-12));
    CHECK(bg.data[2] == doctest::Approx((2 * q[2] - 1.0) / 2.0).epsilon(1e-12));
}

TEST_CASE("backward rejects a consumed cache") {
    Model m = hand_concat(2, 1, 2);
    const auto b = batch_of({{0.1, 0.2}}, {{0.3}}, {0}, 2);
    auto [loss, cache] = forward(m, b);
    backward(cache);
    CHECK_THROWS_AS(backward(cache), Error);
}

TEST_CASE("backward matches finite differences on a random 3-layer MLP") {
    ModelSpec spec;
    spec.modalities = 2;
    spec.classes = 3;
    spec.input_dims = {4, 3};
    spec.hidden = {{5, 4}, {3}};
    spec.fusion = Fusion::Sum;
    Rng rng(7, kStreamInit);
    Model m = build_model(spec, rng);

    LabeledBatch b;
    Rng data(7, kStreamData);
    for (std::size_t k = 0; k < 2; ++k) {
        Tensor x({4, spec.input_dims[k]});
        for (double& v : x.data) v = data.normal();
        b.x.push_back(std::move(x));
    }
    b.y = Tensor({4, 3});
    for (std::size_t i = 0; i < 4; ++i) b.y.at(i, data.index(3)) = 1.0;

    auto [loss, cache] = forward(m, b);
    const GradientSet analytic = backward(cache);
    auto params = param_store(m);
    const GradientSet numeric =
        finite_diff_gradient([&]() { return forward(m, b).first; }, params, 1e-5);

    double worst = 0.0;
    for (const auto& [id, ga] : analytic) {
        const Tensor& gn = numeric.at(id);
        REQUIRE(ga.data.size() == gn.data.size());
        for (std::size_t i = 0; i < ga.data.size(); ++i) {
            const double err = std::abs(ga.data[i] - gn.data[i]) /
                               std::max({std::abs(ga.data[i]), std::abs(gn.data[i]), 1e-8});
            worst = std::max(worst, err);
        }
    }
    CHECK(worst <= 1e-5);
}

TEST_CASE("finite differences: quadratic and constant") {
    Tensor w({1});
    w.data = {3.0};
    std::vector<ParamRef> params{{"w", &w, "lay", kShared}};

    const GradientSet gq =
        finite_diff_gradient([&]() { return w.data[0] * w.data[0]; }, params, 1e-4);
    CHECK(gq.at("w").data[0] == doctest::Approx(6.0).epsilon(1e-6));
    CHECK(w.data[0] == 3.0);

    const GradientSet gc = finite_diff_gradient([]() { return 4.2; }, params, 1e-4);
    CHECK(gc.at("w").data[0] == 0.0);
}
