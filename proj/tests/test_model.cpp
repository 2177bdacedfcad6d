#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <set>

#include "amss/model.hpp"
#include "doctest.h"

using namespace amss;

namespace {

ModelSpec small_spec(Fusion f) {
    ModelSpec spec;
    spec.modalities = 2;
    spec.classes = 3;
    spec.input_dims = {3, 2};
    spec.hidden = {{4}, {4}};
    spec.fusion = f;
    return spec;
}

LabeledBatch random_batch(const ModelSpec& spec, std::size_t B, std::uint64_t seed) {
    LabeledBatch b;
    Rng rng(seed, kStreamData);
    for (std::size_t k = 0; k < spec.modalities; ++k) {
        Tensor x({B, spec.input_dims[k]});
        for (double& v : x.data) v = rng.normal();
        b.x.push_back(std::move(x));
    }
    b.y = Tensor({B, spec.classes});
    for (std::size_t i = 0; i < B; ++i) b.y.at(i, rng.index(spec.classes)) = 1.0;
    return b;
}

std::vector<double> flatten(Model& m) {
    std::vector<double> out;
    for (const auto& pr : param_store(m))
        out.insert(out.end(), pr.value->data.begin(), pr.value->data.end());
    return out;
}

}  // namespace

TEST_CASE("build_model is deterministic given the seed") {
    const ModelSpec spec = small_spec(Fusion::Weight);
    Rng r1(11, kStreamInit), r2(11, kStreamInit), r3(12, kStreamInit);
    Model a = build_model(spec, r1);
    Model b = build_model(spec, r2);
    Model c = build_model(spec, r3);
    CHECK(flatten(a) == flatten(b));
    CHECK(flatten(a) != flatten(c));
}

TEST_CASE("concat joint classifier width is the sum of encoder outputs") {
    ModelSpec spec;
    spec.modalities = 2;
    spec.classes = 3;
    spec.input_dims = {6, 5};
    spec.hidden = {{8, 4}, {8, 4}};
    spec.fusion = Fusion::Concat;
    Rng rng(1, kStreamInit);
    Model m = build_model(spec, rng);
    CHECK(m.joint.w.cols() == 8);
    CHECK(m.joint.w.rows() == 3);
}

TEST_CASE("three-modality partitions cover every encoder parameter") {
    ModelSpec spec;
    spec.modalities = 3;
    spec.classes = 4;
    spec.input_dims = {3, 3, 3};
    spec.hidden = {{4}, {5}, {}};
    spec.fusion = Fusion::Sum;
    Rng rng(5, kStreamInit);
    Model m = build_model(spec, rng);

    std::set<std::string> ids;
    std::size_t by_modality[3] = {0, 0, 0};
    for (const auto& pr : param_store(m)) {
        CHECK(ids.insert(pr.id).second);
        REQUIRE(pr.modality >= 0);
        REQUIRE(pr.modality < 3);
        ++by_modality[pr.modality];
    }
    CHECK(by_modality[0] == 4);  // enc w/b + clf w/b
    CHECK(by_modality[1] == 4);
    CHECK(by_modality[2] == 2);  // classifier only
}

TEST_CASE("invalid specs are rejected") {
    ModelSpec spec = small_spec(Fusion::Sum);
    spec.input_dims = {3};
    CHECK_THROWS_AS(spec.validate(), Error);
    spec = small_spec(Fusion::Sum);
    spec.modalities = 1;
    CHECK_THROWS_AS(spec.validate(), Error);
    spec = small_spec(Fusion::Sum);
    spec.classes = 1;
    CHECK_THROWS_AS(spec.validate(), Error);
}

TEST_CASE("sum fusion of identical branches returns the branch distribution") {
    ModelSpec spec = small_spec(Fusion::Sum);
    spec.input_dims = {3, 3};
    Rng rng(3, kStreamInit);
    Model m = build_model(spec, rng);
    // mirror branch 0 into branch 1
    for (std::size_t l = 0; l < m.branch[0].size(); ++l) {
        m.branch[1][l].w = m.branch[0][l].w;
        m.branch[1][l].b = m.branch[0][l].b;
    }
    LabeledBatch b = random_batch(m.spec, 4, 21);
    b.x[1] = b.x[0];

    const Tensor joint = predict_joint(m, b);
    const Tensor alone = predict_unimodal(m, b, 0);
    for (std::size_t i = 0; i < joint.data.size(); ++i)
        CHECK(joint.data[i] == doctest::Approx(alone.data[i]).epsilon(1e-14));
}

TEST_CASE("weight fusion with a degenerate gate follows one branch") {
    const ModelSpec spec = small_spec(Fusion::Weight);
    Rng rng(4, kStreamInit);
    Model m = build_model(spec, rng);
    m.gate.data = {50.0, -50.0};
    const auto alpha = m.fusion_weights();
    CHECK(alpha[0] == doctest::Approx(1.0).epsilon(1e-12));

    const LabeledBatch b = random_batch(spec, 4, 22);
    const Tensor joint = predict_joint(m, b);
    const Tensor alone = predict_unimodal(m, b, 0);
    for (std::size_t i = 0; i < joint.data.size(); ++i)
        CHECK(joint.data[i] == doctest::Approx(alone.data[i]).epsilon(1e-12));
}

TEST_CASE("concat prediction matches scalar arithmetic") {
    Model m;
    m.spec.modalities = 2;
    m.spec.classes = 2;
    m.spec.input_dims = {2, 1};
    m.spec.hidden = {{}, {}};
    m.spec.fusion = Fusion::Concat;
    m.branch.resize(2);
    m.joint.id = "joint.clf";
    m.joint.modality = kShared;
    m.joint.w = Tensor({2, 3});
    m.joint.w.data = {0.2, -0.4, 0.6, -0.1, 0.3, 0.5};
    m.joint.b = Tensor({2});
    m.joint.b.data = {0.05, -0.05};

    LabeledBatch b;
    Tensor x0({1, 2}), x1({1, 1});
    x0.data = {0.5, -0.3};
    x1.data = {0.8};
    b.x = {x0, x1};
    b.y = Tensor({1, 2});
    b.y.at(0, 0) = 1.0;

    const Tensor q = predict_joint(m, b);
    CHECK(q.at(0, 0) == doctest::Approx(0.63181241773610164).epsilon(1e-14));
    CHECK(q.at(0, 1) == doctest::Approx(0.36818758226389831).epsilon(1e-14));
}

TEST_CASE("late-fusion unimodal prediction ignores other modalities") {
    const ModelSpec spec = small_spec(Fusion::Sum);
    Rng rng(6, kStreamInit);
    Model m = build_model(spec, rng);
    LabeledBatch b = random_batch(spec, 4, 23);
    const Tensor before = predict_unimodal(m, b, 0);
    for (double& v : b.x[1].data) v += 100.0;
    const Tensor after = predict_unimodal(m, b, 0);
    CHECK(before.data == after.data);
}

TEST_CASE("concat unimodal prediction equals the block head on block-diagonal weights") {
    Model m;
    m.spec.modalities = 2;
    m.spec.classes = 2;
    m.spec.input_dims = {2, 2};
    m.spec.hidden = {{}, {}};
    m.spec.fusion = Fusion::Concat;
    m.branch.resize(2);
    m.joint.id = "joint.clf";
    m.joint.modality = kShared;
    m.joint.w = Tensor({2, 4});
    // block A on modality 0, block B on modality 1, zero bias
    m.joint.w.data = {0.7, -0.2, 0.0, 0.0, -0.4, 0.9, 0.0, 0.0};
    m.joint.w.data[2] = 0.0;
    m.joint.b = Tensor({2});

    LabeledBatch b;
    Tensor x0({2, 2}), x1({2, 2});
    x0.data = {0.3, 1.2, -0.5, 0.8};
    x1.data = {9.0, -9.0, 4.0, 4.0};
    b.x = {x0, x1};
    b.y = Tensor({2, 2});
    b.y.at(0, 0) = 1.0;
    b.y.at(1, 1) = 1.0;

    const Tensor q = predict_unimodal(m, b, 0);
    for (std::size_t i = 0; i < 2; ++i) {
        const double z0 = 0.7 * x0.at(i, 0) - 0.2 * x0.at(i, 1);
        const double z1 = -0.4 * x0.at(i, 0) + 0.9 * x0.at(i, 1);
        const double mx = std::max(z0, z1);
        const double e0 = std::exp(z0 - mx), e1 = std::exp(z1 - mx);
        CHECK(q.at(i, 0) == doctest::Approx(e0 / (e0 + e1)).epsilon(1e-14));
        CHECK(q.at(i, 1) == doctest::Approx(e1 / (e0 + e1)).epsilon(1e-14));
    }
}

TEST_CASE("unimodal prediction validates the modality index") {
    const ModelSpec spec = small_spec(Fusion::Sum);
    Rng rng(8, kStreamInit);
    Model m = build_model(spec, rng);
    const LabeledBatch b = random_batch(spec, 2, 24);
    CHECK_THROWS_AS(predict_unimodal(m, b, 2), Error);
}

TEST_CASE("probability rows are normalized for every fusion") {
    for (const Fusion f : {Fusion::Concat, Fusion::Sum, Fusion::Weight}) {
        const ModelSpec spec = small_spec(f);
        Rng rng(9, kStreamInit);
        Model m = build_model(spec, rng);
        const LabeledBatch b = random_batch(spec, 6, 25);
        const Tensor q = predict_joint(m, b);
        for (std::size_t i = 0; i < q.rows(); ++i) {
            double s = 0.0;
            for (std::size_t c = 0; c < q.cols(); ++c) {
                CHECK(q.at(i, c) >= 0.0);
                s += q.at(i, c);
            }
            CHECK(s == doctest::Approx(1.0).epsilon(1e-12));
        }
    }
}

TEST_CASE("checkpoint round-trips exactly and validates its input") {
    namespace fs = std::filesystem;
    const fs::path dir = fs::path("tmp_test_model");
    fs::create_directories(dir);
    const std::string path = (dir / "m.ckpt").string();

    const ModelSpec spec = small_spec(Fusion::Weight);
    Rng rng(10, kStreamInit);
    Model m = build_model(spec, rng);
    save_checkpoint(m, path);

    Rng rng2(99, kStreamInit);
    Model loaded = build_model(spec, rng2);
    load_checkpoint(loaded, path);
    CHECK(flatten(m) == flatten(loaded));

    // same bytes when saved again
    save_checkpoint(loaded, (dir / "m2.ckpt").string());
    std::ifstream f1(path, std::ios::binary), f2((dir / "m2.ckpt").string(), std::ios::binary);
    const std::string b1((std::istreambuf_iterator<char>(f1)), std::istreambuf_iterator<char>());
    const std::string b2((std::istreambuf_iterator<char>(f2)), std::istreambuf_iterator<char>());
    CHECK(b1 == b2);

    // truncation is a parse error
    std::ofstream trunc((dir / "short.ckpt").string(), std::ios::binary);
    trunc << b1.substr(0, b1.size() / 2);
    trunc.close();
    CHECK_THROWS_AS(load_checkpoint(loaded, (dir / "short.ckpt").string()), Error);

    // bad magic
    std::ofstream bad((dir / "bad.ckpt").string(), std::ios::binary);
    bad << "NOTACKPT" << b1.substr(8);
    bad.close();
    CHECK_THROWS_AS(load_checkpoint(loaded, (dir / "bad.ckpt").string()), Error);

    // shape mismatch against a different architecture
    ModelSpec other = spec;
    other.hidden = {{6}, {4}};
    Rng rng3(1, kStreamInit);
    Model om = build_model(other, rng3);
    CHECK_THROWS_AS(load_checkpoint(om, path), Error);
    fs::remove_all(dir);
}
