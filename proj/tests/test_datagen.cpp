#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cmath>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include "amss/datagen.hpp"
#include "doctest.h"

using namespace amss;
namespace fs = std::filesystem;

namespace {

const fs::path kTmp = "tmp_test_datagen";

struct TmpDir {
    TmpDir() {
        fs::remove_all(kTmp);
        fs::create_directories(kTmp);
    }
    ~TmpDir() { fs::remove_all(kTmp); }
};

std::size_t label_of(const Tensor& y, std::size_t i) {
    for (std::size_t c = 0; c < y.cols(); ++c)
        if (y.at(i, c) == 1.0) return c;
    return y.cols();
}

// Independent probe: classify test rows of one modality by the nearest
// class-conditional train mean.
double nearest_mean_accuracy(const LabeledBatch& train, const LabeledBatch& test,
                             std::size_t k, std::size_t classes) {
    const Tensor& X = train.x[k];
    const std::size_t d = X.cols();
    std::vector<std::vector<double>> mean(classes, std::vector<double>(d, 0.0));
    std::vector<double> cnt(classes, 0.0);
    for (std::size_t i = 0; i < train.size(); ++i) {
        const std::size_t c = label_of(train.y, i);
        cnt[c] += 1.0;
        for (std::size_t j = 0; j < d; ++j) mean[c][j] += X.at(i, j);
    }
    for (std::size_t c = 0; c < classes; ++c)
        for (std::size_t j = 0; j < d; ++j) mean[c][j] /= cnt[c];

    std::size_t hits = 0;
    const Tensor& T = test.x[k];
    for (std::size_t i = 0; i < test.size(); ++i) {
        std::size_t best = 0;
        double best_d = 0.0;
        for (std::size_t c = 0; c < classes; ++c) {
            double dist = 0.0;
            for (std::size_t j = 0; j < d; ++j) {
                const double diff = T.at(i, j) - mean[c][j];
                dist += diff * diff;
            }
            if (c == 0 || dist < best_d) {
                best_d = dist;
                best = c;
            }
        }
        if (best == label_of(test.y, i)) ++hits;
    }
    return static_cast<double>(hits) / static_cast<double>(test.size());
}

std::string slurp(const fs::path& p) {
    std::ifstream f(p, std::ios::binary);
    std::stringstream ss;
    ss << f.rdbuf();
    return ss.str();
}

void spit(const fs::path& p, const std::string& body) {
    std::ofstream f(p, std::ios::binary);
    f << body;
}

const char* kTinyHeader =
    "# {\"modalities\":1,\"classes\":2,\"dims\":[1],\"snr\":[1.0],"
    "\"train\":2,\"val\":0,\"test\":2,\"seed\":1}\n";

}  // namespace

TEST_CASE("spec validation rejects malformed requests") {
    DataSpec s;
    s.modalities = 2;
    s.classes = 3;
    s.dims = {4, 2};
    s.snr = {1.0, 1.0};
    s.train = 6;
    s.test = 3;
    CHECK_NOTHROW(s.validate());

    DataSpec bad = s;
    bad.modalities = 0;
    CHECK_THROWS_AS(bad.validate(), Error);
    bad = s;
    bad.classes = 1;
    CHECK_THROWS_AS(bad.validate(), Error);
    bad = s;
    bad.dims = {4};
    CHECK_THROWS_AS(bad.validate(), Error);
    bad = s;
    bad.dims = {4, 0};
    CHECK_THROWS_AS(bad.validate(), Error);
    bad = s;
    bad.snr = {1.0, -0.5};
    CHECK_THROWS_AS(bad.validate(), Error);
    bad = s;
    bad.train = 2;
    CHECK_THROWS_AS(bad.validate(), Error);
}

TEST_CASE("generation is deterministic and splits are balanced and disjoint") {
    DataSpec s;
    s.modalities = 2;
    s.classes = 3;
    s.dims = {6, 6};
    s.snr = {10.0, 0.5};
    s.train = 600;
    s.val = 90;
    s.test = 300;
    s.seed = 5;

    Dataset a = generate(s);
    Dataset b = generate(s);
    CHECK(a.train.x[0].data == b.train.x[0].data);
    CHECK(a.test.x[1].data == b.test.x[1].data);
    CHECK(a.train.y.data == b.train.y.data);

    CHECK(a.train.size() == 600);
    CHECK(a.val.size() == 90);
    CHECK(a.test.size() == 300);
    CHECK(a.prototypes.size() == 2);
    CHECK(a.prototypes[0].rows() == 3);

    // exact class balance whenever the split size divides evenly
    for (const LabeledBatch* split : {&a.train, &a.val, &a.test}) {
        std::vector<std::size_t> cnt(3, 0);
        for (std::size_t i = 0; i < split->size(); ++i) ++cnt[label_of(split->y, i)];
        for (std::size_t c = 0; c < 3; ++c) CHECK(cnt[c] == split->size() / 3);
    }

    // feature rows never repeat across splits
    std::set<std::string> seen;
    for (const LabeledBatch* split : {&a.train, &a.val, &a.test})
        for (std::size_t i = 0; i < split->size(); ++i) {
            std::ostringstream key;
            for (std::size_t k = 0; k < 2; ++k)
                for (std::size_t j = 0; j < 6; ++j) key << split->x[k].at(i, j) << ',';
            CHECK(seen.insert(key.str()).second);
        }
}

TEST_CASE("snr controls per-modality separability") {
    DataSpec s;
    s.modalities = 2;
    s.classes = 3;
    s.dims = {6, 6};
    s.snr = {10.0, 0.5};
    s.train = 600;
    s.test = 300;
    s.seed = 7;
    Dataset ds = generate(s);

    const double strong = nearest_mean_accuracy(ds.train, ds.test, 0, 3);
    const double weak = nearest_mean_accuracy(ds.train, ds.test, 1, 3);
    CHECK(strong >= 0.95);
    CHECK(strong - weak >= 0.20);
}

TEST_CASE("zero snr is chance level") {
    DataSpec s;
    s.modalities = 1;
    s.classes = 4;
    s.dims = {5};
    s.snr = {0.0};
    s.train = 800;
    s.test = 400;
    s.seed = 9;
    Dataset ds = generate(s);
    const double acc = nearest_mean_accuracy(ds.train, ds.test, 0, 4);
    CHECK(std::abs(acc - 0.25) <= 0.08);  // ~3.7 binomial sigma at n=400
}

TEST_CASE("class-conditional means match s_k * mu_c") {
    DataSpec s;
    s.modalities = 2;
    s.classes = 4;
    s.dims = {3, 2};
    s.snr = {2.0, 0.7};
    s.train = 2000;
    s.test = 4;
    s.seed = 11;
    Dataset ds = generate(s);

    const double tol = 4.0 / std::sqrt(500.0);  // 4 sigma at 500 rows per class
    for (std::size_t k = 0; k < 2; ++k) {
        const Tensor& X = ds.train.x[k];
        for (std::size_t c = 0; c < 4; ++c) {
            std::vector<double> mean(s.dims[k], 0.0);
            double cnt = 0.0;
            for (std::size_t i = 0; i < ds.train.size(); ++i) {
                if (label_of(ds.train.y, i) != c) continue;
                cnt += 1.0;
                for (std::size_t j = 0; j < s.dims[k]; ++j) mean[j] += X.at(i, j);
            }
            for (std::size_t j = 0; j < s.dims[k]; ++j)
                CHECK(std::abs(mean[j] / cnt - s.snr[k] * ds.prototypes[k].at(c, j)) <= tol);
        }
    }
}

TEST_CASE("prototypes are unit rows") {
    Rng rng(3, kStreamData);
    const auto protos = draw_prototypes(rng, 5, {7, 2});
    for (const Tensor& p : protos)
        for (std::size_t c = 0; c < 5; ++c) {
            double n2 = 0.0;
            for (std::size_t j = 0; j < p.cols(); ++j) n2 += p.at(c, j) * p.at(c, j);
            CHECK(n2 == doctest::Approx(1.0).epsilon(1e-12));
        }
}

TEST_CASE("dataset files round-trip exactly and rewrite byte-identically") {
    TmpDir tmp;
    DataSpec s;
    s.modalities = 2;
    s.classes = 2;
    s.dims = {3, 2};
    s.snr = {1.5, 0.25};
    s.train = 8;
    s.val = 4;
    s.test = 6;
    s.seed = 13;
    Dataset ds = generate(s);

    const fs::path p1 = kTmp / "a.csv";
    const fs::path p2 = kTmp / "b.csv";
    save_dataset(ds, p1.string());
    save_dataset(generate(s), p2.string());
    CHECK(slurp(p1) == slurp(p2));

    Dataset back = load_dataset(p1.string());
    CHECK(back.spec.dims == s.dims);
    CHECK(back.spec.seed == s.seed);
    CHECK(back.train.y.data == ds.train.y.data);
    CHECK(back.val.y.data == ds.val.y.data);
    for (std::size_t k = 0; k < 2; ++k) {
        CHECK(back.train.x[k].data == ds.train.x[k].data);
        CHECK(back.val.x[k].data == ds.val.x[k].data);
        CHECK(back.test.x[k].data == ds.test.x[k].data);
    }
    CHECK(back.prototypes.empty());

    const fs::path p3 = kTmp / "c.csv";
    save_dataset(back, p3.string());
    CHECK(slurp(p1) == slurp(p3));
}

TEST_CASE("loader reports the offending file location") {
    TmpDir tmp;
    const fs::path p = kTmp / "d.csv";

    spit(p, "train,0,0.5\n");
    CHECK_THROWS_WITH_AS(load_dataset(p.string()), doctest::Contains(":1: missing dataset header"),
                         Error);

    spit(p, "# {not json\ntrain,0,0.5\n");
    CHECK_THROWS_WITH_AS(load_dataset(p.string()), doctest::Contains(":1: bad header"), Error);

    spit(p, std::string(kTinyHeader) + "train,0,0.5\ntrain,1,-0.25\ndev,0,0.1\n");
    CHECK_THROWS_WITH_AS(load_dataset(p.string()), doctest::Contains("unknown split 'dev'"), Error);

    spit(p, std::string(kTinyHeader) + "train,x,0.5\n");
    CHECK_THROWS_WITH_AS(load_dataset(p.string()), doctest::Contains("bad label 'x'"), Error);

    spit(p, std::string(kTinyHeader) + "train,7,0.5\n");
    CHECK_THROWS_WITH_AS(load_dataset(p.string()), doctest::Contains("label 7 out of range"),
                         Error);

    spit(p, std::string(kTinyHeader) + "train,0,abc\n");
    CHECK_THROWS_WITH_AS(load_dataset(p.string()), doctest::Contains("bad value 'abc'"), Error);

    spit(p, std::string(kTinyHeader) + "train,0,0.5,1.0\n");
    CHECK_THROWS_WITH_AS(load_dataset(p.string()), doctest::Contains("feature fields"), Error);

    // truncated: header promises 2 test rows
    spit(p, std::string(kTinyHeader) + "train,0,0.5\ntrain,1,-0.25\ntest,0,0.125\n");
    CHECK_THROWS_WITH_AS(load_dataset(p.string()), doctest::Contains("split 'test'"), Error);

    CHECK_THROWS_AS(load_dataset((kTmp / "absent.csv").string()), Error);
}

TEST_CASE("gather keeps rows aligned across modalities") {
    DataSpec s;
    s.modalities = 2;
    s.classes = 2;
    s.dims = {2, 1};
    s.snr = {1.0, 1.0};
    s.train = 4;
    s.test = 2;
    s.seed = 17;
    Dataset ds = generate(s);

    const LabeledBatch sub = gather(ds.train, {2, 0});
    CHECK(sub.size() == 2);
    for (std::size_t k = 0; k < 2; ++k)
        for (std::size_t j = 0; j < s.dims[k]; ++j) {
            CHECK(sub.x[k].at(0, j) == ds.train.x[k].at(2, j));
            CHECK(sub.x[k].at(1, j) == ds.train.x[k].at(0, j));
        }
    CHECK(label_of(sub.y, 0) == label_of(ds.train.y, 2));
    CHECK(label_of(sub.y, 1) == label_of(ds.train.y, 0));
}
