#include <doctest.h>

#include <cmath>
#include <numeric>
#include <random>

#include "ldwr/classifier.hpp"
#include "oracles.hpp"

using namespace ldwr;

TEST_CASE("image-to-class examples") {
    const auto pool = DescriptorMatrix::from_rows({{1, 0, 0}, {0, 1, 0}, {0, 0, 1}});
    const auto query = DescriptorMatrix::from_rows({{2, 0, 0}, {0, 0, 5}});
    CHECK(image_to_class_score(query, pool, {1}) == doctest::Approx(2.0));

    const auto other = DescriptorMatrix::from_rows({{0, 1, 0}, {0, -3, 0}});
    const auto orth = DescriptorMatrix::from_rows({{1, 0, 0}, {0, 0, 1}});
    CHECK(image_to_class_score(orth, other, {3}) == 0.0);

    // k_bar clamps to the pool size
    CHECK(image_to_class_score(query, pool, {10}) == doctest::Approx(2.0));
    CHECK(image_to_class_score(DescriptorMatrix::from_rows({{1, 1, 0}}), pool, {2}) ==
          doctest::Approx(std::sqrt(2.0)));
}

TEST_CASE("image-to-class errors") {
    const auto pool = DescriptorMatrix::from_rows({{1, 0}});
    CHECK_THROWS_AS(image_to_class_score(pool, DescriptorMatrix(2), {3}), DegenerateClassError);
    CHECK_THROWS_AS(image_to_class_score(DescriptorMatrix(2), pool, {3}), ConfigError);
    CHECK_THROWS_AS(image_to_class_score(pool, pool, {0}), ConfigError);
}

TEST_CASE("image-to-class matches the double-loop oracle on random 5-way episodes") {
    std::mt19937_64 rng(1);
    std::uniform_int_distribution<std::size_t> len(1, 8), pool_size(1, 12);
    for (int t = 0; t < 200; ++t) {
        const auto query = oracle::random_matrix(rng, 6, len(rng), 0.1, 0.05);
        std::vector<DescriptorMatrix> pools;
        for (int c = 0; c < 5; ++c) pools.push_back(oracle::random_matrix(rng, 6, pool_size(rng), 0.1));
        const auto scores = classify(query, pools, {3});
        for (std::size_t c = 0; c < 5; ++c) {
            const auto expect = oracle::image_to_class(oracle::rows_of(query), oracle::rows_of(pools[c]), 3);
            CHECK(oracle::close(scores.scores[c], expect, 1e-9L, 1e-12L));
            CHECK(image_to_class_score(query, pools[c], {3}) == scores.scores[c]);
        }
    }
}

TEST_CASE("softmax and argmax") {
    const std::vector<double> tie{1.5, 1.5};
    const auto p = softmax(tie);
    CHECK(p[0] == 0.5);
    CHECK(p[1] == 0.5);
    CHECK(argmax(tie) == 0);

    const std::vector<double> gap{7.0, -13.0};
    CHECK(softmax(gap)[0] >= 1.0 - 3e-9);

    std::mt19937_64 rng(2);
    std::uniform_real_distribution<double> u(-1e4, 1e4);
    for (int t = 0; t < 500; ++t) {
        std::vector<double> s(1 + t % 9);
        for (auto& v : s) v = u(rng);
        const auto q = softmax(s);
        CHECK(std::abs(std::accumulate(q.begin(), q.end(), 0.0) - 1.0) <= 1e-6);
        const auto expect = oracle::softmax(s);
        for (std::size_t i = 0; i < s.size(); ++i) {
            CHECK(q[i] >= 0.0);
            CHECK(oracle::close(q[i], expect[i], 1e-9L, 1e-300L));
        }
        CHECK(argmax(q) == argmax(s));
        std::vector<double> shifted = s;
        for (auto& v : shifted) v += 123.25;
        CHECK(argmax(shifted) == argmax(s));
    }
}

TEST_CASE("classify predicts the planted class with noise-free signal") {
    std::mt19937_64 rng(3);
    std::normal_distribution<float> normal;
    const std::size_t classes = 5, dim = 8;
    std::vector<Vector> dirs;
    for (std::size_t c = 0; c < classes; ++c) {
        Vector d(dim);
        for (auto& x : d) x = normal(rng);
        dirs.push_back(d);
    }
    std::vector<DescriptorMatrix> pools;
    for (std::size_t c = 0; c < classes; ++c) {
        DescriptorMatrix m(dim);
        for (int i = 0; i < 4; ++i) {
            Vector v = dirs[c];
            for (auto& x : v) x *= 1.0f + static_cast<float>(i);
            m.append(v);
        }
        pools.push_back(m);
    }
    for (std::size_t c = 0; c < classes; ++c) {
        DescriptorMatrix q(dim);
        q.append(dirs[c]);
        q.append(dirs[c]);
        const auto s = classify(q, pools, {});
        CHECK(s.predicted == c);
        CHECK(s.scores[c] == doctest::Approx(6.0));
        CHECK(std::accumulate(s.probabilities.begin(), s.probabilities.end(), 0.0) == doctest::Approx(1.0));
        CHECK(argmax(s.probabilities) == s.predicted);
    }
}
