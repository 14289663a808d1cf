#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "crlsc/kmeans.hpp"

#include "oracles.hpp"

using namespace crlsc;

TEST_CASE("k equal distinct points: centroids are the points, objective 0") {
    Matrix pts(3, 2);
    pts.set_row(0, {0.0, 0.0});
    pts.set_row(1, {5.0, 0.0});
    pts.set_row(2, {0.0, 5.0});
    const KmeansResult res = kmeans_fit(pts, 3, 10, 42);
    CHECK(res.objective.back() == doctest::Approx(0.0));
    // each point matches some centroid exactly
    for (std::size_t i = 0; i < 3; ++i) {
        double best = 1e18;
        for (std::size_t c = 0; c < 3; ++c)
            best = std::min(best, squared_l2(pts.row(i), res.centroids.row(c), 2));
        CHECK(best == doctest::Approx(0.0));
    }
}

TEST_CASE("all points identical: every centroid collapses to that point") {
    Matrix pts(6, 3);
    for (std::size_t i = 0; i < 6; ++i) pts.set_row(i, {1.5, -2.0, 0.25});
    const KmeansResult res = kmeans_fit(pts, 3, 5, 7);
    for (std::size_t c = 0; c < 3; ++c) {
        CHECK(res.centroids(c, 0) == doctest::Approx(1.5));
        CHECK(res.centroids(c, 1) == doctest::Approx(-2.0));
        CHECK(res.centroids(c, 2) == doctest::Approx(0.25));
    }
    CHECK(res.objective.back() == doctest::Approx(0.0));
}

TEST_CASE("two well-separated blobs recover the oracle means") {
    Rng rng(123);
    std::normal_distribution<double> noise(0.0, 0.5);
    Matrix pts(400, 2);
    for (std::size_t i = 0; i < 200; ++i) pts.set_row(i, {-5.0 + noise(rng), noise(rng)});
    for (std::size_t i = 200; i < 400; ++i) pts.set_row(i, {5.0 + noise(rng), noise(rng)});

    const KmeansResult res = kmeans_fit(pts, 2, 50, 99);

    // oracle: exhaustive assignment to the fitted centroids, exact means
    const Matrix oracle_means = oracles::assigned_means(pts, res.centroids);
    for (std::size_t c = 0; c < 2; ++c) {
        const double err = std::sqrt(squared_l2(res.centroids.row(c), oracle_means.row(c), 2));
        CHECK(err < 0.2);
    }
    // and the centroids sit near the true blob centers
    const bool left_first = res.centroids(0, 0) < res.centroids(1, 0);
    const std::size_t left = left_first ? 0 : 1;
    CHECK(res.centroids(left, 0) == doctest::Approx(-5.0).epsilon(0.05));
    CHECK(res.centroids(1 - left, 0) == doctest::Approx(5.0).epsilon(0.05));
}

TEST_CASE("objective is non-increasing across Lloyd iterations") {
    Rng rng(5);
    const Matrix pts = random_gaussian(150, 4, rng);
    const KmeansResult res = kmeans_fit(pts, 8, 30, 11);
    for (std::size_t i = 1; i < res.objective.size(); ++i)
        CHECK(res.objective[i] <= res.objective[i - 1] + 1e-9);
}

TEST_CASE("deterministic per seed") {
    Rng rng(6);
    const Matrix pts = random_gaussian(80, 3, rng);
    const KmeansResult a = kmeans_fit(pts, 5, 20, 77);
    const KmeansResult b = kmeans_fit(pts, 5, 20, 77);
    CHECK(a.centroids.data() == b.centroids.data());
}

TEST_CASE("N < k* is allowed; empty-cluster policy fills") {
    Matrix pts(2, 2);
    pts.set_row(0, {0.0, 0.0});
    pts.set_row(1, {1.0, 1.0});
    const KmeansResult res = kmeans_fit(pts, 4, 5, 3);
    CHECK(res.centroids.rows() == 4);
    CHECK(res.objective.back() == doctest::Approx(0.0));
}

TEST_CASE("non-finite input rejected") {
    Matrix pts(2, 2);
    pts(0, 0) = std::numeric_limits<double>::quiet_NaN();
    CHECK_THROWS_AS(kmeans_fit(pts, 2, 5, 1), ValidationError);
}
