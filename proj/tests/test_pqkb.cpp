#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdio>
#include <fstream>

#include "crlsc/knowledge_base.hpp"

#include "oracles.hpp"

using namespace crlsc;

namespace {

PQCodebook tiny_codebook() {
    // m=2, d*=1, centroids {[0],[1]} in both subspaces
    PQCodebook cb;
    cb.config = {2, 2, 2, 5, 0};
    cb.centroids = {{0.0f, 1.0f}, {0.0f, 1.0f}};
    return cb;
}

Matrix random_vectors(std::size_t n, std::size_t d, std::uint64_t seed) {
    Rng rng(seed);
    return random_gaussian(n, d, rng);
}

KnowledgeBase make_random_kb(std::size_t n, const PQConfig& cfg, std::uint64_t seed) {
    const Matrix vecs = random_vectors(n, cfg.d, seed);
    std::vector<std::uint64_t> ids(n);
    std::iota(ids.begin(), ids.end(), 100);
    return kb_build(vecs, cfg, ids, "skb");
}

}  // namespace

TEST_CASE("pq_train with m=1 equals plain k-means with the same seed") {
    const Matrix vecs = random_vectors(60, 4, 3);
    PQConfig cfg{4, 1, 8, 20, 55};
    const PQCodebook cb = pq_train(vecs, cfg);
    const KmeansResult km = kmeans_fit(vecs, 8, 20, 55);
    for (std::size_t k = 0; k < 8; ++k)
        for (std::size_t c = 0; c < 4; ++c)
            CHECK(cb.centroids[0][k * 4 + c] == static_cast<float>(km.centroids(k, c)));
}

TEST_CASE("storage formula: d=512, m=8, k*=256 gives 131072 scalars") {
    PQCodebook cb;
    cb.config = {512, 8, 256, 25, 0};
    CHECK(cb.storage_scalars() == 131072);
}

TEST_CASE("code space capacity: k*=4, m=2 gives 16 codes") {
    PQConfig cfg{8, 2, 4, 25, 0};
    std::size_t capacity = 1;
    for (std::size_t j = 0; j < cfg.m; ++j) capacity *= cfg.k_star;
    CHECK(capacity == 16);
}

TEST_CASE("pq_train rejects d not divisible by m") {
    PQConfig cfg{10, 3, 4, 25, 0};
    CHECK_THROWS_AS(pq_train(random_vectors(20, 10, 1), cfg), ValidationError);
}

TEST_CASE("encode of a centroid-exact vector reproduces the code exactly") {
    const Matrix vecs = random_vectors(50, 8, 9);
    PQConfig cfg{8, 4, 4, 20, 17};
    const PQCodebook cb = pq_train(vecs, cfg);

    PQCode target;
    target.indices = {3, 0, 2, 1};
    std::vector<double> v(8);
    for (std::size_t j = 0; j < 4; ++j) {
        const float* c = cb.centroid(j, target.indices[j]);
        v[j * 2] = c[0];
        v[j * 2 + 1] = c[1];
    }
    const PQCode code = pq_encode(v, cb);
    CHECK(code.indices == target.indices);
    const std::vector<float> dec = pq_decode(code, cb);
    CHECK(oracles::decoded_distance(v, dec) == doctest::Approx(0.0));
}

TEST_CASE("nearest-centroid by inspection") {
    const PQCodebook cb = tiny_codebook();
    const PQCode code = pq_encode({0.2, 0.9}, cb);
    CHECK(code.indices[0] == 0);
    CHECK(code.indices[1] == 1);
}

TEST_CASE("argmin ties break to the lowest index") {
    const PQCodebook cb = tiny_codebook();
    const PQCode code = pq_encode({0.5, 0.5}, cb);
    CHECK(code.indices[0] == 0);
    CHECK(code.indices[1] == 0);
}

TEST_CASE("chosen code is optimal among all (k*)^m codes") {
    const Matrix vecs = random_vectors(80, 6, 21);
    PQConfig cfg{6, 3, 4, 20, 31};
    const PQCodebook cb = pq_train(vecs, cfg);
    Rng rng(77);
    for (int t = 0; t < 100; ++t) {
        const Matrix q = random_gaussian(1, 6, rng);
        const std::vector<double> v = q.row_vec(0);
        const std::vector<float> dec = pq_decode(pq_encode(v, cb), cb);
        const double chosen = oracles::decoded_distance(v, dec);
        const double best = oracles::best_code_error_exhaustive(v, cb);
        CHECK(chosen == doctest::Approx(best).epsilon(1e-12));
    }
}

TEST_CASE("encode/decode error equals summed per-subspace minima") {
    const Matrix vecs = random_vectors(70, 8, 5);
    PQConfig cfg{8, 4, 5, 20, 8};
    const PQCodebook cb = pq_train(vecs, cfg);
    Rng rng(31);
    for (int t = 0; t < 50; ++t) {
        const std::vector<double> v = random_gaussian(1, 8, rng).row_vec(0);
        const double err = oracles::decoded_distance(v, pq_decode(pq_encode(v, cb), cb));
        CHECK(err == doctest::Approx(oracles::per_subspace_min_error(v, cb)).epsilon(1e-10));
    }
}

TEST_CASE("decode with the all-zero code concatenates first centroids") {
    const Matrix vecs = random_vectors(30, 4, 2);
    PQConfig cfg{4, 2, 3, 15, 4};
    const PQCodebook cb = pq_train(vecs, cfg);
    PQCode zero;
    zero.indices = {0, 0};
    const std::vector<float> dec = pq_decode(zero, cb);
    CHECK(dec[0] == cb.centroid(0, 0)[0]);
    CHECK(dec[1] == cb.centroid(0, 0)[1]);
    CHECK(dec[2] == cb.centroid(1, 0)[0]);
    CHECK(dec[3] == cb.centroid(1, 0)[1]);
}

TEST_CASE("decode rejects out-of-range indices") {
    const PQCodebook cb = tiny_codebook();
    PQCode bad;
    bad.indices = {0, 2};
    CHECK_THROWS_AS(pq_decode(bad, cb), ValidationError);
}

TEST_CASE("adc distances match decode-then-exact-distance oracle") {
    PQConfig cfg{32, 4, 16, 25, 1234};
    const KnowledgeBase kb = make_random_kb(1000, cfg, 555);
    Rng rng(666);
    for (int t = 0; t < 20; ++t) {
        const std::vector<double> q = random_gaussian(1, 32, rng).row_vec(0);
        const auto hits = adc_search(q, kb, kb.size());
        for (const SearchHit& h : hits) {
            const double exact = oracles::decoded_distance(q, h.vec);
            CHECK(h.dist == doctest::Approx(exact).epsilon(1e-6));
        }
    }
}

TEST_CASE("centroid-exact stored vector ranks first with distance 0") {
    const Matrix vecs = random_vectors(40, 8, 10);
    PQConfig cfg{8, 2, 4, 20, 2};
    KnowledgeBase kb;
    std::vector<std::uint64_t> ids(40);
    std::iota(ids.begin(), ids.end(), 0);
    kb = kb_build(vecs, cfg, ids, "skb");

    const std::vector<double> q = to_double(pq_decode(kb.codes[7], kb.codebook));
    const auto hits = adc_search(q, kb, 3);
    CHECK(hits[0].dist == doctest::Approx(0.0));
    // id 7 ties only with codes identical to it, and then lowest id wins
    CHECK(to_double(hits[0].vec) == q);
}

TEST_CASE("adc_search output is sorted and respects n > N") {
    PQConfig cfg{8, 2, 4, 20, 3};
    const KnowledgeBase kb = make_random_kb(10, cfg, 88);
    const std::vector<double> q = random_vectors(1, 8, 42).row_vec(0);
    const auto hits = adc_search(q, kb, 50);
    CHECK(hits.size() == 10);
    for (std::size_t i = 1; i < hits.size(); ++i) CHECK(hits[i].dist >= hits[i - 1].dist);
}

TEST_CASE("empty KB search errors") {
    KnowledgeBase kb;
    kb.codebook = tiny_codebook();
    CHECK_THROWS_AS(adc_search({0.0, 0.0}, kb, 1), ValidationError);
}

TEST_CASE("m=1, k*>=N with pinned centroids equals exact NN search") {
    const std::size_t n = 8;
    const Matrix vecs = random_vectors(n, 4, 19);
    KnowledgeBase kb;
    kb.codebook.config = {4, 1, n, 1, 0};
    kb.codebook.centroids.resize(1);
    kb.codebook.centroids[0].resize(n * 4);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t c = 0; c < 4; ++c)
            kb.codebook.centroids[0][i * 4 + c] = static_cast<float>(vecs(i, c));
    for (std::size_t i = 0; i < n; ++i) {
        PQCode code;
        code.indices = {static_cast<std::uint32_t>(i)};
        kb.codes.push_back(code);
        kb.ids.push_back(i);
    }

    Rng rng(4);
    const std::vector<double> q = random_gaussian(1, 4, rng).row_vec(0);
    const auto hits = adc_search(q, kb, n);
    // brute-force exact NN over the f32-stored vectors
    std::vector<std::pair<double, std::uint64_t>> exact;
    for (std::size_t i = 0; i < n; ++i) {
        double d = 0.0;
        for (std::size_t c = 0; c < 4; ++c) {
            const double t = q[c] - static_cast<double>(kb.codebook.centroids[0][i * 4 + c]);
            d += t * t;
        }
        exact.push_back({d, i});
    }
    std::sort(exact.begin(), exact.end());
    for (std::size_t i = 0; i < n; ++i) {
        CHECK(hits[i].id == exact[i].second);
        CHECK(hits[i].dist == doctest::Approx(exact[i].first).epsilon(1e-12));
    }
}

TEST_CASE("persistence roundtrip is bit-exact") {
    PQConfig cfg{8, 4, 4, 20, 31};
    KnowledgeBase kb = make_random_kb(25, cfg, 7);
    kb.labels = std::vector<std::int32_t>(25, 2);
    kb.source_tag = "pkb:device-x";

    const std::string path = "test_kb_roundtrip.crkb";
    kb_save(kb, path);
    const KnowledgeBase loaded = kb_load(path);
    CHECK(kb_equal(kb, loaded));

    // saving the loaded KB reproduces the same bytes
    const std::string path2 = "test_kb_roundtrip2.crkb";
    kb_save(loaded, path2);
    std::ifstream f1(path, std::ios::binary), f2(path2, std::ios::binary);
    std::string b1((std::istreambuf_iterator<char>(f1)), std::istreambuf_iterator<char>());
    std::string b2((std::istreambuf_iterator<char>(f2)), std::istreambuf_iterator<char>());
    CHECK(b1 == b2);
    std::remove(path.c_str());
    std::remove(path2.c_str());
}

TEST_CASE("wide (u16) code persistence for k* > 256") {
    Rng rng(15);
    const Matrix vecs = random_gaussian(600, 2, rng);
    PQConfig cfg{2, 1, 300, 8, 5};
    std::vector<std::uint64_t> ids(600);
    std::iota(ids.begin(), ids.end(), 0);
    const KnowledgeBase kb = kb_build(vecs, cfg, ids, "skb");
    const std::string path = "test_kb_wide.crkb";
    kb_save(kb, path);
    CHECK(kb_equal(kb, kb_load(path)));
    std::remove(path.c_str());
}

TEST_CASE("corrupted magic yields a magic-mismatch error") {
    PQConfig cfg{8, 2, 4, 20, 1};
    const KnowledgeBase kb = make_random_kb(5, cfg, 3);
    const std::string path = "test_kb_badmagic.crkb";
    kb_save(kb, path);
    {
        std::fstream f(path, std::ios::in | std::ios::out | std::ios::binary);
        f.seekp(0);
        f.write("XXXX", 4);
    }
    CHECK_THROWS_WITH_AS(kb_load(path), "kb_load: magic mismatch", ParseError);
    std::remove(path.c_str());
}

TEST_CASE("truncated payload yields a truncation error") {
    PQConfig cfg{8, 2, 4, 20, 1};
    const KnowledgeBase kb = make_random_kb(5, cfg, 3);
    const std::string path = "test_kb_trunc.crkb";
    const std::uint64_t bytes = kb_save(kb, path);
    {
        // keep the header but drop most of the payload
        std::ifstream in(path, std::ios::binary);
        std::string data((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
        in.close();
        data.resize(bytes / 2);
        std::ofstream out(path, std::ios::binary | std::ios::trunc);
        out << data;
    }
    try {
        kb_load(path);
        FAIL("expected ParseError");
    } catch (const ParseError& e) {
        CHECK(std::string(e.what()).find("truncated") != std::string::npos);
    }
    std::remove(path.c_str());
}

TEST_CASE("cosine metric searches normalized space") {
    Rng rng(8);
    Matrix vecs = random_gaussian(50, 8, rng);
    PQConfig cfg{8, 2, 8, 25, 6};
    cfg.metric = Metric::Cosine;
    std::vector<std::uint64_t> ids(50);
    std::iota(ids.begin(), ids.end(), 0);
    const KnowledgeBase kb = kb_build(vecs, cfg, ids, "skb");

    // scaling a query must not change the ranking
    const std::vector<double> q = vecs.row_vec(3);
    std::vector<double> q_scaled = q;
    for (double& x : q_scaled) x *= 7.5;
    const auto h1 = adc_search(q, kb, 5);
    const auto h2 = adc_search(q_scaled, kb, 5);
    for (std::size_t i = 0; i < 5; ++i) CHECK(h1[i].id == h2[i].id);
}
