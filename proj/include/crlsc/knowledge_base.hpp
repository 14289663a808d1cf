#pragma once

#include <algorithm>
#include <cstdint>
#include <fstream>
#include <optional>
#include <string>
#include <vector>

#include "crlsc/binio.hpp"
#include "crlsc/pq.hpp"

namespace crlsc {

struct SearchHit {
    std::uint64_t id = 0;
    double dist = 0.0;
    std::vector<float> vec;  // decoded reconstruction
};

// PQ codebook plus N stored codes. Immutable after construction; concurrent
// read-only searches are safe.
struct KnowledgeBase {
    PQCodebook codebook;
    std::vector<PQCode> codes;
    std::vector<std::uint64_t> ids;
    std::optional<std::vector<std::int32_t>> labels;
    std::string source_tag;

    std::size_t size() const { return codes.size(); }

    void validate() const {
        if (codes.size() != ids.size())
            throw ValidationError("KnowledgeBase: |codes| != |ids|");
        if (labels && labels->size() != ids.size())
            throw ValidationError("KnowledgeBase: labels length mismatch");
    }
};

// Build a KB from raw vectors: train the PQ codebooks, then encode every row.
// Cosine metric stores codes of L2-normalized vectors.
inline KnowledgeBase kb_build(const Matrix& vectors, const PQConfig& config,
                              const std::vector<std::uint64_t>& ids,
                              const std::string& source_tag,
                              const std::optional<std::vector<std::int32_t>>& labels = {}) {
    if (ids.size() != vectors.rows()) throw ValidationError("kb_build: ids length mismatch");
    Matrix prepared = vectors;
    if (config.metric == Metric::Cosine) l2_normalize_rows(prepared);

    KnowledgeBase kb;
    kb.codebook = pq_train(prepared, config);
    kb.codes.reserve(prepared.rows());
    for (std::size_t i = 0; i < prepared.rows(); ++i)
        kb.codes.push_back(pq_encode(prepared.row_vec(i), kb.codebook));
    kb.ids = ids;
    kb.labels = labels;
    kb.source_tag = source_tag;
    kb.validate();
    return kb;
}

// Asymmetric distance computation: per-subspace lookup table from the query,
// then m table lookups per stored code. Results sorted by (dist, id).
inline std::vector<SearchHit> adc_search(const std::vector<double>& query,
                                         const KnowledgeBase& kb, std::size_t n) {
    const PQConfig& cfg = kb.codebook.config;
    if (n < 1) throw ValidationError("adc_search: n must be >= 1");
    if (kb.size() == 0) throw ValidationError("adc_search: empty knowledge base");
    if (query.size() != cfg.d) throw ValidationError("adc_search: query dimension mismatch");

    std::vector<double> q = query;
    if (cfg.metric == Metric::Cosine) q = l2_normalized(q);

    const std::size_t ds = cfg.d_sub();
    // LUT[j*k* + k] = ||q_j - centroid_j[k]||^2
    std::vector<double> lut(cfg.m * cfg.k_star);
    for (std::size_t j = 0; j < cfg.m; ++j)
        for (std::size_t k = 0; k < cfg.k_star; ++k)
            lut[j * cfg.k_star + k] =
                squared_l2_df(q.data() + j * ds, kb.codebook.centroid(j, k), ds);

    struct Cand {
        double dist;
        std::size_t idx;
    };
    std::vector<Cand> cands(kb.size());
    for (std::size_t i = 0; i < kb.size(); ++i) {
        double d = 0.0;
        for (std::size_t j = 0; j < cfg.m; ++j)
            d += lut[j * cfg.k_star + kb.codes[i].indices[j]];
        cands[i] = {d, i};
    }

    const std::size_t take = std::min(n, kb.size());
    auto cmp = [&](const Cand& a, const Cand& b) {
        if (a.dist != b.dist) return a.dist < b.dist;
        return kb.ids[a.idx] < kb.ids[b.idx];
    };
    std::partial_sort(cands.begin(), cands.begin() + static_cast<std::ptrdiff_t>(take),
                      cands.end(), cmp);

    std::vector<SearchHit> hits(take);
    for (std::size_t i = 0; i < take; ++i) {
        hits[i].id = kb.ids[cands[i].idx];
        hits[i].dist = cands[i].dist;
        hits[i].vec = pq_decode(kb.codes[cands[i].idx], kb.codebook);
    }
    return hits;
}

// ---------------------------------------------------------------------------
// Persistence. Binary little-endian:
//   "CRKB" | version u8=1 | metric u8 | d u32 | m u32 | k* u32 | N u64
//   | source_tag (u16 len + UTF-8) | centroids m*k**d* f32
//   | codes N*m (u8 if k*<=256 else u16) | ids N u64
//   | label_flag u8 | labels N i32 if flag=1
// ---------------------------------------------------------------------------

inline constexpr char kKbMagic[4] = {'C', 'R', 'K', 'B'};
inline constexpr std::uint8_t kKbVersion = 1;

inline std::uint64_t kb_save(const KnowledgeBase& kb, const std::string& path) {
    kb.validate();
    std::ofstream os(path, std::ios::binary);
    if (!os) throw IoError("kb_save: cannot open " + path);

    const PQConfig& cfg = kb.codebook.config;
    os.write(kKbMagic, 4);
    binio::write_u8(os, kKbVersion);
    binio::write_u8(os, static_cast<std::uint8_t>(cfg.metric));
    binio::write_u32(os, static_cast<std::uint32_t>(cfg.d));
    binio::write_u32(os, static_cast<std::uint32_t>(cfg.m));
    binio::write_u32(os, static_cast<std::uint32_t>(cfg.k_star));
    binio::write_u64(os, kb.size());
    binio::write_str16(os, kb.source_tag);

    for (const auto& sub : kb.codebook.centroids)
        for (float v : sub) binio::write_f32(os, v);

    const bool wide = cfg.k_star > 256;
    for (const auto& code : kb.codes)
        for (std::uint32_t idx : code.indices) {
            if (wide)
                binio::write_u16(os, static_cast<std::uint16_t>(idx));
            else
                binio::write_u8(os, static_cast<std::uint8_t>(idx));
        }

    for (std::uint64_t id : kb.ids) binio::write_u64(os, id);
    binio::write_u8(os, kb.labels ? 1 : 0);
    if (kb.labels)
        for (std::int32_t l : *kb.labels) binio::write_i32(os, l);

    if (!os) throw IoError("kb_save: write failure on " + path);
    return static_cast<std::uint64_t>(os.tellp());
}

inline KnowledgeBase kb_load(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw IoError("kb_load: cannot open " + path);

    char magic[4];
    is.read(magic, 4);
    if (!is || std::memcmp(magic, kKbMagic, 4) != 0)
        throw ParseError("kb_load: magic mismatch");
    const std::uint8_t version = binio::read_u8(is, "version");
    if (version != kKbVersion)
        throw ParseError("kb_load: unsupported version " + std::to_string(version));

    KnowledgeBase kb;
    PQConfig cfg;
    const std::uint8_t metric = binio::read_u8(is, "metric");
    if (metric > 1) throw ParseError("kb_load: bad metric byte");
    cfg.metric = static_cast<Metric>(metric);
    cfg.d = binio::read_u32(is, "d");
    cfg.m = binio::read_u32(is, "m");
    cfg.k_star = binio::read_u32(is, "k_star");
    const std::uint64_t n = binio::read_u64(is, "N");
    kb.source_tag = binio::read_str16(is, "source_tag");
    if (cfg.m == 0 || cfg.d == 0 || cfg.d % cfg.m != 0 || cfg.k_star == 0)
        throw ParseError("kb_load: inconsistent header dimensions");

    kb.codebook.config = cfg;
    kb.codebook.centroids.resize(cfg.m);
    const std::size_t ds = cfg.d_sub();
    for (std::size_t j = 0; j < cfg.m; ++j) {
        kb.codebook.centroids[j].resize(cfg.k_star * ds);
        for (float& v : kb.codebook.centroids[j]) v = binio::read_f32(is, "centroids");
    }

    const bool wide = cfg.k_star > 256;
    kb.codes.resize(n);
    for (auto& code : kb.codes) {
        code.indices.resize(cfg.m);
        for (auto& idx : code.indices) {
            idx = wide ? binio::read_u16(is, "codes") : binio::read_u8(is, "codes");
            if (idx >= cfg.k_star) throw ParseError("kb_load: code index out of range");
        }
    }

    kb.ids.resize(n);
    for (auto& id : kb.ids) id = binio::read_u64(is, "ids");

    const std::uint8_t flag = binio::read_u8(is, "label_flag");
    if (flag == 1) {
        std::vector<std::int32_t> labels(n);
        for (auto& l : labels) l = binio::read_i32(is, "labels");
        kb.labels = std::move(labels);
    } else if (flag != 0) {
        throw ParseError("kb_load: bad label flag");
    }
    kb.validate();
    return kb;
}

inline bool kb_equal(const KnowledgeBase& a, const KnowledgeBase& b) {
    if (a.source_tag != b.source_tag || a.ids != b.ids || a.labels != b.labels)
        return false;
    if (a.codebook.config.d != b.codebook.config.d ||
        a.codebook.config.m != b.codebook.config.m ||
        a.codebook.config.k_star != b.codebook.config.k_star ||
        a.codebook.config.metric != b.codebook.config.metric)
        return false;
    if (a.codebook.centroids != b.codebook.centroids) return false;
    if (a.codes.size() != b.codes.size()) return false;
    for (std::size_t i = 0; i < a.codes.size(); ++i)
        if (a.codes[i].indices != b.codes[i].indices) return false;
    return true;
}

}  // namespace crlsc
