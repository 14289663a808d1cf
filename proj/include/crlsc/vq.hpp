#pragma once

#include <cmath>
#include <cstdint>
#include <fstream>
#include <limits>
#include <string>
#include <vector>

#include "crlsc/binio.hpp"
#include "crlsc/matrix.hpp"

namespace crlsc {

// K x d embedding table for the semantic codec.
struct VQCodebook {
    Matrix e;  // K x d

    std::size_t K() const { return e.rows(); }
    std::size_t dim() const { return e.cols(); }

    void validate() const {
        if (e.rows() < 2) throw ValidationError("VQCodebook: need K >= 2");
        if (!e.all_finite()) throw ValidationError("VQCodebook: non-finite entries");
    }
};

// Per row of z_e: index of the nearest codeword (squared L2, ties to the
// lowest index).
inline std::vector<std::uint32_t> vq_quantize(const Matrix& z_e, const VQCodebook& cb) {
    cb.validate();
    if (z_e.cols() != cb.dim()) throw ValidationError("vq_quantize: dimension mismatch");
    std::vector<std::uint32_t> indices(z_e.rows());
    for (std::size_t t = 0; t < z_e.rows(); ++t) {
        double best_d = std::numeric_limits<double>::infinity();
        std::uint32_t best = 0;
        for (std::size_t k = 0; k < cb.K(); ++k) {
            const double d = squared_l2(z_e.row(t), cb.e.row(k), cb.dim());
            if (d < best_d) {
                best_d = d;
                best = static_cast<std::uint32_t>(k);
            }
        }
        indices[t] = best;
    }
    return indices;
}

inline Matrix vq_dequantize(const std::vector<std::uint32_t>& indices, const VQCodebook& cb) {
    cb.validate();
    Matrix z_q(indices.size(), cb.dim());
    for (std::size_t t = 0; t < indices.size(); ++t) {
        if (indices[t] >= cb.K())
            throw ValidationError("vq_dequantize: index out of range");
        z_q.set_row(t, cb.e.row_vec(indices[t]));
    }
    return z_q;
}

// ---------------------------------------------------------------------------
// Channel: each index travels as ceil(log2 K) bits; every bit flips
// independently with probability p. Values >= K are re-mapped modulo K.
// ---------------------------------------------------------------------------

struct ChannelModel {
    double flip_prob = 0.0;
    std::uint64_t seed = 0;

    void validate() const {
        if (flip_prob < 0.0 || flip_prob > 1.0)
            throw ValidationError("ChannelModel: flip probability must be in [0,1]");
    }
};

inline std::size_t index_bit_width(std::size_t K) {
    std::size_t bits = 1;
    while ((1ULL << bits) < K) ++bits;
    return bits;
}

inline std::vector<std::uint32_t> channel_transmit(const std::vector<std::uint32_t>& indices,
                                                   std::size_t K, const ChannelModel& ch,
                                                   std::uint64_t* bits_flipped = nullptr) {
    ch.validate();
    const std::size_t bits = index_bit_width(K);
    std::vector<std::uint32_t> out(indices.size());
    std::uint64_t flipped = 0;
    Rng rng(ch.seed);
    std::uniform_real_distribution<double> uni(0.0, 1.0);
    for (std::size_t t = 0; t < indices.size(); ++t) {
        std::uint32_t v = indices[t];
        if (ch.flip_prob > 0.0) {
            for (std::size_t b = 0; b < bits; ++b) {
                if (uni(rng) < ch.flip_prob) {
                    v ^= (1U << b);
                    ++flipped;
                }
            }
        }
        out[t] = v % static_cast<std::uint32_t>(K);
    }
    if (bits_flipped) *bits_flipped = flipped;
    return out;
}

// ---------------------------------------------------------------------------
// VQ-VAE loss terms. recon = MSE(x, x_hat); codebook = ||sg[z_e]-e_sel||^2
// per row, averaged over rows; commitment = beta * the mirror image, zeroed
// when omitted (frozen-encoder regime).
// ---------------------------------------------------------------------------

struct VqvaeLossTerms {
    double total = 0.0;
    double recon = 0.0;
    double codebook = 0.0;
    double commitment = 0.0;
};

inline VqvaeLossTerms vqvae_loss(const Matrix& x, const Matrix& x_hat, const Matrix& z_e,
                                 const Matrix& e_sel, double beta, bool omit_commitment) {
    if (!x.same_shape(x_hat)) throw ValidationError("vqvae_loss: x/x_hat shape mismatch");
    if (!z_e.same_shape(e_sel)) throw ValidationError("vqvae_loss: z_e/e_sel shape mismatch");
    if (beta < 0.0) throw ValidationError("vqvae_loss: beta must be >= 0");

    VqvaeLossTerms terms;
    const double numel = static_cast<double>(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double d = x.data()[i] - x_hat.data()[i];
        terms.recon += d * d;
    }
    terms.recon /= numel;

    const double rows = static_cast<double>(z_e.rows());
    double q = 0.0;
    for (std::size_t i = 0; i < z_e.size(); ++i) {
        const double d = z_e.data()[i] - e_sel.data()[i];
        q += d * d;
    }
    terms.codebook = q / rows;
    terms.commitment = omit_commitment ? 0.0 : beta * q / rows;
    terms.total = terms.recon + terms.codebook + terms.commitment;
    return terms;
}

// Gradient of the codebook term w.r.t. e_sel rows (z_e is behind sg).
inline Matrix vqvae_codebook_grad(const Matrix& z_e, const Matrix& e_sel) {
    Matrix g(e_sel.rows(), e_sel.cols());
    const double rows = static_cast<double>(z_e.rows());
    for (std::size_t i = 0; i < g.size(); ++i)
        g.data()[i] = 2.0 * (e_sel.data()[i] - z_e.data()[i]) / rows;
    return g;
}

// Gradient of the commitment term w.r.t. z_e (e_sel is behind sg).
inline Matrix vqvae_commitment_grad(const Matrix& z_e, const Matrix& e_sel, double beta) {
    Matrix g(z_e.rows(), z_e.cols());
    const double rows = static_cast<double>(z_e.rows());
    for (std::size_t i = 0; i < g.size(); ++i)
        g.data()[i] = 2.0 * beta * (z_e.data()[i] - e_sel.data()[i]) / rows;
    return g;
}

// ---------------------------------------------------------------------------
// Persistence: "CRVQ" | version u8=1 | K u32 | d u32 | K*d f32 rows.
// ---------------------------------------------------------------------------

inline constexpr char kVqMagic[4] = {'C', 'R', 'V', 'Q'};

inline void vq_save(const VQCodebook& cb, const std::string& path) {
    cb.validate();
    std::ofstream os(path, std::ios::binary);
    if (!os) throw IoError("vq_save: cannot open " + path);
    os.write(kVqMagic, 4);
    binio::write_u8(os, 1);
    binio::write_u32(os, static_cast<std::uint32_t>(cb.K()));
    binio::write_u32(os, static_cast<std::uint32_t>(cb.dim()));
    for (double v : cb.e.data()) binio::write_f32(os, static_cast<float>(v));
    if (!os) throw IoError("vq_save: write failure on " + path);
}

inline VQCodebook vq_load(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw IoError("vq_load: cannot open " + path);
    char magic[4];
    is.read(magic, 4);
    if (!is || std::memcmp(magic, kVqMagic, 4) != 0)
        throw ParseError("vq_load: magic mismatch");
    if (binio::read_u8(is, "version") != 1) throw ParseError("vq_load: bad version");
    const std::uint32_t K = binio::read_u32(is, "K");
    const std::uint32_t d = binio::read_u32(is, "d");
    VQCodebook cb;
    cb.e = Matrix(K, d);
    for (double& v : cb.e.data()) v = static_cast<double>(binio::read_f32(is, "rows"));
    cb.validate();
    return cb;
}

}  // namespace crlsc
