#pragma once

#include <algorithm>
#include <numeric>
#include <vector>

#include "crlsc/dataset.hpp"
#include "crlsc/kmeans.hpp"
#include "crlsc/mlp.hpp"
#include "crlsc/stage1.hpp"
#include "crlsc/vq.hpp"

namespace crlsc {

struct Stage2Config {
    std::size_t codebook_size = 32;
    double beta = 0.25;
    bool omit_commitment = true;   // encoder is frozen in stage 2
    bool freeze_codebook = false;
    std::size_t epochs = 20;
    std::size_t batch = 32;
    double lr = 0.001;
    double lr_floor = 0.0;
    std::vector<std::size_t> decoder_hidden = {128, 192};
    std::uint64_t seed = 0;

    void validate() const {
        if (codebook_size < 2) throw ValidationError("Stage2Config: need K >= 2");
        if (beta < 0.0) throw ValidationError("Stage2Config: beta must be >= 0");
        if (batch < 1) throw ValidationError("Stage2Config: batch must be >= 1");
    }
};

struct Stage2EpochMetrics {
    std::size_t epoch = 0;
    double recon_mse = 0.0;
    double total_loss = 0.0;
    double lr = 0.0;
};

struct Stage2Result {
    Mlp decoder;
    VQCodebook codebook;
    std::vector<Stage2EpochMetrics> metrics;
};

namespace detail {

// Adam over a bare matrix (the VQ embedding table).
class MatrixAdam {
public:
    MatrixAdam(std::size_t rows, std::size_t cols, AdamConfig cfg = {})
        : cfg_(cfg), m_(rows, cols), v_(rows, cols) {}

    void step(Matrix& p, const Matrix& g, double lr) {
        ++t_;
        const double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
        const double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
        for (std::size_t i = 0; i < p.size(); ++i) {
            double& m = m_.data()[i];
            double& v = v_.data()[i];
            const double gi = g.data()[i];
            m = cfg_.beta1 * m + (1.0 - cfg_.beta1) * gi;
            v = cfg_.beta2 * v + (1.0 - cfg_.beta2) * gi * gi;
            p.data()[i] -= lr * (m / bc1) / (std::sqrt(v / bc2) + cfg_.eps);
        }
    }

private:
    AdamConfig cfg_;
    std::uint64_t t_ = 0;
    Matrix m_, v_;
};

}  // namespace detail

// Codebook seeded with k-means over the first batch of frozen-encoder
// outputs, so no codeword starts dead.
inline VQCodebook init_codebook(const Matrix& first_batch_z, std::size_t K,
                                std::uint64_t seed) {
    VQCodebook cb;
    cb.e = kmeans_fit(first_batch_z, K, 10, seed).centroids;
    return cb;
}

// Stage-2: frozen encoder -> quantize -> channel -> dequantize -> decoder,
// trained with the reconstruction + codebook terms (commitment omitted by
// default). The straight-through gradient stops at z_q: the decoder trains
// on whatever survived the channel, the codebook on its own distance term.
inline Stage2Result train_stage2(const Mlp& encoder, const Dataset& dataset,
                                 const Stage2Config& cfg, const ChannelModel& channel) {
    cfg.validate();
    channel.validate();
    if (dataset.size() < 1) throw ValidationError("train_stage2: empty dataset");

    const std::size_t in_dim = dataset.images[0].size();
    const std::size_t d = encoder.out_dim();

    // Frozen embeddings, computed once.
    const Matrix all_z = encode_dataset(encoder, dataset);

    Stage2Result res;
    {
        const std::size_t first = std::min(cfg.batch, dataset.size());
        Matrix fb(first, d);
        for (std::size_t i = 0; i < first; ++i) fb.set_row(i, all_z.row_vec(i));
        res.codebook = init_codebook(fb, cfg.codebook_size, cfg.seed);
    }

    std::vector<std::size_t> dims = {d};
    dims.insert(dims.end(), cfg.decoder_hidden.begin(), cfg.decoder_hidden.end());
    dims.push_back(in_dim);
    res.decoder = make_mlp(dims, Activation::Relu, false, cfg.seed ^ 0xDEC0DE);

    AdamState dec_adam(res.decoder, {cfg.lr, 0.9, 0.999, 1e-8});
    detail::MatrixAdam cb_adam(cfg.codebook_size, d, {cfg.lr, 0.9, 0.999, 1e-8});

    Rng shuffle_rng(cfg.seed ^ 0x2222ULL);
    std::vector<std::size_t> order(dataset.size());
    std::iota(order.begin(), order.end(), 0);

    std::uint64_t batch_counter = 0;
    for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
        std::shuffle(order.begin(), order.end(), shuffle_rng);
        const double lr = cosine_annealed_lr(cfg.lr, cfg.lr_floor, epoch, cfg.epochs);

        double epoch_recon = 0.0, epoch_total = 0.0;
        std::size_t n_batches = 0;
        for (std::size_t start = 0; start < dataset.size(); start += cfg.batch) {
            const std::size_t bsz = std::min(cfg.batch, dataset.size() - start);
            Matrix x(bsz, in_dim);
            Matrix z_e(bsz, d);
            for (std::size_t i = 0; i < bsz; ++i) {
                x.set_row(i, dataset.images[order[start + i]].px);
                z_e.set_row(i, all_z.row_vec(order[start + i]));
            }

            const std::vector<std::uint32_t> sent = vq_quantize(z_e, res.codebook);
            ChannelModel ch = channel;
            ch.seed = channel.seed + batch_counter;
            const std::vector<std::uint32_t> received =
                channel_transmit(sent, res.codebook.K(), ch);
            const Matrix e_sel = vq_dequantize(sent, res.codebook);
            const Matrix z_q = vq_dequantize(received, res.codebook);

            ForwardCache dec_cache = mlp_forward(res.decoder, z_q);
            const VqvaeLossTerms terms = vqvae_loss(x, dec_cache.out, z_e, e_sel,
                                                    cfg.beta, cfg.omit_commitment);
            if (!std::isfinite(terms.total))
                throw NumericError("train_stage2: non-finite loss at epoch " +
                                   std::to_string(epoch) + " batch " +
                                   std::to_string(n_batches));
            epoch_recon += terms.recon;
            epoch_total += terms.total;
            ++n_batches;
            ++batch_counter;

            // decoder step: d(recon)/d(x_hat)
            Matrix d_xhat(bsz, in_dim);
            const double numel = static_cast<double>(x.size());
            for (std::size_t i = 0; i < x.size(); ++i)
                d_xhat.data()[i] = 2.0 * (dec_cache.out.data()[i] - x.data()[i]) / numel;
            MlpGrads dec_grads = mlp_backward(res.decoder, dec_cache, d_xhat);
            dec_adam.step(res.decoder, dec_grads, lr);

            // codebook step: scatter per-row gradients onto the selected rows
            if (!cfg.freeze_codebook) {
                const Matrix row_grads = vqvae_codebook_grad(z_e, e_sel);
                Matrix cb_grad(res.codebook.K(), d);
                for (std::size_t t = 0; t < bsz; ++t)
                    for (std::size_t c = 0; c < d; ++c)
                        cb_grad(sent[t], c) += row_grads(t, c);
                cb_adam.step(res.codebook.e, cb_grad, lr);
            }
        }

        res.metrics.push_back({epoch + 1,
                               n_batches ? epoch_recon / static_cast<double>(n_batches) : 0.0,
                               n_batches ? epoch_total / static_cast<double>(n_batches) : 0.0,
                               lr});
    }
    return res;
}

}  // namespace crlsc
