#pragma once

#include <cmath>
#include <cstdint>
#include <fstream>
#include <string>
#include <vector>

#include "crlsc/binio.hpp"
#include "crlsc/matrix.hpp"

namespace crlsc {

enum class Activation : std::uint8_t { Identity = 0, Relu = 1, Tanh = 2 };

struct Layer {
    Matrix w;                // out_dim x in_dim
    std::vector<double> b;   // out_dim
    Activation act = Activation::Identity;
};

struct Mlp {
    std::vector<Layer> layers;
    bool normalize_output = false;

    std::size_t in_dim() const { return layers.front().w.cols(); }
    std::size_t out_dim() const { return layers.back().w.rows(); }

    void validate() const {
        if (layers.empty()) throw ValidationError("Mlp: no layers");
        for (std::size_t i = 0; i + 1 < layers.size(); ++i)
            if (layers[i].w.rows() != layers[i + 1].w.cols())
                throw ValidationError("Mlp: layer dimensions do not chain");
        for (const Layer& l : layers) {
            if (l.b.size() != l.w.rows()) throw ValidationError("Mlp: bias length mismatch");
            if (!l.w.all_finite()) throw ValidationError("Mlp: non-finite weights");
        }
    }
};

inline Mlp make_mlp(const std::vector<std::size_t>& dims, Activation hidden_act,
                    bool normalize_output, std::uint64_t seed) {
    if (dims.size() < 2) throw ValidationError("make_mlp: need at least input and output dim");
    Mlp mlp;
    mlp.normalize_output = normalize_output;
    Rng rng(seed);
    for (std::size_t i = 0; i + 1 < dims.size(); ++i) {
        Layer l;
        const double scale = std::sqrt(2.0 / static_cast<double>(dims[i]));
        l.w = random_gaussian(dims[i + 1], dims[i], rng, 0.0, scale);
        l.b.assign(dims[i + 1], 0.0);
        l.act = (i + 2 < dims.size()) ? hidden_act : Activation::Identity;
        mlp.layers.push_back(std::move(l));
    }
    return mlp;
}

struct ForwardCache {
    Matrix input;                 // B x in_dim
    std::vector<Matrix> pre;      // pre-activation per layer
    std::vector<Matrix> post;     // post-activation per layer
    Matrix raw_out;               // before output normalization
    std::vector<double> norms;    // row norms used by normalization
    Matrix out;
};

inline double apply_act(double x, Activation a) {
    switch (a) {
        case Activation::Relu: return x > 0.0 ? x : 0.0;
        case Activation::Tanh: return std::tanh(x);
        default: return x;
    }
}

inline double act_grad(double pre, double post, Activation a) {
    switch (a) {
        case Activation::Relu: return pre > 0.0 ? 1.0 : 0.0;
        case Activation::Tanh: return 1.0 - post * post;
        default: return 1.0;
    }
}

inline ForwardCache mlp_forward(const Mlp& mlp, const Matrix& input) {
    mlp.validate();
    if (input.cols() != mlp.in_dim()) throw ValidationError("mlp_forward: input dim mismatch");

    ForwardCache cache;
    cache.input = input;
    Matrix cur = input;
    for (std::size_t li = 0; li < mlp.layers.size(); ++li) {
        const Layer& l = mlp.layers[li];
        Matrix pre(cur.rows(), l.w.rows());
        for (std::size_t r = 0; r < cur.rows(); ++r)
            for (std::size_t o = 0; o < l.w.rows(); ++o)
                pre(r, o) = dot(cur.row(r), l.w.row(o), l.w.cols()) + l.b[o];
        Matrix post = pre;
        for (double& x : post.data()) x = apply_act(x, l.act);
        if (!post.all_finite())
            throw NumericError("mlp_forward: non-finite activation in layer " +
                               std::to_string(li));
        cache.pre.push_back(pre);
        cache.post.push_back(post);
        cur = std::move(post);
    }
    cache.raw_out = cur;
    if (mlp.normalize_output) {
        cache.norms.resize(cur.rows());
        for (std::size_t r = 0; r < cur.rows(); ++r) {
            double nrm = norm2(cur.row(r), cur.cols());
            cache.norms[r] = nrm;
            if (nrm > 0.0)
                for (std::size_t c = 0; c < cur.cols(); ++c) cur(r, c) /= nrm;
        }
    }
    cache.out = std::move(cur);
    return cache;
}

struct MlpGrads {
    std::vector<Matrix> dw;
    std::vector<std::vector<double>> db;

    void accumulate(const MlpGrads& o) {
        for (std::size_t i = 0; i < dw.size(); ++i) {
            for (std::size_t j = 0; j < dw[i].size(); ++j)
                dw[i].data()[j] += o.dw[i].data()[j];
            for (std::size_t j = 0; j < db[i].size(); ++j) db[i][j] += o.db[i][j];
        }
    }
};

inline MlpGrads zero_grads(const Mlp& mlp) {
    MlpGrads g;
    for (const Layer& l : mlp.layers) {
        g.dw.emplace_back(l.w.rows(), l.w.cols());
        g.db.emplace_back(l.b.size(), 0.0);
    }
    return g;
}

// Backprop from d(loss)/d(out). Returns parameter grads; grad_input
// optionally receives d(loss)/d(input).
inline MlpGrads mlp_backward(const Mlp& mlp, const ForwardCache& cache,
                             const Matrix& grad_out, Matrix* grad_input = nullptr) {
    if (!grad_out.same_shape(cache.out))
        throw ValidationError("mlp_backward: gradient shape mismatch");

    Matrix g = grad_out;
    if (mlp.normalize_output) {
        // y = x/||x||; dx = (g - (g.y) y)/||x||
        for (std::size_t r = 0; r < g.rows(); ++r) {
            const double nrm = cache.norms[r];
            if (nrm <= 0.0) continue;
            const double gy = dot(g.row(r), cache.out.row(r), g.cols());
            for (std::size_t c = 0; c < g.cols(); ++c)
                g(r, c) = (g(r, c) - gy * cache.out(r, c)) / nrm;
        }
    }

    MlpGrads grads = zero_grads(mlp);
    for (std::size_t li = mlp.layers.size(); li-- > 0;) {
        const Layer& l = mlp.layers[li];
        const Matrix& pre = cache.pre[li];
        const Matrix& post = cache.post[li];
        const Matrix& in = (li == 0) ? cache.input : cache.post[li - 1];

        // through activation
        Matrix dpre = g;
        for (std::size_t r = 0; r < dpre.rows(); ++r)
            for (std::size_t o = 0; o < dpre.cols(); ++o)
                dpre(r, o) *= act_grad(pre(r, o), post(r, o), l.act);

        for (std::size_t r = 0; r < dpre.rows(); ++r)
            for (std::size_t o = 0; o < l.w.rows(); ++o) {
                const double gd = dpre(r, o);
                if (gd == 0.0) continue;
                for (std::size_t c = 0; c < l.w.cols(); ++c)
                    grads.dw[li](o, c) += gd * in(r, c);
                grads.db[li][o] += gd;
            }

        if (li > 0 || grad_input) {
            Matrix gin(dpre.rows(), l.w.cols());
            for (std::size_t r = 0; r < dpre.rows(); ++r)
                for (std::size_t o = 0; o < l.w.rows(); ++o) {
                    const double gd = dpre(r, o);
                    if (gd == 0.0) continue;
                    for (std::size_t c = 0; c < l.w.cols(); ++c)
                        gin(r, c) += gd * l.w(o, c);
                }
            g = std::move(gin);
        }
    }
    if (grad_input) *grad_input = std::move(g);
    return grads;
}

// ---------------------------------------------------------------------------
// Adam with cosine-annealed learning rate.
// ---------------------------------------------------------------------------

struct AdamConfig {
    double lr = 0.005;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
};

class AdamState {
public:
    explicit AdamState(const Mlp& mlp, AdamConfig cfg = {}) : cfg_(cfg) {
        for (const Layer& l : mlp.layers) {
            mw_.emplace_back(l.w.rows(), l.w.cols());
            vw_.emplace_back(l.w.rows(), l.w.cols());
            mb_.emplace_back(l.b.size(), 0.0);
            vb_.emplace_back(l.b.size(), 0.0);
        }
    }

    void step(Mlp& mlp, const MlpGrads& grads, double lr) {
        ++t_;
        const double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
        const double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
        for (std::size_t li = 0; li < mlp.layers.size(); ++li) {
            auto upd = [&](double& p, double g, double& m, double& v) {
                m = cfg_.beta1 * m + (1.0 - cfg_.beta1) * g;
                v = cfg_.beta2 * v + (1.0 - cfg_.beta2) * g * g;
                p -= lr * (m / bc1) / (std::sqrt(v / bc2) + cfg_.eps);
            };
            Layer& l = mlp.layers[li];
            for (std::size_t j = 0; j < l.w.size(); ++j)
                upd(l.w.data()[j], grads.dw[li].data()[j], mw_[li].data()[j],
                    vw_[li].data()[j]);
            for (std::size_t j = 0; j < l.b.size(); ++j)
                upd(l.b[j], grads.db[li][j], mb_[li][j], vb_[li][j]);
        }
    }

    const AdamConfig& config() const { return cfg_; }

private:
    AdamConfig cfg_;
    std::uint64_t t_ = 0;
    std::vector<Matrix> mw_, vw_;
    std::vector<std::vector<double>> mb_, vb_;
};

// lr(epoch) with cosine annealing from lr0 down to floor over total epochs.
inline double cosine_annealed_lr(double lr0, double floor, std::size_t epoch,
                                 std::size_t total_epochs) {
    if (total_epochs <= 1) return lr0;
    const double t = static_cast<double>(epoch) / static_cast<double>(total_epochs);
    return floor + 0.5 * (lr0 - floor) * (1.0 + std::cos(M_PI * t));
}

// ---------------------------------------------------------------------------
// Persistence: "CREN" | version u8=1 | normalize u8 | n_layers u32 |
// per layer: out u32, in u32, act u8, weights f64 row-major, bias f64.
// ---------------------------------------------------------------------------

inline constexpr char kMlpMagic[4] = {'C', 'R', 'E', 'N'};

inline void mlp_save(const Mlp& mlp, const std::string& path) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw IoError("mlp_save: cannot open " + path);
    os.write(kMlpMagic, 4);
    binio::write_u8(os, 1);
    binio::write_u8(os, mlp.normalize_output ? 1 : 0);
    binio::write_u32(os, static_cast<std::uint32_t>(mlp.layers.size()));
    for (const Layer& l : mlp.layers) {
        binio::write_u32(os, static_cast<std::uint32_t>(l.w.rows()));
        binio::write_u32(os, static_cast<std::uint32_t>(l.w.cols()));
        binio::write_u8(os, static_cast<std::uint8_t>(l.act));
        for (double v : l.w.data()) binio::write_raw(os, v);
        for (double v : l.b) binio::write_raw(os, v);
    }
    if (!os) throw IoError("mlp_save: write failure on " + path);
}

inline Mlp mlp_load(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw IoError("mlp_load: cannot open " + path);
    char magic[4];
    is.read(magic, 4);
    if (!is || std::memcmp(magic, kMlpMagic, 4) != 0)
        throw ParseError("mlp_load: magic mismatch");
    if (binio::read_u8(is, "version") != 1) throw ParseError("mlp_load: bad version");
    Mlp mlp;
    mlp.normalize_output = binio::read_u8(is, "normalize") != 0;
    const std::uint32_t n_layers = binio::read_u32(is, "n_layers");
    for (std::uint32_t i = 0; i < n_layers; ++i) {
        Layer l;
        const std::uint32_t out = binio::read_u32(is, "out_dim");
        const std::uint32_t in = binio::read_u32(is, "in_dim");
        const std::uint8_t act = binio::read_u8(is, "act");
        if (act > 2) throw ParseError("mlp_load: bad activation tag");
        l.act = static_cast<Activation>(act);
        l.w = Matrix(out, in);
        for (double& v : l.w.data()) v = binio::read_raw<double>(is, "weights");
        l.b.resize(out);
        for (double& v : l.b) v = binio::read_raw<double>(is, "bias");
        mlp.layers.push_back(std::move(l));
    }
    mlp.validate();
    return mlp;
}

}  // namespace crlsc
