#pragma once

#include <cstdint>
#include <fstream>
#include <string>
#include <vector>

#include "crlsc/augment.hpp"
#include "crlsc/binio.hpp"
#include "crlsc/matrix.hpp"
#include "crlsc/mlp.hpp"

namespace crlsc {

// Desk-scale stand-in for the image corpora: each class is a fixed random
// base pattern, each sample the pattern plus pixel noise. Train and test
// splits share pattern_seed and differ in sample_seed.
struct SyntheticDatasetSpec {
    std::size_t classes = 3;
    std::size_t per_class = 100;
    std::size_t h = 8, w = 8, ch = 3;
    std::uint64_t pattern_seed = 1;
    std::uint64_t sample_seed = 2;
    double noise_sigma = 0.1;

    void validate() const {
        if (classes < 2) throw ValidationError("SyntheticDatasetSpec: need C >= 2");
        if (per_class < 1 || h < 1 || w < 1 || ch < 1)
            throw ValidationError("SyntheticDatasetSpec: empty shape");
    }
    std::size_t pixels() const { return h * w * ch; }
};

struct Dataset {
    std::vector<Image> images;
    std::vector<std::int32_t> labels;
    std::size_t classes = 0;

    std::size_t size() const { return images.size(); }
};

inline Image class_base_pattern(const SyntheticDatasetSpec& spec, std::size_t cls) {
    Rng rng(spec.pattern_seed * 0x9E3779B97F4A7C15ULL + cls + 1);
    std::uniform_real_distribution<double> uni(0.15, 0.85);
    Image img(spec.h, spec.w, spec.ch);
    for (double& v : img.px) v = uni(rng);
    return img;
}

inline Dataset make_dataset(const SyntheticDatasetSpec& spec) {
    spec.validate();
    Dataset ds;
    ds.classes = spec.classes;
    Rng noise_rng(spec.sample_seed);
    std::normal_distribution<double> noise(0.0, spec.noise_sigma);
    for (std::size_t c = 0; c < spec.classes; ++c) {
        const Image base = class_base_pattern(spec, c);
        for (std::size_t i = 0; i < spec.per_class; ++i) {
            Image img = base;
            if (spec.noise_sigma > 0.0)
                for (double& v : img.px) v = std::clamp(v + noise(noise_rng), 0.0, 1.0);
            ds.images.push_back(std::move(img));
            ds.labels.push_back(static_cast<std::int32_t>(c));
        }
    }
    return ds;
}

// ---------------------------------------------------------------------------
// Dataset cache: "CRDS" | version u8=1 | C u32 | N u64 | H u16 | W u16
// | Ch u16 | N x (label i32 + H*W*Ch f32)
// ---------------------------------------------------------------------------

inline constexpr char kDatasetMagic[4] = {'C', 'R', 'D', 'S'};

inline void dataset_save(const Dataset& ds, const std::string& path) {
    if (ds.images.empty()) throw ValidationError("dataset_save: empty dataset");
    std::ofstream os(path, std::ios::binary);
    if (!os) throw IoError("dataset_save: cannot open " + path);
    os.write(kDatasetMagic, 4);
    binio::write_u8(os, 1);
    binio::write_u32(os, static_cast<std::uint32_t>(ds.classes));
    binio::write_u64(os, ds.images.size());
    binio::write_u16(os, static_cast<std::uint16_t>(ds.images[0].h));
    binio::write_u16(os, static_cast<std::uint16_t>(ds.images[0].w));
    binio::write_u16(os, static_cast<std::uint16_t>(ds.images[0].ch));
    for (std::size_t i = 0; i < ds.images.size(); ++i) {
        binio::write_i32(os, ds.labels[i]);
        for (double v : ds.images[i].px) binio::write_f32(os, static_cast<float>(v));
    }
    if (!os) throw IoError("dataset_save: write failure on " + path);
}

inline Dataset dataset_load(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw IoError("dataset_load: cannot open " + path);
    char magic[4];
    is.read(magic, 4);
    if (!is || std::memcmp(magic, kDatasetMagic, 4) != 0)
        throw ParseError("dataset_load: magic mismatch");
    if (binio::read_u8(is, "version") != 1) throw ParseError("dataset_load: bad version");
    Dataset ds;
    ds.classes = binio::read_u32(is, "classes");
    const std::uint64_t n = binio::read_u64(is, "N");
    const std::uint16_t h = binio::read_u16(is, "H");
    const std::uint16_t w = binio::read_u16(is, "W");
    const std::uint16_t ch = binio::read_u16(is, "Ch");
    for (std::uint64_t i = 0; i < n; ++i) {
        ds.labels.push_back(binio::read_i32(is, "label"));
        Image img(h, w, ch);
        for (double& v : img.px) v = static_cast<double>(binio::read_f32(is, "pixels"));
        ds.images.push_back(std::move(img));
    }
    return ds;
}

// ---------------------------------------------------------------------------
// Teacher: a fixed random-projection network standing in for the server-side
// pre-trained encoder. Deterministic per (input shape, output dim, seed);
// outputs are L2-normalized.
// ---------------------------------------------------------------------------

class Teacher {
public:
    Teacher(std::size_t in_dim, std::size_t out_dim, std::uint64_t seed)
        : in_dim_(in_dim) {
        const std::size_t hidden = 128;
        mlp_ = make_mlp({in_dim, hidden, out_dim}, Activation::Tanh, true, seed);
    }

    std::vector<double> encode(const Image& img) const {
        if (img.size() != in_dim_) throw ValidationError("Teacher: image shape mismatch");
        Matrix batch(1, in_dim_);
        batch.set_row(0, img.px);
        return mlp_forward(mlp_, batch).out.row_vec(0);
    }

    Matrix encode_all(const Dataset& ds) const {
        Matrix batch(ds.size(), in_dim_);
        for (std::size_t i = 0; i < ds.size(); ++i) batch.set_row(i, ds.images[i].px);
        return mlp_forward(mlp_, batch).out;
    }

    std::size_t out_dim() const { return mlp_.out_dim(); }

private:
    std::size_t in_dim_;
    Mlp mlp_;
};

inline std::vector<double> teacher_encode(const Image& img, std::uint64_t teacher_seed,
                                          std::size_t out_dim) {
    return Teacher(img.size(), out_dim, teacher_seed).encode(img);
}

}  // namespace crlsc
