#pragma once

#include <algorithm>
#include <cstdint>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "crlsc/augment.hpp"
#include "crlsc/dataset.hpp"
#include "crlsc/pq.hpp"
#include "crlsc/stage1.hpp"
#include "crlsc/stage2.hpp"
#include "crlsc/util.hpp"
#include "crlsc/vq.hpp"

namespace crlsc {

// Flat key=value run configuration (one pair per line, # comments). Unknown
// keys are rejected; every value is validated by the module that owns it.
class RunConfig {
public:
    RunConfig() { set_defaults(); }

    static RunConfig from_file(const std::string& path) {
        std::ifstream is(path);
        if (!is) throw IoError("config: cannot open " + path);
        std::ostringstream ss;
        ss << is.rdbuf();
        return from_text(ss.str());
    }

    static RunConfig from_text(const std::string& text) {
        RunConfig cfg;
        std::istringstream is(text);
        std::string line;
        std::size_t lineno = 0;
        while (std::getline(is, line)) {
            ++lineno;
            const auto hash = line.find('#');
            if (hash != std::string::npos) line = line.substr(0, hash);
            const auto first = line.find_first_not_of(" \t\r");
            if (first == std::string::npos) continue;
            const auto last = line.find_last_not_of(" \t\r");
            line = line.substr(first, last - first + 1);
            const auto eq = line.find('=');
            if (eq == std::string::npos)
                throw ValidationError("config line " + std::to_string(lineno) +
                                      ": expected key=value");
            const std::string key = trim(line.substr(0, eq));
            const std::string value = trim(line.substr(eq + 1));
            if (cfg.values_.find(key) == cfg.values_.end())
                throw ValidationError("config: unknown key '" + key + "'");
            cfg.values_[key] = value;
        }
        cfg.validate();
        return cfg;
    }

    const std::string& get(const std::string& key) const {
        auto it = values_.find(key);
        if (it == values_.end()) throw ValidationError("config: unknown key '" + key + "'");
        return it->second;
    }

    void set(const std::string& key, const std::string& value) {
        auto it = values_.find(key);
        if (it == values_.end()) throw ValidationError("config: unknown key '" + key + "'");
        it->second = value;
        validate();
    }

    std::uint64_t get_u64(const std::string& key) const {
        return std::stoull(get(key));
    }
    double get_f64(const std::string& key) const { return std::stod(get(key)); }
    bool get_bool(const std::string& key) const {
        const std::string& v = get(key);
        if (v == "1" || v == "true") return true;
        if (v == "0" || v == "false") return false;
        throw ValidationError("config: key '" + key + "' is not a boolean: " + v);
    }

    // Canonical, sorted key=value text. Re-parsing it reproduces the config.
    std::string canonical_text() const {
        std::ostringstream ss;
        for (const auto& [k, v] : values_) ss << k << "=" << v << "\n";
        return ss.str();
    }

    std::string run_id() const {
        return hex64(fnv1a64(canonical_text()));
    }

    // Override the master seed everywhere a seed appears.
    void override_seed(std::uint64_t seed) {
        values_["train.seed"] = std::to_string(seed);
        values_["data.seed"] = std::to_string(seed + 1);
        values_["teacher.seed"] = std::to_string(seed + 2);
        values_["noise.seed"] = std::to_string(seed + 3);
        values_["pq.seed"] = std::to_string(seed + 4);
        values_["codec.seed"] = std::to_string(seed + 5);
        validate();
    }

    // --- module config builders -------------------------------------------

    PQConfig pq_config(std::size_t d) const {
        PQConfig cfg;
        cfg.d = d;
        cfg.m = get_u64("pq.m");
        cfg.k_star = get_u64("pq.k_star");
        cfg.kmeans_iters = get_u64("pq.iters");
        cfg.seed = get_u64("pq.seed");
        cfg.validate();
        return cfg;
    }

    NoiseConfig noise_config() const {
        NoiseConfig cfg;
        cfg.mean = get_f64("noise.mean");
        cfg.variance = get_f64("noise.var");
        cfg.seed = get_u64("noise.seed");
        cfg.validate();
        return cfg;
    }

    FusionMode fusion_mode() const {
        const std::string& m = get("fusion.mode");
        if (m == "literal") return FusionMode::Literal;
        if (m == "softmax") return FusionMode::Softmax;
        throw ValidationError("config: fusion.mode must be literal or softmax");
    }

    TrainConfig train_config() const {
        TrainConfig cfg;
        cfg.tau = get_f64("train.tau");
        cfg.lr = get_f64("train.lr");
        cfg.epochs = get_u64("train.epochs");
        cfg.batch = get_u64("train.batch");
        cfg.seed = get_u64("train.seed");
        cfg.lr_floor = get_f64("train.lr_floor");
        const std::string& neg = get("train.negatives");
        if (neg == "other_positives")
            cfg.negatives = NegativesPolicy::OtherPositives;
        else if (neg == "extended")
            cfg.negatives = NegativesPolicy::Extended;
        else
            throw ValidationError("config: train.negatives must be other_positives or extended");
        cfg.grad_through_fusion = get_bool("train.grad_through_fusion");
        cfg.stop_grad_qstar = get_bool("train.stop_grad_qstar");
        cfg.normalize_embeddings = get_bool("train.normalize");
        cfg.fusion_enabled = get_bool("train.fusion_enabled");
        cfg.fusion_mode = fusion_mode();
        cfg.top_n = get_u64("fusion.top_n");
        cfg.retrieval_scale = get_f64("fusion.retrieval_scale");
        cfg.noise = noise_config();
        cfg.embed_dim = get_u64("embed.dim");
        cfg.hidden_dims.clear();
        std::istringstream hs(get("embed.hidden"));
        std::string tok;
        while (std::getline(hs, tok, ','))
            if (!tok.empty()) cfg.hidden_dims.push_back(std::stoull(tok));
        cfg.validate();
        return cfg;
    }

    AugmentationConfig aug_config() const {
        AugmentationConfig cfg;
        cfg.crop_scale_lo = get_f64("aug.crop_lo");
        cfg.crop_scale_hi = get_f64("aug.crop_hi");
        cfg.flip_prob = get_f64("aug.flip_prob");
        cfg.brightness = get_f64("aug.brightness");
        cfg.contrast = get_f64("aug.contrast");
        cfg.saturation = get_f64("aug.saturation");
        cfg.blur_sigma_lo = get_f64("aug.blur_lo");
        cfg.blur_sigma_hi = get_f64("aug.blur_hi");
        cfg.grayscale_prob = get_f64("aug.gray_prob");
        cfg.validate();
        return cfg;
    }

    // sample_seed_offset distinguishes splits and devices sharing class
    // patterns.
    SyntheticDatasetSpec dataset_spec(std::uint64_t sample_seed_offset = 0,
                                      bool test_split = false) const {
        SyntheticDatasetSpec spec;
        spec.classes = get_u64("data.classes");
        spec.per_class = test_split ? get_u64("data.test_per_class") : get_u64("data.per_class");
        spec.h = get_u64("data.h");
        spec.w = get_u64("data.w");
        spec.ch = get_u64("data.ch");
        spec.pattern_seed = get_u64("data.seed");
        spec.sample_seed = get_u64("data.seed") * 1000003ULL + sample_seed_offset +
                           (test_split ? 500000ULL : 0);
        spec.noise_sigma = get_f64("data.noise_sigma");
        spec.validate();
        return spec;
    }

    // The shared KB is built from a larger server-side corpus than any one
    // device trains on; with only 300 entries the top-30 neighbor sets of
    // different queries overlap so heavily that fusion cannot tell samples
    // apart.
    SyntheticDatasetSpec server_dataset_spec() const {
        SyntheticDatasetSpec spec = dataset_spec(0);
        spec.per_class = get_u64("data.server_per_class");
        spec.validate();
        return spec;
    }

    Stage2Config stage2_config() const {
        Stage2Config cfg;
        cfg.codebook_size = get_u64("codec.K");
        cfg.beta = get_f64("codec.beta");
        cfg.epochs = get_u64("codec.epochs");
        cfg.batch = get_u64("codec.batch");
        cfg.lr = get_f64("codec.lr");
        cfg.seed = get_u64("codec.seed");
        cfg.freeze_codebook = get_bool("codec.freeze_codebook");
        cfg.validate();
        return cfg;
    }

    ChannelModel channel_model() const {
        ChannelModel ch;
        ch.flip_prob = get_f64("codec.channel_p");
        ch.seed = get_u64("codec.seed") ^ 0xC4A221ULL;
        ch.validate();
        return ch;
    }

    ProbeConfig probe_config() const {
        ProbeConfig cfg;
        cfg.epochs = get_u64("probe.epochs");
        cfg.lr = get_f64("probe.lr");
        cfg.hidden = get_u64("probe.hidden");
        cfg.mlp_head = get_bool("probe.mlp_head");
        cfg.seed = get_u64("train.seed") ^ 0x9E0BEULL;
        return cfg;
    }

    std::uint64_t teacher_seed() const { return get_u64("teacher.seed"); }
    std::string net_addr() const { return get("net.addr"); }
    int net_timeout_ms() const { return static_cast<int>(get_u64("net.timeout_ms")); }

    void validate() const {
        // Parse every derived config so bad values fail early.
        pq_config(get_u64("embed.dim"));
        noise_config();
        train_config();
        aug_config();
        dataset_spec();
        server_dataset_spec();
        stage2_config();
        channel_model();
        probe_config();
    }

private:
    static std::string trim(const std::string& s) {
        const auto first = s.find_first_not_of(" \t\r");
        if (first == std::string::npos) return "";
        const auto last = s.find_last_not_of(" \t\r");
        return s.substr(first, last - first + 1);
    }

    void set_defaults() {
        values_ = {
            {"pq.m", "4"},
            {"pq.k_star", "16"},
            {"pq.iters", "25"},
            {"pq.seed", "11"},
            {"fusion.mode", "literal"},
            {"fusion.top_n", "30"},
            {"fusion.retrieval_scale", "4"},
            {"noise.mean", "0"},
            {"noise.var", "0.2"},
            {"noise.seed", "13"},
            {"train.tau", "0.1"},
            {"train.lr", "0.005"},
            {"train.lr_floor", "0"},
            {"train.epochs", "20"},
            {"train.batch", "32"},
            {"train.seed", "7"},
            {"train.negatives", "other_positives"},
            {"train.grad_through_fusion", "1"},
            {"train.stop_grad_qstar", "0"},
            {"train.normalize", "1"},
            {"train.fusion_enabled", "1"},
            {"embed.dim", "64"},
            {"embed.hidden", "128"},
            {"teacher.seed", "1234"},
            // Weak augmentation: at 8x8 desk scale, aggressive crops and color
            // jitter destroy the class signal instead of regularizing it.
            {"aug.crop_lo", "0.9"},
            {"aug.crop_hi", "1.0"},
            {"aug.flip_prob", "0"},
            {"aug.brightness", "0.1"},
            {"aug.contrast", "0.1"},
            {"aug.saturation", "0"},
            {"aug.blur_lo", "0"},
            {"aug.blur_hi", "0"},
            {"aug.gray_prob", "0"},
            {"probe.epochs", "60"},
            {"probe.lr", "0.003"},
            {"probe.hidden", "64"},
            {"probe.mlp_head", "1"},
            {"codec.K", "32"},
            {"codec.beta", "0.25"},
            {"codec.channel_p", "0"},
            {"codec.epochs", "20"},
            {"codec.batch", "32"},
            {"codec.lr", "0.002"},
            {"codec.seed", "17"},
            {"codec.freeze_codebook", "0"},
            {"net.addr", "127.0.0.1:7431"},
            {"net.timeout_ms", "5000"},
            {"data.classes", "3"},
            {"data.per_class", "100"},
            {"data.server_per_class", "300"},
            {"data.test_per_class", "40"},
            {"data.h", "8"},
            {"data.w", "8"},
            {"data.ch", "3"},
            {"data.seed", "21"},
            {"data.noise_sigma", "0.3"},
        };
    }

    std::map<std::string, std::string> values_;
};

}  // namespace crlsc
