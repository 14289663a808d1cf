// crlsc — command-line entry point for the knowledge-base-guided semantic
// communication toolkit: KB construction and serving, Stage-1/Stage-2
// training, evaluation, and the two-device transfer demo.

#include <chrono>
#include <csignal>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "crlsc/crlsc.hpp"

namespace fs = std::filesystem;
using namespace crlsc;

namespace {

struct GlobalOpts {
    std::string config_path;
    std::optional<std::uint64_t> seed;
    std::string out_dir = "runs";
    std::string log_level = "info";
};

RunConfig load_config(const GlobalOpts& g) {
    RunConfig cfg = g.config_path.empty() ? RunConfig() : RunConfig::from_file(g.config_path);
    if (g.seed) cfg.override_seed(*g.seed);
    return cfg;
}

// All artifacts land under <out>/<run_id>; the effective config is echoed
// there so the run can be reproduced from it.
std::string prepare_run_dir(const GlobalOpts& g, const RunConfig& cfg) {
    const fs::path dir = fs::path(g.out_dir) / cfg.run_id();
    fs::create_directories(dir);
    std::ofstream echo(dir / "config.txt");
    echo << cfg.canonical_text();
    return dir.string();
}

class Stopwatch {
public:
    double elapsed_ms() const {
        return std::chrono::duration<double, std::milli>(clock::now() - start_).count();
    }

private:
    using clock = std::chrono::steady_clock;
    clock::time_point start_ = clock::now();
};

Dataset load_or_make_dataset(const RunConfig& cfg, const std::string& dataset_path,
                             std::uint64_t offset = 0, bool test_split = false) {
    if (!dataset_path.empty()) return dataset_load(dataset_path);
    return make_dataset(cfg.dataset_spec(offset, test_split));
}

int cmd_build_kb(const GlobalOpts& g, const std::string& dataset_path,
                 std::string out_path) {
    const RunConfig cfg = load_config(g);
    const std::string run_dir = prepare_run_dir(g, cfg);
    if (out_path.empty()) out_path = run_dir + "/skb.crkb";

    const Dataset ds = load_or_make_dataset(cfg, dataset_path);
    const std::size_t embed_dim = cfg.get_u64("embed.dim");
    const Teacher teacher(ds.images[0].size(), embed_dim, cfg.teacher_seed());
    const KnowledgeBase kb = build_skb(ds, teacher, cfg.pq_config(embed_dim));
    const std::uint64_t bytes = kb_save(kb, out_path);

    const PQConfig& pq = kb.codebook.config;
    std::cout << "kb: " << out_path << "\n"
              << "N=" << kb.size() << " d=" << pq.d << " m=" << pq.m
              << " k_star=" << pq.k_star << "\n"
              << "centroid_scalars=" << kb.codebook.storage_scalars()
              << " bytes=" << bytes << " hash=" << file_hash(out_path) << "\n";
    return 0;
}

volatile std::sig_atomic_t g_stop_requested = 0;

int cmd_serve(const GlobalOpts& g, const std::string& kb_path, const std::string& addr) {
    const RunConfig cfg = load_config(g);
    const KnowledgeBase kb = kb_load(kb_path);
    const NetAddress bind = parse_address(addr.empty() ? cfg.net_addr() : addr);
    KbServer server(kb, bind.host, bind.port);
    std::cout << "serving " << kb.source_tag << " (" << kb.size() << " entries) on "
              << server.address() << std::endl;

    std::signal(SIGINT, [](int) { g_stop_requested = 1; });
    std::signal(SIGTERM, [](int) { g_stop_requested = 1; });
    while (!g_stop_requested)
        std::this_thread::sleep_for(std::chrono::milliseconds(50));
    server.stop();
    return 0;
}

// --skb accepts either a KB file path or a host:port address; the
// CRLSC_KB_ADDR environment variable supplies the default address.
int cmd_train_encoder(const GlobalOpts& g, const std::string& skb_arg,
                      std::string encoder_out) {
    const RunConfig cfg = load_config(g);
    const std::string run_dir = prepare_run_dir(g, cfg);
    if (encoder_out.empty()) encoder_out = run_dir + "/encoder.cren";

    const TrainConfig tc = cfg.train_config();
    const Dataset train_ds = make_dataset(cfg.dataset_spec(1));

    KnowledgeBase local_kb;
    QueryFn query;
    bool have_query = false;
    std::string skb = skb_arg;
    if (skb.empty()) {
        if (const char* env = std::getenv("CRLSC_KB_ADDR")) skb = env;
    }
    if (!skb.empty()) {
        if (fs::exists(skb)) {
            local_kb = kb_load(skb);
            query = local_query_fn(local_kb);
        } else {
            query = remote_query_fn(skb, cfg.net_timeout_ms());
        }
        have_query = true;
    }

    MetricsWriter metrics(run_dir + "/metrics.jsonl", run_dir + "/timings.jsonl",
                          cfg.run_id());
    Stopwatch watch;
    const Stage1Result result =
        train_stage1(train_ds, have_query ? &query : nullptr, tc, cfg.aug_config());
    for (const EpochMetrics& m : result.metrics) {
        metrics.record("stage1", m.epoch, "loss", m.loss);
        metrics.record("stage1", m.epoch, "lr", m.lr);
    }
    metrics.record_timing("stage1", watch.elapsed_ms());

    mlp_save(result.encoder, encoder_out);
    std::cout << "encoder: " << encoder_out << "\n"
              << "final_loss=" << result.metrics.back().loss << "\n";
    return 0;
}

int cmd_train_decoder(const GlobalOpts& g, const std::string& encoder_path,
                      std::string codebook_out, std::string decoder_out) {
    const RunConfig cfg = load_config(g);
    const std::string run_dir = prepare_run_dir(g, cfg);
    if (codebook_out.empty()) codebook_out = run_dir + "/codebook.crvq";
    if (decoder_out.empty()) decoder_out = run_dir + "/decoder.cren";

    const Mlp encoder = mlp_load(encoder_path);
    const Dataset train_ds = make_dataset(cfg.dataset_spec(1));

    MetricsWriter metrics(run_dir + "/metrics_stage2.jsonl", run_dir + "/timings_stage2.jsonl",
                          cfg.run_id());
    Stopwatch watch;
    const Stage2Result result =
        train_stage2(encoder, train_ds, cfg.stage2_config(), cfg.channel_model());
    for (const Stage2EpochMetrics& m : result.metrics) {
        metrics.record("stage2", m.epoch, "recon_mse", m.recon_mse);
        metrics.record("stage2", m.epoch, "total_loss", m.total_loss);
    }
    metrics.record_timing("stage2", watch.elapsed_ms());

    vq_save(result.codebook, codebook_out);
    mlp_save(result.decoder, decoder_out);
    std::cout << "codebook: " << codebook_out << " hash=" << file_hash(codebook_out) << "\n"
              << "decoder: " << decoder_out << "\n"
              << "final_recon_mse=" << result.metrics.back().recon_mse << "\n";
    return 0;
}

int cmd_eval(const GlobalOpts& g, const std::string& encoder_path,
             const std::string& dataset_path) {
    const RunConfig cfg = load_config(g);
    const Mlp encoder = mlp_load(encoder_path);
    const Dataset train_ds = load_or_make_dataset(cfg, dataset_path, 1);
    const Dataset test_ds = make_dataset(cfg.dataset_spec(1, true));
    const ProbeResult probe = linear_probe_eval(encoder, train_ds, test_ds,
                                                cfg.probe_config());
    std::cout << "top1=" << probe.top1 << "\ntop5=" << probe.top5 << "\n";
    return 0;
}

int cmd_transfer_demo(const GlobalOpts& g) {
    const RunConfig cfg = load_config(g);
    const std::string run_dir = prepare_run_dir(g, cfg);
    const nlohmann::json report = transfer_demo(cfg, run_dir);
    std::ofstream out(run_dir + "/transfer_report.json");
    out << report.dump(2) << "\n";
    std::cout << report.dump(2) << std::endl;
    return 0;
}

int cmd_e2e(const GlobalOpts& g) {
    const RunConfig cfg = load_config(g);
    const std::string run_dir = prepare_run_dir(g, cfg);
    const TrainConfig tc = cfg.train_config();

    MetricsWriter metrics(run_dir + "/metrics.jsonl", run_dir + "/timings.jsonl",
                          cfg.run_id());
    nlohmann::json summary;
    summary["run_id"] = cfg.run_id();

    // 1. shared KB from teacher embeddings
    Stopwatch w_kb;
    const Dataset server_ds = make_dataset(cfg.server_dataset_spec());
    const Teacher teacher(server_ds.images[0].size(), tc.embed_dim, cfg.teacher_seed());
    const KnowledgeBase skb = build_skb(server_ds, teacher, cfg.pq_config(tc.embed_dim));
    const std::string skb_path = run_dir + "/skb.crkb";
    kb_save(skb, skb_path);
    metrics.record("build_kb", std::nullopt, "entries", static_cast<double>(skb.size()));
    metrics.record_timing("build_kb", w_kb.elapsed_ms());
    summary["skb_hash"] = file_hash(skb_path);

    // 2. stage-1 encoder pre-training against the SKB
    Stopwatch w_s1;
    const Dataset train_ds = make_dataset(cfg.dataset_spec(1));
    const Dataset test_ds = make_dataset(cfg.dataset_spec(1, true));
    QueryFn query = local_query_fn(skb);
    const Stage1Result s1 = train_stage1(train_ds, &query, tc, cfg.aug_config());
    for (const EpochMetrics& m : s1.metrics) {
        metrics.record("stage1", m.epoch, "loss", m.loss);
        metrics.record("stage1", m.epoch, "lr", m.lr);
    }
    metrics.record_timing("stage1", w_s1.elapsed_ms());
    const std::string encoder_path = run_dir + "/encoder.cren";
    mlp_save(s1.encoder, encoder_path);
    summary["encoder_hash"] = file_hash(encoder_path);

    // 3. private KB from the trained encoder
    PQConfig pkb_cfg = cfg.pq_config(tc.embed_dim);
    pkb_cfg.seed += 1;
    const KnowledgeBase pkb = build_private_kb(s1.encoder, train_ds, pkb_cfg, "local");
    const std::string pkb_path = run_dir + "/pkb.crkb";
    kb_save(pkb, pkb_path);
    metrics.record("build_pkb", std::nullopt, "entries", static_cast<double>(pkb.size()));
    summary["pkb_hash"] = file_hash(pkb_path);

    // 4. stage-2 semantic codec with frozen encoder
    Stopwatch w_s2;
    const Stage2Result s2 =
        train_stage2(s1.encoder, train_ds, cfg.stage2_config(), cfg.channel_model());
    for (const Stage2EpochMetrics& m : s2.metrics) {
        metrics.record("stage2", m.epoch, "recon_mse", m.recon_mse);
        metrics.record("stage2", m.epoch, "total_loss", m.total_loss);
    }
    metrics.record_timing("stage2", w_s2.elapsed_ms());
    const std::string cb_path = run_dir + "/codebook.crvq";
    const std::string dec_path = run_dir + "/decoder.cren";
    vq_save(s2.codebook, cb_path);
    mlp_save(s2.decoder, dec_path);
    summary["codebook_hash"] = file_hash(cb_path);

    // 5. linear-probe evaluation
    Stopwatch w_eval;
    const ProbeResult probe = linear_probe_eval(s1.encoder, train_ds, test_ds,
                                                cfg.probe_config());
    metrics.record("eval", std::nullopt, "top1", probe.top1);
    metrics.record("eval", std::nullopt, "top5", probe.top5);
    metrics.record_timing("eval", w_eval.elapsed_ms());
    summary["probe_top1"] = probe.top1;
    summary["probe_top5"] = probe.top5;

    std::ofstream out(run_dir + "/summary.json");
    out << summary.dump(2) << "\n";
    std::cout << summary.dump(2) << std::endl;
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"CRLSC toolkit: PQ knowledge bases, KB-guided contrastive "
                 "pre-training, VQ semantic codec, KB serving"};
    app.require_subcommand(1);

    GlobalOpts g;
    app.add_option("--config", g.config_path, "run configuration file (key=value lines)");
    std::uint64_t seed_val = 0;
    auto* seed_opt = app.add_option("--seed", seed_val, "master seed override");
    app.add_option("--out", g.out_dir, "output directory for run artifacts");
    app.add_option("--log-level", g.log_level, "log level (info|debug)");

    std::string dataset_path, out_path, kb_path, addr, skb_arg, encoder_path;
    std::string codebook_out, decoder_out;

    auto* build = app.add_subcommand("build-kb", "teacher-encode a dataset into a PQ KB");
    build->add_option("--dataset", dataset_path, "CRDS dataset cache (generated if absent)");
    build->add_option("--out-path", out_path, "KB output file");

    auto* serve = app.add_subcommand("serve", "serve a KB file over the wire protocol");
    serve->add_option("--kb", kb_path, "KB file to serve")->required();
    serve->add_option("--addr", addr, "bind address host:port");

    auto* tenc = app.add_subcommand("train-encoder", "stage-1 contrastive pre-training");
    tenc->add_option("--skb", skb_arg, "shared KB: file path or host:port address");
    tenc->add_option("--encoder-out", encoder_path, "encoder output file");

    auto* tdec = app.add_subcommand("train-decoder", "stage-2 semantic codec training");
    tdec->add_option("--encoder", encoder_path, "frozen encoder file")->required();
    tdec->add_option("--codebook-out", codebook_out, "VQ codebook output file");
    tdec->add_option("--decoder-out", decoder_out, "decoder output file");

    auto* eval = app.add_subcommand("eval", "linear-probe evaluation of a frozen encoder");
    eval->add_option("--encoder", encoder_path, "encoder file")->required();
    eval->add_option("--dataset", dataset_path, "CRDS dataset cache (generated if absent)");

    app.add_subcommand("transfer-demo", "SKB -> device A -> PKB -> device B pipeline");
    app.add_subcommand("e2e", "build-kb, train-encoder, build PKB, train-decoder, eval");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2;
    }
    if (seed_opt->count() > 0) g.seed = seed_val;

    try {
        if (build->parsed()) return cmd_build_kb(g, dataset_path, out_path);
        if (serve->parsed()) return cmd_serve(g, kb_path, addr);
        if (tenc->parsed()) return cmd_train_encoder(g, skb_arg, encoder_path);
        if (tdec->parsed())
            return cmd_train_decoder(g, encoder_path, codebook_out, decoder_out);
        if (eval->parsed()) return cmd_eval(g, encoder_path, dataset_path);
        if (app.get_subcommand("transfer-demo")->parsed()) return cmd_transfer_demo(g);
        if (app.get_subcommand("e2e")->parsed()) return cmd_e2e(g);
    } catch (const ValidationError& e) {
        std::cerr << "error: " << e.what() << std::endl;
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << std::endl;
        return 1;
    }
    return 2;
}
