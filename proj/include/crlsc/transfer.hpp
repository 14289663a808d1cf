#pragma once

#include <string>

#include <json.hpp>

#include "crlsc/config.hpp"
#include "crlsc/net_client.hpp"
#include "crlsc/net_server.hpp"
#include "crlsc/stage1.hpp"
#include "crlsc/util.hpp"

namespace crlsc {

// Teacher-encode a dataset and pack it into a PQ store: the shared KB.
inline KnowledgeBase build_skb(const Dataset& ds, const Teacher& teacher,
                               PQConfig pq_cfg, const std::string& tag = "skb") {
    const Matrix emb = teacher.encode_all(ds);
    pq_cfg.d = emb.cols();
    std::vector<std::uint64_t> ids(ds.size());
    std::iota(ids.begin(), ids.end(), 0);
    return kb_build(emb, pq_cfg, ids, tag, ds.labels);
}

// Two-device knowledge-transfer pipeline over real sockets:
// serve SKB -> device A trains against it -> A builds and serves its PKB ->
// device B trains against A's PKB -> both probes evaluated, plus a
// never-guided baseline for B.
inline nlohmann::json transfer_demo(const RunConfig& cfg, const std::string& out_dir) {
    nlohmann::json report;
    report["run_id"] = cfg.run_id();

    const TrainConfig tc = cfg.train_config();
    const AugmentationConfig aug = cfg.aug_config();
    const ProbeConfig probe = cfg.probe_config();
    const int timeout_ms = cfg.net_timeout_ms();

    // Shared KB on the "server".
    const Dataset server_ds = make_dataset(cfg.server_dataset_spec());
    const Teacher teacher(server_ds.images[0].size(), tc.embed_dim, cfg.teacher_seed());
    const KnowledgeBase skb = build_skb(server_ds, teacher, cfg.pq_config(tc.embed_dim));
    const std::string skb_path = out_dir + "/skb.crkb";
    kb_save(skb, skb_path);
    report["skb"] = {{"path", skb_path}, {"hash", file_hash(skb_path)}, {"entries", skb.size()}};

    KbServer skb_server(skb);

    // Device A trains against the served SKB.
    const Dataset a_train = make_dataset(cfg.dataset_spec(1));
    const Dataset a_test = make_dataset(cfg.dataset_spec(1, true));
    QueryFn skb_query = remote_query_fn(skb_server.address(), timeout_ms);
    const Stage1Result a_result = train_stage1(a_train, &skb_query, tc, aug);
    const ProbeResult a_probe = linear_probe_eval(a_result.encoder, a_train, a_test, probe);
    report["device_a"] = {{"final_loss", a_result.metrics.back().loss},
                          {"probe_top1", a_probe.top1},
                          {"probe_top5", a_probe.top5}};

    // A packs its encoder's knowledge into a PKB and serves it.
    PQConfig pkb_cfg = cfg.pq_config(tc.embed_dim);
    pkb_cfg.seed += 1;
    const KnowledgeBase pkb = build_private_kb(a_result.encoder, a_train, pkb_cfg, "device-a");
    const std::string pkb_path = out_dir + "/pkb_a.crkb";
    kb_save(pkb, pkb_path);
    report["pkb_a"] = {{"path", pkb_path}, {"hash", file_hash(pkb_path)}, {"entries", pkb.size()}};

    KbServer pkb_server(pkb);

    // Device B trains against A's PKB (peer transfer).
    TrainConfig tc_b = tc;
    tc_b.seed = tc.seed + 101;
    const Dataset b_train = make_dataset(cfg.dataset_spec(2));
    const Dataset b_test = make_dataset(cfg.dataset_spec(2, true));
    QueryFn pkb_query = remote_query_fn(pkb_server.address(), timeout_ms);
    const Stage1Result b_result = train_stage1(b_train, &pkb_query, tc_b, aug);
    const ProbeResult b_probe = linear_probe_eval(b_result.encoder, b_train, b_test, probe);
    report["device_b"] = {{"final_loss", b_result.metrics.back().loss},
                          {"probe_top1", b_probe.top1},
                          {"probe_top5", b_probe.top5}};

    // Never-guided baseline for B: identical seeds and budget, fusion off.
    TrainConfig tc_base = tc_b;
    tc_base.fusion_enabled = false;
    const Stage1Result base_result = train_stage1(b_train, nullptr, tc_base, aug);
    const ProbeResult base_probe =
        linear_probe_eval(base_result.encoder, b_train, b_test, probe);
    report["device_b_baseline"] = {{"final_loss", base_result.metrics.back().loss},
                                   {"probe_top1", base_probe.top1},
                                   {"probe_top5", base_probe.top5}};

    pkb_server.stop();
    skb_server.stop();
    return report;
}

}  // namespace crlsc
