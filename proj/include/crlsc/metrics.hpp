#pragma once

#include <fstream>
#include <optional>
#include <string>

#include <json.hpp>

#include "crlsc/error.hpp"

namespace crlsc {

// JSON-lines metrics sink. Deterministic content goes to the metrics file;
// wall-clock timings go to a sidecar so re-runs with the same seed produce
// byte-identical metrics.
class MetricsWriter {
public:
    MetricsWriter(const std::string& metrics_path, const std::string& timings_path,
                  std::string run_id)
        : run_id_(std::move(run_id)), metrics_(metrics_path), timings_(timings_path) {
        if (!metrics_) throw IoError("metrics: cannot open " + metrics_path);
        if (!timings_) throw IoError("metrics: cannot open " + timings_path);
    }

    void record(const std::string& phase, std::optional<std::size_t> epoch,
                const std::string& metric, double value) {
        nlohmann::json j;
        j["run_id"] = run_id_;
        j["phase"] = phase;
        if (epoch) j["epoch"] = *epoch;
        j["metric"] = metric;
        j["value"] = value;
        metrics_ << j.dump() << "\n";
        metrics_.flush();
    }

    void record_timing(const std::string& phase, double wall_ms) {
        nlohmann::json j;
        j["run_id"] = run_id_;
        j["phase"] = phase;
        j["wall_ms"] = wall_ms;
        timings_ << j.dump() << "\n";
        timings_.flush();
    }

private:
    std::string run_id_;
    std::ofstream metrics_;
    std::ofstream timings_;
};

}  // namespace crlsc
