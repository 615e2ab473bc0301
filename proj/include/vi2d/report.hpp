#pragma once

#include <string>
#include <vector>

#include <json.hpp>

#include "vi2d/io.hpp"
#include "vi2d/sim.hpp"

namespace vi2d::sim {

/// One row per trial. Wall-clock seconds are included here and only here.
inline std::string study_csv(const StudyReport& report) {
    std::string out = "study,engine,trial,num_vars,seconds,mae,mape,mse\n";
    for (const auto& row : report.rows) {
        out += report.study;
        out += ',';
        out += row.engine;
        out += ',';
        out += std::to_string(row.trial);
        out += ',';
        out += std::to_string(row.num_vars);
        out += ',';
        out += io::format_double(row.seconds);
        out += ',';
        out += io::format_double(row.metrics.mae);
        out += ',';
        out += io::format_double(row.metrics.mape);
        out += ',';
        out += io::format_double(row.metrics.mse);
        out += '\n';
    }
    return out;
}

/// Deterministic summary: metrics and aggregates only, no wall-clock fields,
/// keys in stable (alphabetical) order.
inline std::string study_json(const StudyReport& report) {
    nlohmann::json root;
    root["study"] = report.study;
    nlohmann::json aggregates;
    for (const auto& agg : report.aggregates) {
        nlohmann::json entry;
        entry["trials"] = agg.trials;
        entry["mae_mean"] = agg.mean.mae;
        entry["mae_std"] = agg.stddev.mae;
        entry["mape_mean"] = agg.mean.mape;
        entry["mape_std"] = agg.stddev.mape;
        entry["mse_mean"] = agg.mean.mse;
        entry["mse_std"] = agg.stddev.mse;
        aggregates[agg.engine] = entry;
    }
    root["aggregates"] = aggregates;
    nlohmann::json trials = nlohmann::json::array();
    for (const auto& row : report.rows) {
        nlohmann::json entry;
        entry["engine"] = row.engine;
        entry["trial"] = row.trial;
        entry["num_vars"] = row.num_vars;
        entry["mae"] = row.metrics.mae;
        entry["mape"] = row.metrics.mape;
        entry["mse"] = row.metrics.mse;
        trials.push_back(entry);
    }
    root["trials"] = trials;
    return root.dump(2) + "\n";
}

}  // namespace vi2d::sim
