// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"
#include "ranet/geometry.hpp"

namespace ranet {

struct EvalSample {
    Pose predicted;
    Pose ground_truth;
    std::optional<BoundingBox> head_bbox;
    std::optional<double> torso_reference;
};

/// 0.6 * sqrt(W^2 + H^2) of the head box.
double head_normalizer(const BoundingBox& head_bbox);

struct JointAccuracy {
    std::string name;
    int correct = 0;
    int total = 0;
    /// Fraction in [0, 1]; 0 when `total` is 0 (see `evaluated`).
    double accuracy = 0.0;
    bool evaluated = false;
};

/// Normalised absolute error statistics for one joint (population variance).
struct ErrorStats {
    std::string name;
    int count = 0;
    double mean_x_err = 0.0;
    double mean_y_err = 0.0;
    double var_x_err = 0.0;
    double var_y_err = 0.0;
};

struct EvalReport {
    std::string metric; // "PCKh" or "PCK"
    double tau = 0.0;
    std::vector<JointAccuracy> joints;
    int total_correct = 0;
    int total_count = 0;
    /// Joint-count weighted mean over evaluated joints; 0 when nothing was evaluated.
    double total = 0.0;
    std::vector<ErrorStats> error_stats;
};

/// PCKh: a joint is correct iff its L2 error is strictly below tau * head_normalizer.
/// Ground-truth joints marked outer are skipped.
EvalReport pckh(std::span<const EvalSample> samples, double tau = 0.5);
/// PCK with the torso reference length as normaliser.
EvalReport pck(std::span<const EvalSample> samples, double tau = 0.2);
std::vector<ErrorStats> error_ellipses(std::span<const EvalSample> samples);

struct TableColumn {
    std::string label;
    double accuracy = 0.0;
    bool evaluated = false;
};

/// Head / Sho. / Elb. / Wri. / Hip / Knee / Ank. / Total grouping of a report.
std::vector<TableColumn> grouped_columns(const EvalReport& report);
std::string format_table(const EvalReport& report, const std::string& row_label = "RANet");

nlohmann::json to_json(const EvalReport& report);
EvalReport report_from_json(const nlohmann::json& j);

} // namespace ranet
