// SPDX-License-Identifier: Apache-2.0
#include "ranet/evaluate.hpp"

#include <cmath>
#include <functional>
#include <iomanip>
#include <sstream>
#include <stdexcept>

namespace ranet {

namespace {

// Compensated accumulator; keeps aggregate statistics stable under reordering.
class KahanSum {
public:
    void add(double v)
    {
        const double y = v - carry_;
        const double t = sum_ + y;
        carry_ = (t - sum_) - y;
        sum_ = t;
    }
    double value() const { return sum_; }

private:
    double sum_ = 0.0;
    double carry_ = 0.0;
};

void check_pair(const EvalSample& s, std::size_t index)
{
    if (s.predicted.size() != s.ground_truth.size()) {
        throw std::invalid_argument("sample " + std::to_string(index) + ": prediction and ground truth differ in joint count");
    }
}

EvalReport accuracy_report(std::span<const EvalSample> samples, double tau, const std::string& metric,
                           const std::function<double(const EvalSample&, std::size_t)>& normalizer)
{
    EvalReport report;
    report.metric = metric;
    report.tau = tau;
    if (samples.empty()) {
        return report;
    }
    const auto& skeleton = samples.front().ground_truth.skeleton();
    report.joints.resize(skeleton.joint_count());
    for (int j = 0; j < skeleton.joint_count(); ++j) {
        report.joints[j].name = skeleton.joint_names[j];
    }
    for (std::size_t i = 0; i < samples.size(); ++i) {
        const auto& s = samples[i];
        check_pair(s, i);
        if (s.ground_truth.size() != static_cast<int>(report.joints.size())) {
            throw std::invalid_argument("sample " + std::to_string(i) + ": skeleton differs from the first sample");
        }
        const double threshold = tau * normalizer(s, i);
        for (int j = 0; j < s.ground_truth.size(); ++j) {
            const Keypoint& gt = s.ground_truth[j];
            if (gt.visibility == Visibility::outer) {
                continue;
            }
            const double err = distance(s.predicted[j].position(), gt.position());
            auto& acc = report.joints[j];
            ++acc.total;
            if (err < threshold) {
                ++acc.correct;
            }
        }
    }
    for (auto& acc : report.joints) {
        acc.evaluated = acc.total > 0;
        acc.accuracy = acc.evaluated ? static_cast<double>(acc.correct) / acc.total : 0.0;
        report.total_correct += acc.correct;
        report.total_count += acc.total;
    }
    report.total = report.total_count > 0 ? static_cast<double>(report.total_correct) / report.total_count : 0.0;
    return report;
}

} // namespace

double head_normalizer(const BoundingBox& head_bbox)
{
    return 0.6 * std::hypot(head_bbox.width(), head_bbox.height());
}

EvalReport pckh(std::span<const EvalSample> samples, double tau)
{
    EvalReport report = accuracy_report(samples, tau, "PCKh", [](const EvalSample& s, std::size_t i) {
        if (!s.head_bbox) {
            throw std::invalid_argument("pckh: sample " + std::to_string(i) + " has no head bounding box");
        }
        return head_normalizer(*s.head_bbox);
    });
    report.error_stats = error_ellipses(samples);
    return report;
}

EvalReport pck(std::span<const EvalSample> samples, double tau)
{
    return accuracy_report(samples, tau, "PCK", [](const EvalSample& s, std::size_t i) {
        if (!s.torso_reference) {
            throw std::invalid_argument("pck: sample " + std::to_string(i) + " has no torso reference");
        }
        return *s.torso_reference;
    });
}

std::vector<ErrorStats> error_ellipses(std::span<const EvalSample> samples)
{
    if (samples.empty()) {
        return {};
    }
    const auto& skeleton = samples.front().ground_truth.skeleton();
    const int joints = skeleton.joint_count();
    std::vector<std::vector<double>> xs(joints), ys(joints);
    for (std::size_t i = 0; i < samples.size(); ++i) {
        const auto& s = samples[i];
        check_pair(s, i);
        if (!s.head_bbox) {
            throw std::invalid_argument("error_ellipses: sample " + std::to_string(i) + " has no head bounding box");
        }
        const double d_norm = head_normalizer(*s.head_bbox);
        for (int j = 0; j < joints; ++j) {
            const Keypoint& gt = s.ground_truth[j];
            if (gt.visibility == Visibility::outer) {
                continue;
            }
            xs[j].push_back(std::abs(s.predicted[j].x - gt.x) / d_norm);
            ys[j].push_back(std::abs(s.predicted[j].y - gt.y) / d_norm);
        }
    }

    auto mean_var = [](const std::vector<double>& v) -> std::pair<double, double> {
        if (v.empty()) {
            return {0.0, 0.0};
        }
        KahanSum sum;
        for (double e : v) {
            sum.add(e);
        }
        const double mean = sum.value() / v.size();
        KahanSum sq;
        for (double e : v) {
            sq.add((e - mean) * (e - mean));
        }
        return {mean, sq.value() / v.size()};
    };

    std::vector<ErrorStats> stats(joints);
    for (int j = 0; j < joints; ++j) {
        stats[j].name = skeleton.joint_names[j];
        stats[j].count = static_cast<int>(xs[j].size());
        std::tie(stats[j].mean_x_err, stats[j].var_x_err) = mean_var(xs[j]);
        std::tie(stats[j].mean_y_err, stats[j].var_y_err) = mean_var(ys[j]);
    }
    return stats;
}

std::vector<TableColumn> grouped_columns(const EvalReport& report)
{
    struct Group {
        const char* label;
        std::vector<const char*> keys;
    };
    const std::vector<Group> groups = {
        {"Head", {"head", "neck"}}, {"Sho.", {"shoulder"}}, {"Elb.", {"elbow"}}, {"Wri.", {"wrist"}},
        {"Hip", {"hip"}},           {"Knee", {"knee"}},     {"Ank.", {"ankle"}},
    };
    std::vector<TableColumn> columns;
    for (const auto& g : groups) {
        int correct = 0;
        int total = 0;
        for (const auto& joint : report.joints) {
            for (const char* key : g.keys) {
                if (joint.name.find(key) != std::string::npos) {
                    correct += joint.correct;
                    total += joint.total;
                    break;
                }
            }
        }
        columns.push_back({g.label, total > 0 ? static_cast<double>(correct) / total : 0.0, total > 0});
    }
    columns.push_back({"Total", report.total, report.total_count > 0});
    return columns;
}

std::string format_table(const EvalReport& report, const std::string& row_label)
{
    const auto columns = grouped_columns(report);
    std::ostringstream out;
    out << std::left << std::setw(16) << (report.metric + "@" + [&] {
        std::ostringstream t;
        t << report.tau;
        return t.str();
    }());
    for (const auto& c : columns) {
        out << std::right << std::setw(8) << c.label;
    }
    out << '\n' << std::left << std::setw(16) << row_label << std::fixed << std::setprecision(1);
    for (const auto& c : columns) {
        if (c.evaluated) {
            out << std::right << std::setw(8) << 100.0 * c.accuracy;
        } else {
            out << std::right << std::setw(8) << "-";
        }
    }
    out << '\n';
    return out.str();
}

nlohmann::json to_json(const EvalReport& report)
{
    nlohmann::json j;
    j["metric"] = report.metric;
    j["tau"] = report.tau;
    j["total"] = report.total;
    j["total_correct"] = report.total_correct;
    j["total_count"] = report.total_count;
    j["joints"] = nlohmann::json::array();
    for (const auto& a : report.joints) {
        j["joints"].push_back(
            {{"name", a.name}, {"correct", a.correct}, {"total", a.total}, {"accuracy", a.accuracy}, {"evaluated", a.evaluated}});
    }
    j["columns"] = nlohmann::json::array();
    for (const auto& c : grouped_columns(report)) {
        j["columns"].push_back({{"label", c.label}, {"accuracy", c.accuracy}, {"evaluated", c.evaluated}});
    }
    j["error_stats"] = nlohmann::json::array();
    for (const auto& s : report.error_stats) {
        j["error_stats"].push_back({{"name", s.name},
                                    {"count", s.count},
                                    {"mean_x_err", s.mean_x_err},
                                    {"mean_y_err", s.mean_y_err},
                                    {"var_x_err", s.var_x_err},
                                    {"var_y_err", s.var_y_err}});
    }
    return j;
}

EvalReport report_from_json(const nlohmann::json& j)
{
    EvalReport r;
    r.metric = j.at("metric").get<std::string>();
    r.tau = j.at("tau").get<double>();
    r.total = j.at("total").get<double>();
    r.total_correct = j.at("total_correct").get<int>();
    r.total_count = j.at("total_count").get<int>();
    for (const auto& a : j.at("joints")) {
        r.joints.push_back({a.at("name").get<std::string>(), a.at("correct").get<int>(), a.at("total").get<int>(),
                            a.at("accuracy").get<double>(), a.at("evaluated").get<bool>()});
    }
    for (const auto& s : j.value("error_stats", nlohmann::json::array())) {
        r.error_stats.push_back({s.at("name").get<std::string>(), s.at("count").get<int>(),
                                 s.at("mean_x_err").get<double>(), s.at("mean_y_err").get<double>(),
                                 s.at("var_x_err").get<double>(), s.at("var_y_err").get<double>()});
    }
    return r;
}

} // namespace ranet
