#pragma once

#include <algorithm>
#include <cstdint>
#include <fstream>
#include <numeric>
#include <string>
#include <vector>

#include "cfad/errors.hpp"

namespace cfad {

struct ConfusionCounts {
    long tp = 0, fp = 0, tn = 0, fn = 0;
    long total() const { return tp + fp + tn + fn; }
    double recall() const { return tp + fn ? static_cast<double>(tp) / (tp + fn) : 0.0; }
    double false_alarm() const { return fp + tn ? static_cast<double>(fp) / (fp + tn) : 0.0; }
};

/// Pooled thresholded counts; score > thr means declared active.
inline ConfusionCounts confusion(const std::vector<double>& scores,
                                 const std::vector<std::uint8_t>& truth, double thr) {
    if (scores.size() != truth.size())
        throw std::invalid_argument("confusion: score/truth length mismatch");
    ConfusionCounts c;
    for (std::size_t i = 0; i < scores.size(); ++i) {
        const bool declared = scores[i] > thr;
        if (truth[i]) {
            declared ? ++c.tp : ++c.fn;
        } else {
            declared ? ++c.fp : ++c.tn;
        }
    }
    return c;
}

struct RocPoint {
    double threshold;
    double fa;
    double recall;
};

struct RocCurve {
    std::vector<RocPoint> points;  // descending threshold: (0,0) ... (1,1)
    double auc = 0.0;
};

/// Full ROC with thresholds at all distinct score values and a
/// trapezoidal AUC. Tied scores flip together at their common
/// threshold, which gives the midpoint tie convention in the AUC.
inline RocCurve roc_sweep(const std::vector<double>& scores,
                          const std::vector<std::uint8_t>& truths) {
    if (scores.size() != truths.size())
        throw std::invalid_argument("roc_sweep: score/truth length mismatch");
    long pos = 0, neg = 0;
    for (auto t : truths) t ? ++pos : ++neg;
    if (pos == 0 || neg == 0)
        throw NumericError("roc_sweep: need at least one positive and one negative label");

    std::vector<std::size_t> order(scores.size());
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(),
              [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });

    RocCurve curve;
    long tp = 0, fp = 0;
    std::size_t i = 0;
    while (i < order.size()) {
        const double s = scores[order[i]];
        // counts BEFORE this tie group correspond to threshold == s (strict >)
        curve.points.push_back({s, static_cast<double>(fp) / neg, static_cast<double>(tp) / pos});
        while (i < order.size() && scores[order[i]] == s) {
            truths[order[i]] ? ++tp : ++fp;
            ++i;
        }
    }
    const double min_score = scores[order.back()];
    curve.points.push_back({min_score - 1.0, 1.0, 1.0});

    double auc = 0.0;
    for (std::size_t j = 0; j + 1 < curve.points.size(); ++j) {
        const auto& p0 = curve.points[j];
        const auto& p1 = curve.points[j + 1];
        auc += (p1.fa - p0.fa) * (p0.recall + p1.recall) * 0.5;
    }
    curve.auc = auc;
    return curve;
}

struct CalibratedThreshold {
    double threshold;
    double achieved_fa;
    bool saturated = false;  // target below the smallest achievable FA
};

/// Smallest threshold whose empirical FA does not exceed the target.
inline CalibratedThreshold threshold_for_fa(const RocCurve& curve, double target_fa) {
    if (curve.points.empty()) throw NumericError("threshold_for_fa: empty curve");
    // points are in descending-threshold order; scan from the bottom up
    for (auto it = curve.points.rbegin(); it != curve.points.rend(); ++it)
        if (it->fa <= target_fa) return {it->threshold, it->fa, false};
    const auto& top = curve.points.front();
    return {top.threshold, top.fa, true};
}

/// CSV schema: header `threshold,fa,recall`, rows, then `# auc=<value>`.
inline void write_roc_csv(std::ostream& os, const RocCurve& curve) {
    os << "threshold,fa,recall\n";
    os.precision(12);
    for (const auto& p : curve.points)
        os << p.threshold << ',' << p.fa << ',' << p.recall << '\n';
    os << "# auc=" << curve.auc << '\n';
}

inline void write_roc_csv(const std::string& path, const RocCurve& curve) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw FormatError("cannot open '" + path + "' for writing");
    write_roc_csv(os, curve);
}

}  // namespace cfad
