#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include "madsel/error.hpp"

namespace madsel {

/// Classifier scores split by ground truth. Polarity: higher = more morph-like.
struct ScoreSet {
    std::vector<double> bonafide;
    std::vector<double> attack;
};

/// Share of attacks classified bona fide at threshold t (score < t).
inline double apcer(const ScoreSet& s, double threshold) {
    if (s.attack.empty()) throw ArgumentError("APCER needs attack scores");
    const auto below = std::count_if(s.attack.begin(), s.attack.end(), [&](double v) { return v < threshold; });
    return static_cast<double>(below) / static_cast<double>(s.attack.size());
}

/// Share of bona fides classified morph at threshold t (score >= t).
inline double bpcer(const ScoreSet& s, double threshold) {
    if (s.bonafide.empty()) throw ArgumentError("BPCER needs bona fide scores");
    const auto above =
        std::count_if(s.bonafide.begin(), s.bonafide.end(), [&](double v) { return v >= threshold; });
    return static_cast<double>(above) / static_cast<double>(s.bonafide.size());
}

struct DetPoint {
    double threshold;
    double apcer;
    double bpcer;
};

/// Every distinct pooled score plus -inf and +inf, ascending. Both error rates
/// are step functions that only change at pooled scores, so this set reaches
/// every attainable (APCER, BPCER) pair.
inline std::vector<double> candidate_thresholds(const ScoreSet& s) {
    std::vector<double> t;
    t.reserve(s.bonafide.size() + s.attack.size() + 2);
    t.push_back(-std::numeric_limits<double>::infinity());
    t.insert(t.end(), s.bonafide.begin(), s.bonafide.end());
    t.insert(t.end(), s.attack.begin(), s.attack.end());
    t.push_back(std::numeric_limits<double>::infinity());
    std::sort(t.begin(), t.end());
    t.erase(std::unique(t.begin(), t.end()), t.end());
    return t;
}

namespace detail {
inline void require_both(const ScoreSet& s) {
    if (s.bonafide.empty() || s.attack.empty()) throw ArgumentError("score set needs both classes");
    for (double v : s.bonafide)
        if (std::isnan(v)) throw ArgumentError("NaN score");
    for (double v : s.attack)
        if (std::isnan(v)) throw ArgumentError("NaN score");
}
}  // namespace detail

/// One point per candidate threshold in ascending threshold order. APCER rises
/// and BPCER falls along the curve; it starts at (0, 1) and ends at (1, 0).
inline std::vector<DetPoint> det_curve(const ScoreSet& s) {
    detail::require_both(s);
    std::vector<double> bona = s.bonafide, att = s.attack;
    std::sort(bona.begin(), bona.end());
    std::sort(att.begin(), att.end());
    const double nb = static_cast<double>(bona.size()), na = static_cast<double>(att.size());
    std::vector<DetPoint> out;
    for (double t : candidate_thresholds(s)) {
        const auto attack_below = std::lower_bound(att.begin(), att.end(), t) - att.begin();
        const auto bona_below = std::lower_bound(bona.begin(), bona.end(), t) - bona.begin();
        out.push_back({t, static_cast<double>(attack_below) / na, (nb - static_cast<double>(bona_below)) / nb});
    }
    return out;
}

/// Detection equal error rate: (APCER + BPCER) / 2 at the candidate threshold
/// minimising |APCER - BPCER|; the lowest such threshold wins ties.
inline double d_eer(const ScoreSet& s) {
    const auto curve = det_curve(s);
    const DetPoint* best = &curve.front();
    for (const auto& p : curve)
        if (std::abs(p.apcer - p.bpcer) < std::abs(best->apcer - best->bpcer)) best = &p;
    return (best->apcer + best->bpcer) / 2.0;
}

/// Lowest BPCER among thresholds whose APCER does not exceed the target
/// (BPCER10: target 0.10, BPCER20: target 0.05). APCER rises with the
/// threshold, so this is the BPCER at the largest admissible threshold.
inline double bpcer_at(const ScoreSet& s, double apcer_target) {
    const auto curve = det_curve(s);
    double best = 1.0;
    for (const auto& p : curve)
        if (p.apcer <= apcer_target) best = std::min(best, p.bpcer);
    return best;
}

inline double bpcer10(const ScoreSet& s) { return bpcer_at(s, 0.10); }
inline double bpcer20(const ScoreSet& s) { return bpcer_at(s, 0.05); }

}  // namespace madsel
