#include "relaylab/stats.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace relaylab::stats {

namespace {

constexpr double kZ95 = 1.96;

double mean_of(const std::vector<double>& xs) {
    double s = 0.0;
    for (double x : xs) s += x;
    return s / static_cast<double>(xs.size());
}

double sample_variance(const std::vector<double>& xs, double m) {
    double s = 0.0;
    for (double x : xs) s += (x - m) * (x - m);
    return s / static_cast<double>(xs.size() - 1);
}

/// Continued fraction for the incomplete beta (Lentz's method).
double beta_cf(double a, double b, double x) {
    constexpr int kMaxIter = 500;
    constexpr double kEps = 1e-16;
    constexpr double kTiny = 1e-300;

    const double qab = a + b;
    const double qap = a + 1.0;
    const double qam = a - 1.0;
    double c = 1.0;
    double d = 1.0 - qab * x / qap;
    if (std::fabs(d) < kTiny) d = kTiny;
    d = 1.0 / d;
    double h = d;
    for (int m = 1; m <= kMaxIter; ++m) {
        const double m2 = 2.0 * m;
        double aa = m * (b - m) * x / ((qam + m2) * (a + m2));
        d = 1.0 + aa * d;
        if (std::fabs(d) < kTiny) d = kTiny;
        c = 1.0 + aa / c;
        if (std::fabs(c) < kTiny) c = kTiny;
        d = 1.0 / d;
        h *= d * c;
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
        d = 1.0 + aa * d;
        if (std::fabs(d) < kTiny) d = kTiny;
        c = 1.0 + aa / c;
        if (std::fabs(c) < kTiny) c = kTiny;
        d = 1.0 / d;
        const double del = d * c;
        h *= del;
        if (std::fabs(del - 1.0) < kEps) return h;
    }
    throw std::runtime_error("incomplete beta continued fraction did not converge");
}

}  // namespace

double regularized_incomplete_beta(double a, double b, double x) {
    if (!(a > 0.0) || !(b > 0.0)) throw std::invalid_argument("beta parameters must be positive");
    if (x < 0.0 || x > 1.0) throw std::invalid_argument("beta argument outside [0,1]");
    if (x == 0.0) return 0.0;
    if (x == 1.0) return 1.0;
    const double ln_front = std::lgamma(a + b) - std::lgamma(a) - std::lgamma(b) +
                            a * std::log(x) + b * std::log1p(-x);
    const double front = std::exp(ln_front);
    if (x < (a + 1.0) / (a + b + 2.0)) {
        return front * beta_cf(a, b, x) / a;
    }
    return 1.0 - front * beta_cf(b, a, 1.0 - x) / b;
}

double student_t_p_two_sided(double t, double df) {
    if (!(df > 0.0)) throw std::invalid_argument("df must be positive");
    if (std::isinf(t)) return 0.0;
    const double x = df / (df + t * t);
    return regularized_incomplete_beta(df / 2.0, 0.5, x);
}

double f_p_upper(double f, double d1, double d2) {
    if (!(d1 > 0.0) || !(d2 > 0.0)) throw std::invalid_argument("df must be positive");
    if (f <= 0.0) return 1.0;
    if (std::isinf(f)) return 0.0;
    const double x = d2 / (d2 + d1 * f);
    return regularized_incomplete_beta(d2 / 2.0, d1 / 2.0, x);
}

SampleSummary summarize(const std::vector<double>& xs) {
    if (xs.empty()) throw std::invalid_argument("summarize needs at least one value");
    SampleSummary s;
    s.n = xs.size();
    s.mean = mean_of(xs);
    if (xs.size() < 2) {
        s.sd = std::numeric_limits<double>::quiet_NaN();
        s.sem = std::numeric_limits<double>::quiet_NaN();
        s.ci_lo = std::numeric_limits<double>::quiet_NaN();
        s.ci_hi = std::numeric_limits<double>::quiet_NaN();
        s.ci_defined = false;
        return s;
    }
    s.sd = std::sqrt(sample_variance(xs, s.mean));
    s.sem = s.sd / std::sqrt(static_cast<double>(xs.size()));
    s.ci_lo = s.mean - kZ95 * s.sem;
    s.ci_hi = s.mean + kZ95 * s.sem;
    s.ci_defined = true;
    return s;
}

TTestResult one_sample_t(const std::vector<double>& xs, double mu0) {
    if (xs.size() < 2) throw std::invalid_argument("one_sample_t needs n >= 2");
    TTestResult r;
    const double m = mean_of(xs);
    const double var = sample_variance(xs, m);
    r.df = static_cast<double>(xs.size() - 1);
    if (var == 0.0) {
        if (m == mu0) {
            r.t = 0.0;
            r.p = 1.0;
        } else {
            r.t = m > mu0 ? std::numeric_limits<double>::infinity()
                          : -std::numeric_limits<double>::infinity();
            r.p = 0.0;
            r.degenerate = true;
        }
        return r;
    }
    r.t = (m - mu0) / std::sqrt(var / static_cast<double>(xs.size()));
    r.p = student_t_p_two_sided(r.t, r.df);
    return r;
}

TTestResult welch_t(const std::vector<double>& a, const std::vector<double>& b) {
    if (a.size() < 2 || b.size() < 2) throw std::invalid_argument("welch_t needs n >= 2 per sample");
    TTestResult r;
    const double ma = mean_of(a);
    const double mb = mean_of(b);
    const double va = sample_variance(a, ma);
    const double vb = sample_variance(b, mb);
    const double na = static_cast<double>(a.size());
    const double nb = static_cast<double>(b.size());
    const double se2 = va / na + vb / nb;
    if (se2 == 0.0) {
        r.df = na + nb - 2.0;
        if (ma == mb) {
            r.t = 0.0;
            r.p = 1.0;
        } else {
            r.t = ma > mb ? std::numeric_limits<double>::infinity()
                          : -std::numeric_limits<double>::infinity();
            r.p = 0.0;
            r.degenerate = true;
        }
        return r;
    }
    r.t = (ma - mb) / std::sqrt(se2);
    r.df = se2 * se2 /
           ((va / na) * (va / na) / (na - 1.0) + (vb / nb) * (vb / nb) / (nb - 1.0));
    r.p = student_t_p_two_sided(r.t, r.df);
    return r;
}

AnovaResult one_way_anova(const std::vector<std::vector<double>>& groups) {
    if (groups.size() < 2) throw std::invalid_argument("one_way_anova needs k >= 2 groups");
    std::size_t n_total = 0;
    double grand_sum = 0.0;
    for (const auto& g : groups) {
        if (g.empty()) throw std::invalid_argument("one_way_anova: empty group");
        n_total += g.size();
        for (double x : g) grand_sum += x;
    }
    if (n_total <= groups.size()) throw std::invalid_argument("one_way_anova: no within-group df");
    const double grand_mean = grand_sum / static_cast<double>(n_total);
    double ssb = 0.0;
    double ssw = 0.0;
    for (const auto& g : groups) {
        const double m = mean_of(g);
        ssb += static_cast<double>(g.size()) * (m - grand_mean) * (m - grand_mean);
        for (double x : g) ssw += (x - m) * (x - m);
    }
    AnovaResult r;
    r.df_between = static_cast<double>(groups.size() - 1);
    r.df_within = static_cast<double>(n_total - groups.size());
    if (ssw == 0.0) {
        r.f = ssb == 0.0 ? 0.0 : std::numeric_limits<double>::infinity();
        r.p = ssb == 0.0 ? 1.0 : 0.0;
        return r;
    }
    r.f = (ssb / r.df_between) / (ssw / r.df_within);
    r.p = f_p_upper(r.f, r.df_between, r.df_within);
    return r;
}

double cohens_d(const std::vector<double>& a, const std::vector<double>& b) {
    if (a.size() < 2 || b.size() < 2) throw std::invalid_argument("cohens_d needs n >= 2 per sample");
    const double ma = mean_of(a);
    const double mb = mean_of(b);
    const double va = sample_variance(a, ma);
    const double vb = sample_variance(b, mb);
    const double na = static_cast<double>(a.size());
    const double nb = static_cast<double>(b.size());
    const double pooled = std::sqrt(((na - 1.0) * va + (nb - 1.0) * vb) / (na + nb - 2.0));
    if (pooled == 0.0) {
        if (ma == mb) return 0.0;
        return ma > mb ? std::numeric_limits<double>::infinity()
                       : -std::numeric_limits<double>::infinity();
    }
    return (ma - mb) / pooled;
}

double cohens_d(const std::vector<double>& xs, double mu0) {
    if (xs.size() < 2) throw std::invalid_argument("cohens_d needs n >= 2");
    const double m = mean_of(xs);
    const double sd = std::sqrt(sample_variance(xs, m));
    if (sd == 0.0) {
        if (m == mu0) return 0.0;
        return m > mu0 ? std::numeric_limits<double>::infinity()
                       : -std::numeric_limits<double>::infinity();
    }
    return (m - mu0) / sd;
}

PreservationCell preservation_rate(const std::string& source_label,
                                   const std::vector<std::optional<std::string>>& classified) {
    PreservationCell cell;
    cell.n_total = classified.size();
    std::size_t matched = 0;
    for (const auto& c : classified) {
        if (!c.has_value()) continue;
        ++cell.n_valid;
        if (*c == source_label) ++matched;
    }
    cell.rate = cell.n_valid == 0 ? 0.0
                                  : static_cast<double>(matched) / static_cast<double>(cell.n_valid);
    return cell;
}

TransitionMatrix transition_matrix(
    const std::vector<std::string>& labels,
    const std::map<std::string, std::vector<std::optional<std::string>>>& classified_by_source) {
    TransitionMatrix m;
    m.labels = labels;
    m.rows.assign(labels.size(), std::vector<double>(labels.size(), 0.0));
    m.row_valid.assign(labels.size(), false);
    m.row_counts.assign(labels.size(), 0);
    for (std::size_t i = 0; i < labels.size(); ++i) {
        auto it = classified_by_source.find(labels[i]);
        if (it == classified_by_source.end()) continue;
        std::vector<std::size_t> counts(labels.size(), 0);
        std::size_t valid = 0;
        for (const auto& c : it->second) {
            if (!c.has_value()) continue;
            auto pos = std::find(labels.begin(), labels.end(), *c);
            if (pos == labels.end()) continue;
            ++counts[static_cast<std::size_t>(pos - labels.begin())];
            ++valid;
        }
        m.row_counts[i] = valid;
        if (valid == 0) continue;
        m.row_valid[i] = true;
        for (std::size_t j = 0; j < labels.size(); ++j) {
            m.rows[i][j] = static_cast<double>(counts[j]) / static_cast<double>(valid);
        }
    }
    return m;
}

DriftResult valence_drift(const std::vector<std::optional<double>>& at_t0,
                          const std::vector<std::optional<double>>& at_t1) {
    std::vector<double> a;
    std::vector<double> b;
    for (const auto& v : at_t0) {
        if (v.has_value()) a.push_back(*v);
    }
    for (const auto& v : at_t1) {
        if (v.has_value()) b.push_back(*v);
    }
    if (a.empty() || b.empty()) throw std::invalid_argument("valence_drift: no valid values");
    DriftResult r;
    r.mean_t0 = mean_of(a);
    r.mean_t1 = mean_of(b);
    r.drift = r.mean_t1 - r.mean_t0;
    if (a.size() >= 2 && b.size() >= 2) {
        r.test = welch_t(b, a);
    } else {
        r.test.t = std::numeric_limits<double>::quiet_NaN();
        r.test.df = 0.0;
        r.test.p = std::numeric_limits<double>::quiet_NaN();
        r.test.degenerate = true;
    }
    return r;
}

ReductionResult range_and_variance_reduction(const std::vector<std::pair<double, double>>& series) {
    if (series.size() < 2) throw std::invalid_argument("need at least two series");
    std::vector<double> starts;
    std::vector<double> ends;
    starts.reserve(series.size());
    ends.reserve(series.size());
    for (const auto& [s, e] : series) {
        starts.push_back(s);
        ends.push_back(e);
    }
    ReductionResult r;
    const auto [min_s, max_s] = std::minmax_element(starts.begin(), starts.end());
    const auto [min_e, max_e] = std::minmax_element(ends.begin(), ends.end());
    r.range_start = *max_s - *min_s;
    r.range_end = *max_e - *min_e;
    r.range_reduction_pct =
        r.range_start == 0.0 ? 0.0 : 100.0 * (r.range_start - r.range_end) / r.range_start;
    r.variance_start = sample_variance(starts, mean_of(starts));
    r.variance_end = sample_variance(ends, mean_of(ends));
    r.variance_reduction_pct =
        r.variance_start == 0.0
            ? 0.0
            : 100.0 * (r.variance_start - r.variance_end) / r.variance_start;
    return r;
}

}  // namespace relaylab::stats
