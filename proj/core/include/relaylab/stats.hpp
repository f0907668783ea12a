#pragma once

#include <cstddef>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace relaylab::stats {

/// Descriptive summary. sd uses the n-1 denominator; ci95 is
/// mean +/- 1.96 * sem. With a single observation sd/sem/ci are undefined and
/// ci_defined is false.
struct SampleSummary {
    std::size_t n = 0;
    double mean = 0.0;
    double sd = 0.0;
    double sem = 0.0;
    double ci_lo = 0.0;
    double ci_hi = 0.0;
    bool ci_defined = false;
};

SampleSummary summarize(const std::vector<double>& xs);

struct TTestResult {
    double t = 0.0;
    double df = 0.0;
    double p = 1.0;
    /// Set when the test statistic is degenerate (zero variance against a
    /// different mean gives an infinite t and p = 0).
    bool degenerate = false;
};

TTestResult one_sample_t(const std::vector<double>& xs, double mu0);
TTestResult welch_t(const std::vector<double>& a, const std::vector<double>& b);

struct AnovaResult {
    double f = 0.0;
    double df_between = 0.0;
    double df_within = 0.0;
    double p = 1.0;
};

AnovaResult one_way_anova(const std::vector<std::vector<double>>& groups);

/// Two-sample d uses the pooled standard deviation; one-sample d divides by
/// the sample standard deviation.
double cohens_d(const std::vector<double>& a, const std::vector<double>& b);
double cohens_d(const std::vector<double>& xs, double mu0);

/// Regularized incomplete beta I_x(a, b), continued-fraction evaluation.
/// Accurate to better than 1e-10 over the tested parameter range.
double regularized_incomplete_beta(double a, double b, double x);

/// Two-sided p for a Student t statistic with (possibly fractional) df.
double student_t_p_two_sided(double t, double df);

/// Upper-tail p for an F statistic with d1 and d2 degrees of freedom.
double f_p_upper(double f, double d1, double d2);

/// Fraction of runs whose classified label at time t matches the source
/// label, over runs with a valid classification at t.
struct PreservationCell {
    double rate = 0.0;
    std::size_t n_valid = 0;
    std::size_t n_total = 0;
};

PreservationCell preservation_rate(const std::string& source_label,
                                   const std::vector<std::optional<std::string>>& classified);

/// Row-stochastic transition matrix between labels. Rows with no valid
/// classification are flagged invalid rather than zero-filled.
struct TransitionMatrix {
    std::vector<std::string> labels;
    std::vector<std::vector<double>> rows;
    std::vector<bool> row_valid;
    std::vector<std::size_t> row_counts;
};

TransitionMatrix transition_matrix(
    const std::vector<std::string>& labels,
    const std::map<std::string, std::vector<std::optional<std::string>>>& classified_by_source);

/// Mean valence change from t0 to t1 with a Welch test across the two
/// independent sets of runs. Missing values are excluded pairwise.
struct DriftResult {
    double mean_t0 = 0.0;
    double mean_t1 = 0.0;
    double drift = 0.0;
    TTestResult test;
};

DriftResult valence_drift(const std::vector<std::optional<double>>& at_t0,
                          const std::vector<std::optional<double>>& at_t1);

/// Range and variance contraction between the first and last column of a set
/// of per-series (start, end) values. A zero start range or variance yields a
/// 0% reduction rather than a division error.
struct ReductionResult {
    double range_start = 0.0;
    double range_end = 0.0;
    double range_reduction_pct = 0.0;
    double variance_start = 0.0;
    double variance_end = 0.0;
    double variance_reduction_pct = 0.0;
};

ReductionResult range_and_variance_reduction(const std::vector<std::pair<double, double>>& series);

}  // namespace relaylab::stats
