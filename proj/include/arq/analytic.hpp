// Closed-form probability and metric engine.
//
// For every protocol/scenario pair this module produces the noise-free
// decode probabilities (decode exactly at round m, decodable within the
// first m rounds), folds them through the noisy-feedback stop ladder into
// a StopDistribution, and derives throughputs, average power, feedback
// load and expected rounds.
//
// Long-Lc decode events reduce to gain thresholds: closed-form for basic
// and RTD, a monotone root (the accumulated-information threshold) for
// INR. Short-Lc RTD/INR probabilities are (m-1)-dimensional integrals over
// the gain quantile cube, evaluated by seeded quasi-random sequences or
// nested Gauss-Legendre quadrature; the innermost dimension is integrated
// analytically so the integrand is smooth.

#pragma once

#include <cstdint>

#include "arq/model.hpp"

namespace arq {

struct DeltaSolverSettings {
    double abs_tol = 1e-12;
    double rel_tol = 1e-10;
    double bracket_growth = 2.0;
    int max_iter = 200;
};

enum class IntegrationMethod { QuasiRandom, NestedQuadrature };

struct ShortLcIntegration {
    IntegrationMethod method = IntegrationMethod::QuasiRandom;
    uint64_t points = uint64_t{1} << 20;  // total evaluations across replicas
    uint64_t seed = 0;                    // quasi-random shift seed
    int replicas = 8;                     // randomized shifts for error estimates
    int quad_nodes = 64;                  // nodes per dimension for NestedQuadrature
};

struct AnalyticSettings {
    DeltaSolverSettings delta;
    ShortLcIntegration integration;
};

struct IntegralEstimate {
    double value = 0.0;
    double stderr_est = 0.0;  // 0 for closed forms and quadrature
};

// Unique gain solving sum_{n<=m} (1/R^(n) - 1/R^(n-1)) log(1 + g P_n) = 1.
double delta_m(const RatePolicy& rp, const PowerPolicy& pp, int m,
               const DeltaSolverSettings& settings = {});

// Noise-free probability that the data is decoded exactly at round m
// (and not before), for the configured protocol and scenario.
double pr_m(const ArqConfig& config, const PowerPolicy& pp, const RatePolicy& rp, int m,
            const AnalyticSettings& settings = {});

// Noise-free probability that the data is decodable within the first m rounds.
double pr_first_m(const ArqConfig& config, const PowerPolicy& pp, const RatePolicy& rp, int m,
                  const AnalyticSettings& settings = {});

// Same as pr_first_m but carries the quasi-random integration error estimate.
IntegralEstimate pr_first_m_estimate(const ArqConfig& config, const PowerPolicy& pp,
                                     const RatePolicy& rp, int m,
                                     const AnalyticSettings& settings = {});

// Stop-round distribution under feedback bit error probability p_b.
StopDistribution stop_distribution(const ArqConfig& config, const PowerPolicy& pp,
                                   const RatePolicy& rp, const AnalyticSettings& settings = {});

// (1 - outage) / sum_m Pr(A_m)/R^(m), in npcu.
double long_term_throughput(const StopDistribution& sd, const RatePolicy& rp);

// sum_m P_m (1/R^(m)-1/R^(m-1))(1 - sum_{n<m} Pr(A_n)) / sum_m Pr(A_m)/R^(m).
double avg_power(const StopDistribution& sd, const PowerPolicy& pp, const RatePolicy& rp);

// sum_m R^(m) Pr(S_m), in npcu.
double delay_limited_throughput(const StopDistribution& sd, const RatePolicy& rp);

// Expected feedback bits per packet: one bit after each of rounds 1..M,
// none after the final round.
double feedback_load(const StopDistribution& sd);

// Expected stop round, sum_m m Pr(A_m).
double expected_rounds(const StopDistribution& sd);

// Expected stop round computed through the not-yet-decodable decomposition
// (uniform power); an algebraically independent route used to cross-check
// expected_rounds and to compare protocols at equal initial rate.
double c_metric(const ArqConfig& config, const PowerPolicy& pp, const RatePolicy& rp,
                const AnalyticSettings& settings = {});

// Single-shot baseline R (1 - Pr(G < (e^R - 1)/P)).
double open_loop_throughput(const FadingDistribution& fading, double rate, double power);

// Convenience: stop distribution plus all derived metrics.
PerformanceReport analytic_report(const ArqConfig& config, const PowerPolicy& pp,
                                  const RatePolicy& rp, const AnalyticSettings& settings = {});
PerformanceReport derive_report(const StopDistribution& sd, const PowerPolicy& pp,
                                const RatePolicy& rp);

// Analysis-grade settings for a configuration: the default quasi-random
// rule in general, nested quadrature where its dimensionality limit allows
// (short-Lc with few rounds), since the smooth integrands converge much
// faster there.
AnalyticSettings analysis_settings(const ArqConfig& config);

}  // namespace arq
