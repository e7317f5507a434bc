#pragma once

#include <span>
#include <string>
#include <utility>
#include <vector>

#include "tgan/data.hpp"
#include "tgan/gan.hpp"

namespace tgan::eval {

// Small dense classifier used in place of Inception-v3 for scoring.
struct Classifier {
    gan::DenseLayer l1, l2;
    std::size_t dim = 0;
    std::size_t num_classes = 0;
    bool trained = false;
    double train_accuracy = 0.0;

    // p(y|x) rows for n samples of width dim.
    std::vector<double> predict_probs(std::span<const double> samples, std::size_t n) const;
    std::vector<std::size_t> predict(std::span<const double> samples, std::size_t n) const;
    std::string digest() const;
    std::vector<std::pair<std::string, Tensor>> named() const;
};

struct ClassifierConfig {
    std::size_t hidden = 64;
    std::size_t steps = 4000;
    std::size_t batch = 64;
    double lr = 1e-3;
    double target_accuracy = 0.97;
};

// Trains on the full real split; Error if target accuracy is not reached.
Classifier train_classifier(const data::Dataset& ds, const ClassifierConfig& cfg, Rng& rng);

struct ModeCoverage {
    std::size_t modes_recovered = 0;
    double high_quality_fraction = 0.0;
};

// A sample is high-quality when within threshold_sigma * stddev of some
// center; a mode counts as recovered when at least n/(10k) high-quality
// samples are nearest to it.
ModeCoverage mode_coverage(std::span<const double> samples, std::size_t n,
                           std::span<const double> centers, std::size_t k, double stddev,
                           double threshold_sigma = 3.0);

// exp(mean KL(p(y|x) || p(y))) per split; returns (mean, std) over splits.
std::pair<double, double> proxy_inception_score(std::span<const double> samples,
                                                std::size_t n, const Classifier& clf,
                                                std::size_t splits);

double conditional_accuracy(std::span<const double> samples, std::size_t n,
                            const std::vector<std::size_t>& requested,
                            const Classifier& clf);

// Mean of the final tail_fraction of the series.
double loss_equilibrium(std::span<const double> d_loss_series, double tail_fraction);

struct EvalReport {
    std::size_t modes_recovered = 0;
    double high_quality_fraction = 0.0;
    double proxy_is_mean = 1.0;
    double proxy_is_std = 0.0;
    double conditional_accuracy = 0.0;
    double d_loss_tail_mean = 0.0;
    std::string classifier_digest;

    void validate() const;
};

std::string report_csv_header();
std::string report_csv_row(const EvalReport& r, const std::string& name);
std::string report_text(const EvalReport& r, const std::string& name);

}  // namespace tgan::eval
