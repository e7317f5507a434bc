#include "tgan/eval.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>

namespace tgan::eval {

std::vector<double> Classifier::predict_probs(std::span<const double> samples,
                                              std::size_t n) const {
    if (!trained) throw ContractError("classifier: not trained");
    if (samples.size() != n * dim) {
        throw ShapeError("classifier: " + std::to_string(samples.size()) +
                         " values for " + std::to_string(n) + " rows of width " +
                         std::to_string(dim));
    }
    if (n == 0) return {};
    Graph g(/*record=*/false);
    auto x = Tensor::from_data({n, dim}, {samples.begin(), samples.end()});
    auto h = g.dense(x, l1.W, l1.b, Activation::leaky_relu(0.2));
    auto probs = g.softmax(g.dense(h, l2.W, l2.b, Activation::identity()));
    return {probs.values().begin(), probs.values().end()};
}

std::vector<std::size_t> Classifier::predict(std::span<const double> samples,
                                             std::size_t n) const {
    const auto probs = predict_probs(samples, n);
    std::vector<std::size_t> out(n);
    for (std::size_t i = 0; i < n; ++i) {
        const double* row = probs.data() + i * num_classes;
        out[i] = static_cast<std::size_t>(
            std::max_element(row, row + num_classes) - row);
    }
    return out;
}

std::vector<std::pair<std::string, Tensor>> Classifier::named() const {
    return {{"clf.l1.W", l1.W}, {"clf.l1.b", l1.b}, {"clf.l2.W", l2.W}, {"clf.l2.b", l2.b}};
}

std::string Classifier::digest() const { return gan::params_digest(named()); }

Classifier train_classifier(const data::Dataset& ds, const ClassifierConfig& cfg, Rng& rng) {
    ds.validate();
    Classifier clf;
    clf.dim = ds.dim;
    clf.num_classes = ds.num_classes;
    auto init_rng = rng.split(0);
    clf.l1 = gan::DenseLayer::init(ds.dim, cfg.hidden, init_rng);
    clf.l2 = gan::DenseLayer::init(cfg.hidden, ds.num_classes, init_rng);

    optim::AdamConfig acfg;
    acfg.lr = cfg.lr;
    acfg.beta1 = 0.9;
    optim::Adam opt({clf.l1.W, clf.l1.b, clf.l2.W, clf.l2.b}, acfg);

    const std::size_t batch = std::min(cfg.batch, ds.size());
    // No early stopping: accuracy saturates quickly but the posteriors keep
    // sharpening, and the inception-score proxy needs confident posteriors.
    for (std::size_t step = 0; step < cfg.steps; ++step) {
        auto step_rng = rng.split(step + 1);
        std::vector<double> xb(batch * ds.dim);
        std::vector<std::size_t> yb(batch);
        for (std::size_t i = 0; i < batch; ++i) {
            const std::size_t idx = step_rng.next_u64() % ds.size();
            auto r = ds.row(idx);
            std::copy(r.begin(), r.end(), xb.begin() + i * ds.dim);
            yb[i] = ds.labels[idx];
        }
        Graph g;
        auto x = Tensor::from_data({batch, ds.dim}, std::move(xb));
        auto h = g.dense(x, clf.l1.W, clf.l1.b, Activation::leaky_relu(0.2));
        auto probs = g.softmax(g.dense(h, clf.l2.W, clf.l2.b, Activation::identity()));
        auto loss = gan::nll_true_class(g, probs, yb);
        opt.zero_grad();
        g.backward(loss);
        opt.step();
    }
    clf.trained = true;
    const auto pred = clf.predict(ds.samples, ds.size());
    std::size_t hits = 0;
    for (std::size_t i = 0; i < ds.size(); ++i) hits += pred[i] == ds.labels[i];
    const double accuracy = static_cast<double>(hits) / static_cast<double>(ds.size());
    if (accuracy < cfg.target_accuracy) {
        clf.trained = false;
        throw Error("proxy classifier reached only " + std::to_string(accuracy) +
                    " training accuracy, target " + std::to_string(cfg.target_accuracy));
    }
    clf.train_accuracy = accuracy;
    return clf;
}

ModeCoverage mode_coverage(std::span<const double> samples, std::size_t n,
                           std::span<const double> centers, std::size_t k, double stddev,
                           double threshold_sigma) {
    if (k < 1) throw DomainError("mode coverage: need at least one center");
    if (samples.size() != 2 * n || centers.size() != 2 * k) {
        throw ShapeError("mode coverage: expected 2-D samples and centers");
    }
    const double r2 = threshold_sigma * stddev * threshold_sigma * stddev;
    std::vector<std::size_t> per_mode(k, 0);
    std::size_t high_quality = 0;
    for (std::size_t i = 0; i < n; ++i) {
        const double x = samples[2 * i], y = samples[2 * i + 1];
        double best = -1.0;
        std::size_t best_mode = 0;
        for (std::size_t j = 0; j < k; ++j) {
            const double dx = x - centers[2 * j], dy = y - centers[2 * j + 1];
            const double d2 = dx * dx + dy * dy;
            if (best < 0.0 || d2 < best) {
                best = d2;
                best_mode = j;
            }
        }
        if (best <= r2) {
            ++high_quality;
            ++per_mode[best_mode];
        }
    }
    const double need = static_cast<double>(n) / (10.0 * static_cast<double>(k));
    ModeCoverage mc;
    for (auto c : per_mode) {
        if (static_cast<double>(c) >= need) ++mc.modes_recovered;
    }
    mc.high_quality_fraction = n ? static_cast<double>(high_quality) / static_cast<double>(n) : 0.0;
    return mc;
}

std::pair<double, double> proxy_inception_score(std::span<const double> samples,
                                                std::size_t n, const Classifier& clf,
                                                std::size_t splits) {
    if (!clf.trained) throw ContractError("proxy inception score: classifier not trained");
    if (splits < 1) throw DomainError("proxy inception score: splits must be >= 1");
    if (n < splits) throw DomainError("proxy inception score: fewer samples than splits");
    const std::size_t C = clf.num_classes;
    const auto probs = clf.predict_probs(samples, n);

    std::vector<double> scores(splits);
    for (std::size_t s = 0; s < splits; ++s) {
        const std::size_t lo = s * n / splits, hi = (s + 1) * n / splits;
        const std::size_t m = hi - lo;
        std::vector<double> marginal(C, 0.0);
        for (std::size_t i = lo; i < hi; ++i)
            for (std::size_t c = 0; c < C; ++c) marginal[c] += probs[i * C + c];
        for (auto& v : marginal) v /= static_cast<double>(m);
        double mean_kl = 0.0;
        for (std::size_t i = lo; i < hi; ++i) {
            double kl = 0.0;
            for (std::size_t c = 0; c < C; ++c) {
                const double p = probs[i * C + c];
                if (p > 0.0) kl += p * std::log(p / std::max(marginal[c], 1e-300));
            }
            mean_kl += kl;
        }
        mean_kl /= static_cast<double>(m);
        scores[s] = std::exp(std::max(mean_kl, 0.0));
    }
    double mean = 0.0;
    for (double v : scores) mean += v;
    mean /= static_cast<double>(splits);
    double var = 0.0;
    for (double v : scores) var += (v - mean) * (v - mean);
    var /= static_cast<double>(splits);
    return {mean, std::sqrt(var)};
}

double conditional_accuracy(std::span<const double> samples, std::size_t n,
                            const std::vector<std::size_t>& requested,
                            const Classifier& clf) {
    if (n == 0) throw ContractError("conditional accuracy: empty sample set");
    if (requested.size() != n) {
        throw ShapeError("conditional accuracy: " + std::to_string(requested.size()) +
                         " requested labels for " + std::to_string(n) + " samples");
    }
    const auto pred = clf.predict(samples, n);
    std::size_t hits = 0;
    for (std::size_t i = 0; i < n; ++i) hits += pred[i] == requested[i];
    return static_cast<double>(hits) / static_cast<double>(n);
}

double loss_equilibrium(std::span<const double> d_loss_series, double tail_fraction) {
    if (d_loss_series.size() < 10) {
        throw DomainError("loss equilibrium: need at least 10 entries, got " +
                          std::to_string(d_loss_series.size()));
    }
    if (!(tail_fraction > 0.0 && tail_fraction <= 1.0)) {
        throw DomainError("loss equilibrium: tail fraction must be in (0, 1]");
    }
    const std::size_t n = d_loss_series.size();
    std::size_t tail = static_cast<std::size_t>(
        std::ceil(tail_fraction * static_cast<double>(n)));
    tail = std::clamp<std::size_t>(tail, 1, n);
    double sum = 0.0;
    for (std::size_t i = n - tail; i < n; ++i) sum += d_loss_series[i];
    return sum / static_cast<double>(tail);
}

void EvalReport::validate() const {
    auto ratio = [](double v) { return v >= 0.0 && v <= 1.0; };
    if (!ratio(high_quality_fraction) || !ratio(conditional_accuracy)) {
        throw ContractError("eval report: ratio outside [0, 1]");
    }
    if (proxy_is_mean < 1.0 - 1e-9) {
        throw ContractError("eval report: proxy inception score below 1");
    }
}

std::string report_csv_header() {
    return "name,modes_recovered,high_quality_fraction,proxy_is_mean,proxy_is_std,"
           "conditional_accuracy,d_loss_tail_mean,classifier_digest";
}

std::string report_csv_row(const EvalReport& r, const std::string& name) {
    char buf[256];
    std::snprintf(buf, sizeof(buf), "%s,%zu,%.9g,%.9g,%.9g,%.9g,%.9g,%s", name.c_str(),
                  r.modes_recovered, r.high_quality_fraction, r.proxy_is_mean,
                  r.proxy_is_std, r.conditional_accuracy, r.d_loss_tail_mean,
                  r.classifier_digest.c_str());
    return buf;
}

std::string report_text(const EvalReport& r, const std::string& name) {
    std::ostringstream os;
    os << "evaluation: " << name << "\n"
       << "  modes recovered        " << r.modes_recovered << "\n"
       << "  high-quality fraction  " << r.high_quality_fraction << "\n"
       << "  proxy inception score  " << r.proxy_is_mean << " +- " << r.proxy_is_std << "\n"
       << "  conditional accuracy   " << r.conditional_accuracy << "\n"
       << "  d-loss tail mean       " << r.d_loss_tail_mean << "\n"
       << "  classifier digest      " << r.classifier_digest << "\n";
    return os.str();
}

}  // namespace tgan::eval
