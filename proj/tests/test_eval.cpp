#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numbers>

#include "tgan/eval.hpp"

using namespace tgan;
using namespace tgan::eval;

namespace {

// Hand-built classifier with fixed weights; bypasses training.
Classifier fixed_classifier(std::size_t dim, std::size_t classes,
                            std::vector<double> w1, std::vector<double> b1,
                            std::vector<double> w2, std::vector<double> b2,
                            std::size_t hidden) {
    Classifier clf;
    clf.dim = dim;
    clf.num_classes = classes;
    clf.l1 = {Tensor::from_data({dim, hidden}, std::move(w1), true),
              Tensor::from_data({hidden}, std::move(b1), true)};
    clf.l2 = {Tensor::from_data({hidden, classes}, std::move(w2), true),
              Tensor::from_data({classes}, std::move(b2), true)};
    clf.trained = true;
    return clf;
}

Classifier uniform_classifier(std::size_t dim, std::size_t classes) {
    return fixed_classifier(dim, classes, std::vector<double>(dim * 2, 0.0),
                            std::vector<double>(2, 0.0),
                            std::vector<double>(2 * classes, 0.0),
                            std::vector<double>(classes, 0.0), 2);
}

}  // namespace

TEST_CASE("mode coverage: all centers hit equally") {
    std::vector<double> centers = {0.5, 0.0, -0.5, 0.0, 0.0, 0.5};
    std::vector<double> samples;
    for (int rep = 0; rep < 30; ++rep) {
        for (std::size_t j = 0; j < 3; ++j) {
            samples.push_back(centers[2 * j]);
            samples.push_back(centers[2 * j + 1]);
        }
    }
    auto mc = mode_coverage(samples, 90, centers, 3, 0.02, 3.0);
    CHECK(mc.modes_recovered == 3);
    CHECK(mc.high_quality_fraction == doctest::Approx(1.0));
}

TEST_CASE("mode coverage: full collapse counts a single mode") {
    std::vector<double> centers = {0.5, 0.0, -0.5, 0.0};
    std::vector<double> samples;
    for (int rep = 0; rep < 50; ++rep) {
        samples.push_back(0.5);
        samples.push_back(0.0);
    }
    auto mc = mode_coverage(samples, 50, centers, 2, 0.02, 3.0);
    CHECK(mc.modes_recovered == 1);
    CHECK(mc.high_quality_fraction == doctest::Approx(1.0));
}

TEST_CASE("mode coverage: uniform noise matches the disc area ratio") {
    // high-quality discs of radius 3*std around 8 ring centers; uniform
    // samples over [-1,1]^2 land inside with probability (total disc area)/4
    const std::size_t k = 8;
    std::vector<double> centers(2 * k);
    for (std::size_t j = 0; j < k; ++j) {
        const double a = 2.0 * std::numbers::pi * static_cast<double>(j) / 8.0;
        centers[2 * j] = 0.7 * std::cos(a);
        centers[2 * j + 1] = 0.7 * std::sin(a);
    }
    const double stddev = 0.02;
    Rng rng(31);
    const std::size_t n = 200000;
    std::vector<double> samples(2 * n);
    for (auto& v : samples) v = 2.0 * rng.uniform01() - 1.0;
    auto mc = mode_coverage(samples, n, centers, k, stddev, 3.0);
    const double r = 3.0 * stddev;
    const double expected = static_cast<double>(k) * std::numbers::pi * r * r / 4.0;
    CHECK(mc.high_quality_fraction ==
          doctest::Approx(expected).epsilon(0.15));  // Monte-Carlo slack
}

TEST_CASE("mode coverage is permutation invariant") {
    Rng rng(5);
    std::vector<double> centers = {0.3, 0.3, -0.4, 0.2, 0.1, -0.5};
    std::vector<double> samples(2 * 300);
    for (auto& v : samples) v = 2.0 * rng.uniform01() - 1.0;
    auto base = mode_coverage(samples, 300, centers, 3, 0.1, 3.0);

    // permute samples
    std::vector<double> shuffled = samples;
    Rng perm(9);
    for (std::size_t i = 300; i > 1; --i) {
        const std::size_t j = perm.next_u64() % i;
        std::swap(shuffled[2 * (i - 1)], shuffled[2 * j]);
        std::swap(shuffled[2 * (i - 1) + 1], shuffled[2 * j + 1]);
    }
    auto after_samples = mode_coverage(shuffled, 300, centers, 3, 0.1, 3.0);
    CHECK(after_samples.modes_recovered == base.modes_recovered);
    CHECK(after_samples.high_quality_fraction ==
          doctest::Approx(base.high_quality_fraction));

    // permute centers
    std::vector<double> centers_perm = {0.1, -0.5, 0.3, 0.3, -0.4, 0.2};
    auto after_centers = mode_coverage(samples, 300, centers_perm, 3, 0.1, 3.0);
    CHECK(after_centers.modes_recovered == base.modes_recovered);
    CHECK(after_centers.high_quality_fraction ==
          doctest::Approx(base.high_quality_fraction));
}

TEST_CASE("proxy inception score: uniform posterior gives exactly 1") {
    auto clf = uniform_classifier(2, 4);
    Rng rng(3);
    std::vector<double> samples(2 * 100);
    for (auto& v : samples) v = 2.0 * rng.uniform01() - 1.0;
    auto [mean, sd] = proxy_inception_score(samples, 100, clf, 10);
    CHECK(mean == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(sd == doctest::Approx(0.0).epsilon(1e-12));
}

TEST_CASE("proxy inception score: constant one-hot posterior gives 1") {
    // huge class-0 bias makes p(y|x) one-hot and equal to the marginal
    auto clf = fixed_classifier(2, 3, std::vector<double>(4, 0.0), {0.0, 0.0},
                                std::vector<double>(6, 0.0), {50.0, 0.0, 0.0}, 2);
    Rng rng(3);
    std::vector<double> samples(2 * 60);
    for (auto& v : samples) v = 2.0 * rng.uniform01() - 1.0;
    auto [mean, sd] = proxy_inception_score(samples, 60, clf, 6);
    CHECK(mean == doctest::Approx(1.0).epsilon(1e-9));
}

TEST_CASE("proxy inception score: C confident balanced classes approach C") {
    // identity-ish net: l1 scales the 2-D input, l2 passes it through, so
    // sample (1,0) is confidently class 0 and (0,1) class 1
    auto clf = fixed_classifier(2, 2, {60.0, 0.0, 0.0, 60.0}, {0.0, 0.0},
                                {1.0, 0.0, 0.0, 1.0}, {0.0, 0.0}, 2);
    std::vector<double> samples;
    for (int rep = 0; rep < 40; ++rep) {
        samples.insert(samples.end(), {1.0, 0.0});
        samples.insert(samples.end(), {0.0, 1.0});
    }
    auto [mean, sd] = proxy_inception_score(samples, 80, clf, 4);
    CHECK(mean == doctest::Approx(2.0).epsilon(1e-6));

    // information-theoretic bound holds
    CHECK(mean >= 1.0);
    CHECK(mean <= 2.0 + 1e-9);
}

TEST_CASE("proxy inception score rejects an untrained classifier") {
    auto clf = uniform_classifier(2, 4);
    clf.trained = false;
    std::vector<double> samples(2 * 10, 0.0);
    CHECK_THROWS_AS(proxy_inception_score(samples, 10, clf, 2), ContractError);
}

TEST_CASE("conditional accuracy: oracle classifier on separated data") {
    auto clf = fixed_classifier(2, 2, {60.0, 0.0, 0.0, 60.0}, {0.0, 0.0},
                                {1.0, 0.0, 0.0, 1.0}, {0.0, 0.0}, 2);
    std::vector<double> samples = {1, 0, 0, 1, 1, 0};
    CHECK(conditional_accuracy(samples, 3, {0, 1, 0}, clf) == doctest::Approx(1.0));
    CHECK(conditional_accuracy(samples, 3, {1, 1, 0}, clf) ==
          doctest::Approx(2.0 / 3.0));
    CHECK_THROWS_AS(conditional_accuracy({}, 0, {}, clf), ContractError);
}

TEST_CASE("conditional accuracy: random requests sit near chance level") {
    auto clf = fixed_classifier(2, 2, {60.0, 0.0, 0.0, 60.0}, {0.0, 0.0},
                                {1.0, 0.0, 0.0, 1.0}, {0.0, 0.0}, 2);
    Rng rng(17);
    const std::size_t n = 20000;
    std::vector<double> samples(2 * n);
    std::vector<std::size_t> requested(n);
    for (std::size_t i = 0; i < n; ++i) {
        const bool cls0 = rng.uniform01() < 0.5;
        samples[2 * i] = cls0 ? 1.0 : 0.0;
        samples[2 * i + 1] = cls0 ? 0.0 : 1.0;
        requested[i] = rng.next_u64() % 2;
    }
    const double acc = conditional_accuracy(samples, n, requested, clf);
    CHECK(acc == doctest::Approx(0.5).epsilon(0.05));
}

TEST_CASE("loss equilibrium tail means") {
    std::vector<double> constant(40, 2.0 * std::log(2.0));
    CHECK(loss_equilibrium(constant, 0.25) ==
          doctest::Approx(2.0 * std::log(2.0)).epsilon(1e-12));

    // linear ramp 0..2 over 101 points: last half averages 1.5
    std::vector<double> ramp(101);
    for (std::size_t i = 0; i < ramp.size(); ++i) ramp[i] = 2.0 * i / 100.0;
    // ceil(0.5 * 101) = 51 entries: indices 50..100, mean = 1.5
    CHECK(loss_equilibrium(ramp, 0.5) == doctest::Approx(1.5));

    // converging series ends near 2 ln 2
    std::vector<double> conv(500);
    for (std::size_t i = 0; i < conv.size(); ++i) {
        conv[i] = 2.0 * std::log(2.0) + std::exp(-static_cast<double>(i) / 20.0);
    }
    CHECK(loss_equilibrium(conv, 0.1) ==
          doctest::Approx(2.0 * std::log(2.0)).epsilon(1e-3));

    // full tail equals the plain mean
    std::vector<double> any = {1, 2, 3, 4, 5, 6, 7, 8, 9, 10};
    CHECK(loss_equilibrium(any, 1.0) == doctest::Approx(5.5));

    std::vector<double> tiny = {1, 2, 3};
    CHECK_THROWS_AS(loss_equilibrium(tiny, 0.5), DomainError);
    CHECK_THROWS_AS(loss_equilibrium(any, 0.0), DomainError);
}

TEST_CASE("trained classifier separates the ring and scores real above junk") {
    data::RingSpec spec{8, 1.0, 0.05, 500, true};
    Rng data_rng(21);
    auto ds = data::ring_of_gaussians(spec, data_rng);

    ClassifierConfig ccfg;
    Rng clf_rng(4);
    auto clf = train_classifier(ds, ccfg, clf_rng);
    CHECK(clf.train_accuracy >= 0.97);
    CHECK(clf.digest().size() == 16);

    auto [real_is, real_sd] = proxy_inception_score(ds.samples, ds.size(), clf, 10);

    // an untrained generator's output is far less diverse than the data
    latent::LatentConfig lcfg;
    lcfg.components = 8;
    lcfg.dim = 10;
    lcfg.num_classes = 8;
    Rng model_rng(77);
    auto model = gan::Model::init(lcfg, 32, 2, 0.0, model_rng);
    std::vector<std::size_t> labels(ds.size());
    for (std::size_t i = 0; i < labels.size(); ++i) labels[i] = i % 8;
    Rng sample_rng(5);
    auto fake = gan::sample(model, labels, sample_rng);
    auto [fake_is, fake_sd] = proxy_inception_score(fake, labels.size(), clf, 10);
    CHECK(real_is > fake_is);
    CHECK(real_is > 4.0);  // 8 clean classes ought to score high
}

TEST_CASE("eval report validation and serialization") {
    EvalReport r;
    r.modes_recovered = 7;
    r.high_quality_fraction = 0.9;
    r.proxy_is_mean = 6.5;
    r.proxy_is_std = 0.1;
    r.conditional_accuracy = 0.85;
    r.d_loss_tail_mean = 1.31;
    r.classifier_digest = "00ff";
    r.validate();
    const auto row = report_csv_row(r, "t_mixture");
    CHECK(row.rfind("t_mixture,7,", 0) == 0);
    CHECK(report_csv_header().rfind("name,modes_recovered", 0) == 0);
    CHECK(report_text(r, "t_mixture").find("modes recovered") != std::string::npos);

    EvalReport bad = r;
    bad.conditional_accuracy = 1.5;
    CHECK_THROWS_AS(bad.validate(), ContractError);
}
