#pragma once

#include <memory>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "tgan/latent.hpp"
#include "tgan/optim.hpp"
#include "tgan/tensor.hpp"

namespace tgan::gan {

struct DenseLayer {
    Tensor W, b;
    static DenseLayer init(std::size_t in, std::size_t out, Rng& rng);
};

// (p + C) -> hidden -> hidden -> data_dim, tanh on the way out so samples
// live in (-1, 1) like the normalized data.
struct Generator {
    std::vector<DenseLayer> layers;
    static Generator init(std::size_t in_dim, std::size_t hidden, std::size_t data_dim,
                          Rng& rng);
    Tensor forward(Graph& g, const Tensor& zc) const;
    std::vector<std::pair<std::string, Tensor>> named() const;
    std::size_t in_dim() const { return layers.front().W.shape()[0]; }
    std::size_t data_dim() const { return layers.back().W.shape()[1]; }
};

// Shared 3-layer trunk with two heads: a 2-layer adversarial head ending in
// a sigmoid score and a 2-layer classifier head with dropout and softmax.
struct Discriminator {
    std::vector<DenseLayer> trunk;  // 3
    std::vector<DenseLayer> adv;    // 2
    std::vector<DenseLayer> cls;    // 2
    double dropout_rate = 0.3;

    static Discriminator init(std::size_t data_dim, std::size_t hidden,
                              std::size_t num_classes, double dropout, Rng& rng);

    struct Out {
        Tensor score;        // [b, 1] in (0, 1)
        Tensor class_probs;  // [b, C] rows on the simplex
    };
    // Dropout is applied only when training; the mask comes from dropout_rng
    // so a step is reproducible from its seed.
    Out forward(Graph& g, const Tensor& x, bool training, Rng* dropout_rng) const;

    std::vector<std::pair<std::string, Tensor>> named() const;
    std::size_t data_dim() const { return trunk.front().W.shape()[0]; }
    std::size_t num_classes() const { return cls.back().W.shape()[1]; }
};

struct LossWeights {
    double alpha = 1.0;
};

enum class GMode { saturating, nonsaturating };
GMode g_mode_from_string(const std::string& s);

// -mean log p(class), probabilities clamped at 1e-12 (clamps counted).
Tensor nll_true_class(Graph& g, const Tensor& probs, const std::vector<std::size_t>& labels,
                      std::size_t* clamp_count = nullptr);

// L_C = nll(real) + nll(fake); both players minimize their share of it.
Tensor loss_classifier(Graph& g, const Tensor& probs_real,
                       const std::vector<std::size_t>& labels_real,
                       const Tensor& probs_fake,
                       const std::vector<std::size_t>& labels_fake,
                       std::size_t* clamp_count = nullptr);

// -mean log s_real - mean log(1 - s_fake); equals 2 ln 2 when D outputs 0.5.
Tensor loss_d_adv(Graph& g, const Tensor& scores_real, const Tensor& scores_fake);

// saturating: mean log(1 - s_fake); nonsaturating: -mean log s_fake.
Tensor loss_g_adv(Graph& g, const Tensor& scores_fake, GMode mode);

struct Model {
    Generator gen;
    Discriminator disc;
    latent::LatentConfig lcfg;
    std::optional<latent::LatentParams> lparams;

    static Model init(const latent::LatentConfig& lcfg, std::size_t hidden,
                      std::size_t data_dim, double dropout, Rng& rng);
    std::vector<std::pair<std::string, Tensor>> named() const;
    std::vector<Tensor> d_tensors() const;
    std::vector<Tensor> g_tensors() const;  // generator + latent learnables
};

std::string params_digest(const std::vector<std::pair<std::string, Tensor>>& named);

struct TrainConfig {
    double lr = 2e-4;
    std::string optimizer = "adam";
    double alpha = 1.0;
    GMode g_mode = GMode::nonsaturating;
    std::size_t d_steps_per_g = 1;
    double dropout = 0.3;
};

struct StepReport {
    double d_loss = 0.0;
    double d_adv = 0.0;  // adversarial component of d_loss
    double g_loss = 0.0;
    double c_loss = 0.0;
};

// Alternating update driver. Owns the optimizers and the per-step random
// streams; step index i always consumes stream seed.split(i), so a run is
// a pure function of (parameters at construction, seed, step sequence).
class Trainer {
  public:
    Trainer(Model model, TrainConfig cfg, std::uint64_t seed);

    StepReport step(std::span<const double> real_batch,
                    const std::vector<std::size_t>& labels);

    const Model& model() const { return model_; }
    Model& model() { return model_; }
    std::size_t steps_done() const { return step_; }
    std::size_t classifier_clamp_count() const { return clamp_count_; }

  private:
    Model model_;
    TrainConfig cfg_;
    Rng root_;
    std::size_t step_ = 0;
    std::size_t clamp_count_ = 0;
    std::unique_ptr<optim::Optimizer> d_opt_;
    std::unique_ptr<optim::Optimizer> g_opt_;
};

// n = labels.size() conditional samples, dropout off, values in (-1, 1).
std::vector<double> sample(const Model& model, const std::vector<std::size_t>& labels,
                           Rng& rng);

}  // namespace tgan::gan
