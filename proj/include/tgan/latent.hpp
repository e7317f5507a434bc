#pragma once

#include <iosfwd>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "tgan/tensor.hpp"

namespace tgan::latent {

enum class NoiseKind { t_mixture, gaussian_mixture, single_gaussian };

NoiseKind noise_kind_from_string(const std::string& s);
std::string to_string(NoiseKind kind);

struct LatentConfig {
    NoiseKind kind = NoiseKind::t_mixture;
    std::size_t components = 8;  // N
    std::size_t dim = 10;        // p
    double nu = 5.0;
    std::size_t num_classes = 1;  // C
    std::size_t attention_hidden = 0;  // 0 -> max(N, 32)
    double sigma_penalty = 0.0;        // optional scale regularizer, off by default

    // DomainError on structural problems; out-of-recommended-range N and p
    // ([5,50] and [10,25]) only warn.
    void validate(std::ostream* warnings = nullptr) const;
    std::size_t attention_width() const;
    bool has_mixture() const { return kind != NoiseKind::single_gaussian; }
};

// Learnable per-component location and scale. sigma is kept strictly
// positive by the softplus(raw) + 1e-4 parameterization.
struct ComponentParams {
    Tensor mu;         // [N, p]
    Tensor sigma_raw;  // [N, p]
    static ComponentParams init(const LatentConfig& cfg, Rng& rng);
};

// Two dense layers mapping the flattened components to N mixture logits.
struct AttentionNet {
    Tensor W1, b1;  // [N*p, hidden], [hidden]
    Tensor W2, b2;  // [hidden, N], [N]
    static AttentionNet init(const LatentConfig& cfg, Rng& rng);
};

struct LatentParams {
    ComponentParams comp;
    AttentionNet att;
    static LatentParams init(const LatentConfig& cfg, Rng& rng);
    std::vector<std::pair<std::string, Tensor>> named() const;
    std::vector<Tensor> tensors() const;
};

// Parameter-free noise for one batch: batch*N*p standard draws for mixture
// kinds (t or normal depending on cfg.kind), batch*p normals for
// single_gaussian. Kept separate from the graph ops so a test can freeze it.
std::vector<double> draw_eps(const LatentConfig& cfg, std::size_t batch, Rng& rng);

// softplus(sigma_raw) + 1e-4, flattened to [N*p].
Tensor sigma_vector(Graph& g, const LatentConfig& cfg, const ComponentParams& params);

// t_i = mu_i + sigma_i (.) eps per batch row and component; [batch, N, p].
Tensor draw_components(Graph& g, const LatentConfig& cfg, const ComponentParams& params,
                       std::span<const double> eps, std::size_t batch);

// Flatten components, two dense layers, softmax -> pi rows on the simplex.
Tensor attention_weights(Graph& g, const AttentionNet& net, const Tensor& components);

// z' = sum_i pi_i t_i per row. ContractError if a pi row is off the simplex.
Tensor compose_noise(Graph& g, const Tensor& components, const Tensor& pi);

// One-hot encode labels and append after z'.
Tensor concat_condition(Graph& g, const Tensor& z_prime,
                        const std::vector<std::size_t>& labels, std::size_t num_classes);

struct NoiseSample {
    Tensor z_prime;     // [batch, p]
    Tensor pi;          // [batch, N]; undefined for single_gaussian
    Tensor components;  // [batch, N, p]; undefined for single_gaussian
};

// Full pipeline for the configured noise kind. `params` may be null only
// for single_gaussian.
NoiseSample build_noise(Graph& g, const LatentConfig& cfg, const LatentParams* params,
                        std::span<const double> eps, std::size_t batch);

NoiseSample sample_noise(Graph& g, const LatentConfig& cfg, const LatentParams* params,
                         std::size_t batch, Rng& rng);

}  // namespace tgan::latent
