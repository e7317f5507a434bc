#include "tgan/latent.hpp"

#include <cmath>
#include <ostream>

#include "tgan/tdist.hpp"

namespace tgan::latent {

NoiseKind noise_kind_from_string(const std::string& s) {
    if (s == "t_mixture") return NoiseKind::t_mixture;
    if (s == "gaussian_mixture") return NoiseKind::gaussian_mixture;
    if (s == "single_gaussian") return NoiseKind::single_gaussian;
    throw DomainError("unknown latent kind '" + s + "'");
}

std::string to_string(NoiseKind kind) {
    switch (kind) {
        case NoiseKind::t_mixture: return "t_mixture";
        case NoiseKind::gaussian_mixture: return "gaussian_mixture";
        case NoiseKind::single_gaussian: return "single_gaussian";
    }
    return "?";
}

void LatentConfig::validate(std::ostream* warnings) const {
    if (components < 1) throw DomainError("latent config: components must be >= 1");
    if (dim < 1) throw DomainError("latent config: dim must be >= 1");
    if (num_classes < 1) throw DomainError("latent config: num_classes must be >= 1");
    if (!(nu > 0.0)) throw DomainError("latent config: nu must be positive");
    if (sigma_penalty < 0.0) throw DomainError("latent config: sigma_penalty must be >= 0");
    if (warnings && has_mixture()) {
        if (components < 5 || components > 50) {
            *warnings << "warning: component count " << components
                      << " outside the recommended range [5, 50]\n";
        }
        if (dim < 10 || dim > 25) {
            *warnings << "warning: component dimension " << dim
                      << " outside the recommended range [10, 25]\n";
        }
    }
}

std::size_t LatentConfig::attention_width() const {
    if (attention_hidden > 0) return attention_hidden;
    return std::max<std::size_t>(components, 32);
}

namespace {

// Inverse of softplus(raw) + 1e-4 = target.
double sigma_raw_for(double target) {
    const double sp = target - 1e-4;
    return std::log(std::expm1(sp));
}

Tensor glorot_uniform(std::size_t fan_in, std::size_t fan_out, Shape shape, Rng& rng) {
    const double bound = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
    std::vector<double> w(shape_numel(shape));
    for (auto& v : w) v = bound * (2.0 * rng.uniform01() - 1.0);
    return Tensor::from_data(std::move(shape), std::move(w), /*requires_grad=*/true);
}

}  // namespace

ComponentParams ComponentParams::init(const LatentConfig& cfg, Rng& rng) {
    ComponentParams p;
    std::vector<double> mu(cfg.components * cfg.dim);
    for (auto& v : mu) v = 2.0 * rng.uniform01() - 1.0;  // spread over the latent cube
    p.mu = Tensor::from_data({cfg.components, cfg.dim}, std::move(mu), true);
    p.sigma_raw = Tensor::full({cfg.components, cfg.dim}, sigma_raw_for(0.2), true);
    return p;
}

AttentionNet AttentionNet::init(const LatentConfig& cfg, Rng& rng) {
    const std::size_t in = cfg.components * cfg.dim;
    const std::size_t hidden = cfg.attention_width();
    AttentionNet n;
    n.W1 = glorot_uniform(in, hidden, {in, hidden}, rng);
    n.b1 = Tensor::zeros({hidden}, true);
    n.W2 = glorot_uniform(hidden, cfg.components, {hidden, cfg.components}, rng);
    n.b2 = Tensor::zeros({cfg.components}, true);
    return n;
}

LatentParams LatentParams::init(const LatentConfig& cfg, Rng& rng) {
    LatentParams p;
    p.comp = ComponentParams::init(cfg, rng);
    p.att = AttentionNet::init(cfg, rng);
    return p;
}

std::vector<std::pair<std::string, Tensor>> LatentParams::named() const {
    return {
        {"latent.mu", comp.mu},
        {"latent.sigma_raw", comp.sigma_raw},
        {"latent.att.W1", att.W1},
        {"latent.att.b1", att.b1},
        {"latent.att.W2", att.W2},
        {"latent.att.b2", att.b2},
    };
}

std::vector<Tensor> LatentParams::tensors() const {
    std::vector<Tensor> out;
    for (auto& [name, t] : named()) out.push_back(t);
    return out;
}

std::vector<double> draw_eps(const LatentConfig& cfg, std::size_t batch, Rng& rng) {
    if (batch == 0) return {};
    switch (cfg.kind) {
        case NoiseKind::t_mixture:
            return tdist::sample_standard_t(cfg.dim, cfg.nu, batch * cfg.components, rng);
        case NoiseKind::gaussian_mixture: {
            std::vector<double> eps(batch * cfg.components * cfg.dim);
            for (auto& v : eps) v = rng.normal();
            return eps;
        }
        case NoiseKind::single_gaussian: {
            std::vector<double> eps(batch * cfg.dim);
            for (auto& v : eps) v = rng.normal();
            return eps;
        }
    }
    throw ContractError("draw_eps: unknown kind");
}

Tensor sigma_vector(Graph& g, const LatentConfig& cfg, const ComponentParams& params) {
    auto flat = g.reshape(params.sigma_raw, {cfg.components * cfg.dim});
    return g.add_const(g.softplus(flat), 1e-4);
}

Tensor draw_components(Graph& g, const LatentConfig& cfg, const ComponentParams& params,
                       std::span<const double> eps, std::size_t batch) {
    const std::size_t width = cfg.components * cfg.dim;
    if (eps.size() != batch * width) {
        throw ShapeError("draw_components: expected " + std::to_string(batch * width) +
                         " noise values, got " + std::to_string(eps.size()));
    }
    auto eps_t = Tensor::from_data({batch, width}, {eps.begin(), eps.end()});
    auto sigma = sigma_vector(g, cfg, params);
    auto mu = g.reshape(params.mu, {width});
    auto flat = g.add_rowwise(g.mul_rowwise(eps_t, sigma), mu);
    return g.reshape(flat, {batch, cfg.components, cfg.dim});
}

Tensor attention_weights(Graph& g, const AttentionNet& net, const Tensor& components) {
    if (components.shape().size() != 3) {
        throw ShapeError("attention_weights: expected [batch, N, p] components, got " +
                         shape_str(components.shape()));
    }
    const std::size_t batch = components.shape()[0];
    const std::size_t width = components.shape()[1] * components.shape()[2];
    auto flat = g.reshape(components, {batch, width});
    auto h = g.dense(flat, net.W1, net.b1, Activation::leaky_relu(0.2));
    auto logits = g.dense(h, net.W2, net.b2, Activation::identity());
    return g.softmax(logits);
}

Tensor compose_noise(Graph& g, const Tensor& components, const Tensor& pi) {
    if (pi.shape().size() != 2) {
        throw ShapeError("compose_noise: expected [batch, N] weights, got " +
                         shape_str(pi.shape()));
    }
    const std::size_t batch = pi.shape()[0], n = pi.shape()[1];
    for (std::size_t r = 0; r < batch; ++r) {
        double s = 0.0;
        for (std::size_t i = 0; i < n; ++i) s += pi.at(r * n + i);
        if (std::abs(s - 1.0) > 1e-9) {
            throw ContractError("compose_noise: pi row " + std::to_string(r) +
                                " sums to " + std::to_string(s) + ", expected 1");
        }
    }
    return g.component_mix(components, pi);
}

Tensor concat_condition(Graph& g, const Tensor& z_prime,
                        const std::vector<std::size_t>& labels, std::size_t num_classes) {
    if (z_prime.shape().size() != 2 || z_prime.shape()[0] != labels.size()) {
        throw ShapeError("concat_condition: z' is " + shape_str(z_prime.shape()) +
                         " for " + std::to_string(labels.size()) + " labels");
    }
    const std::size_t batch = labels.size();
    std::vector<double> onehot(batch * num_classes, 0.0);
    for (std::size_t r = 0; r < batch; ++r) {
        if (labels[r] >= num_classes) {
            throw DomainError("concat_condition: label " + std::to_string(labels[r]) +
                              " out of range for " + std::to_string(num_classes) +
                              " classes");
        }
        onehot[r * num_classes + labels[r]] = 1.0;
    }
    auto oh = Tensor::from_data({batch, num_classes}, std::move(onehot));
    return g.concat_cols(z_prime, oh);
}

NoiseSample build_noise(Graph& g, const LatentConfig& cfg, const LatentParams* params,
                        std::span<const double> eps, std::size_t batch) {
    NoiseSample out;
    if (cfg.kind == NoiseKind::single_gaussian) {
        if (eps.size() != batch * cfg.dim) {
            throw ShapeError("build_noise: expected " + std::to_string(batch * cfg.dim) +
                             " noise values");
        }
        out.z_prime = Tensor::from_data({batch, cfg.dim}, {eps.begin(), eps.end()});
        return out;
    }
    if (!params) throw ContractError("build_noise: mixture kinds need latent parameters");
    out.components = draw_components(g, cfg, params->comp, eps, batch);
    out.pi = attention_weights(g, params->att, out.components);
    out.z_prime = compose_noise(g, out.components, out.pi);
    return out;
}

NoiseSample sample_noise(Graph& g, const LatentConfig& cfg, const LatentParams* params,
                         std::size_t batch, Rng& rng) {
    const auto eps = draw_eps(cfg, batch, rng);
    return build_noise(g, cfg, params, eps, batch);
}

}  // namespace tgan::latent
