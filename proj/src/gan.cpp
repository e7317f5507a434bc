#include "tgan/gan.hpp"

#include <cmath>

namespace tgan::optim {

Adam::Adam(std::vector<Tensor> params, AdamConfig cfg)
    : Optimizer(std::move(params)), cfg_(cfg) {
    for (const auto& p : params_) {
        m_.emplace_back(p.numel(), 0.0);
        v_.emplace_back(p.numel(), 0.0);
    }
}

void Adam::step() {
    ++t_;
    const double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
    const double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
    for (std::size_t k = 0; k < params_.size(); ++k) {
        auto vals = params_[k].values_mut();
        auto grad = params_[k].grad();
        auto& m = m_[k];
        auto& v = v_[k];
        for (std::size_t i = 0; i < vals.size(); ++i) {
            m[i] = cfg_.beta1 * m[i] + (1.0 - cfg_.beta1) * grad[i];
            v[i] = cfg_.beta2 * v[i] + (1.0 - cfg_.beta2) * grad[i] * grad[i];
            vals[i] -= cfg_.lr * (m[i] / bc1) / (std::sqrt(v[i] / bc2) + cfg_.eps);
        }
    }
}

void Sgd::step() {
    for (auto& p : params_) {
        auto vals = p.values_mut();
        auto grad = p.grad();
        for (std::size_t i = 0; i < vals.size(); ++i) vals[i] -= lr_ * grad[i];
    }
}

std::unique_ptr<Optimizer> make_optimizer(const std::string& kind,
                                          std::vector<Tensor> params, double lr) {
    if (kind == "adam") {
        AdamConfig cfg;
        cfg.lr = lr;
        return std::make_unique<Adam>(std::move(params), cfg);
    }
    if (kind == "sgd") return std::make_unique<Sgd>(std::move(params), lr);
    throw DomainError("unknown optimizer '" + kind + "'");
}

}  // namespace tgan::optim

namespace tgan::gan {

namespace {

Tensor glorot(std::size_t fan_in, std::size_t fan_out, Rng& rng) {
    const double bound = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
    std::vector<double> w(fan_in * fan_out);
    for (auto& v : w) v = bound * (2.0 * rng.uniform01() - 1.0);
    return Tensor::from_data({fan_in, fan_out}, std::move(w), true);
}

// Inverted dropout: the mask is a constant tensor, so gradients just pass
// through the surviving units with the 1/(1-rate) scale baked in.
Tensor apply_dropout(Graph& g, const Tensor& x, double rate, Rng& rng) {
    if (rate <= 0.0) return x;
    if (rate >= 1.0) throw DomainError("dropout rate must be < 1");
    std::vector<double> mask(x.numel());
    const double keep = 1.0 - rate;
    for (auto& m : mask) m = rng.uniform01() < keep ? 1.0 / keep : 0.0;
    return g.mul(x, Tensor::from_data(x.shape(), std::move(mask)));
}

}  // namespace

DenseLayer DenseLayer::init(std::size_t in, std::size_t out, Rng& rng) {
    return {glorot(in, out, rng), Tensor::zeros({out}, true)};
}

GMode g_mode_from_string(const std::string& s) {
    if (s == "saturating") return GMode::saturating;
    if (s == "nonsaturating") return GMode::nonsaturating;
    throw DomainError("unknown generator mode '" + s + "'");
}

Generator Generator::init(std::size_t in_dim, std::size_t hidden, std::size_t data_dim,
                          Rng& rng) {
    Generator gen;
    gen.layers.push_back(DenseLayer::init(in_dim, hidden, rng));
    gen.layers.push_back(DenseLayer::init(hidden, hidden, rng));
    gen.layers.push_back(DenseLayer::init(hidden, data_dim, rng));
    return gen;
}

Tensor Generator::forward(Graph& g, const Tensor& zc) const {
    auto h = g.dense(zc, layers[0].W, layers[0].b, Activation::leaky_relu(0.2));
    h = g.dense(h, layers[1].W, layers[1].b, Activation::leaky_relu(0.2));
    return g.dense(h, layers[2].W, layers[2].b, Activation::tanh());
}

std::vector<std::pair<std::string, Tensor>> Generator::named() const {
    std::vector<std::pair<std::string, Tensor>> out;
    for (std::size_t i = 0; i < layers.size(); ++i) {
        out.emplace_back("gen.l" + std::to_string(i) + ".W", layers[i].W);
        out.emplace_back("gen.l" + std::to_string(i) + ".b", layers[i].b);
    }
    return out;
}

Discriminator Discriminator::init(std::size_t data_dim, std::size_t hidden,
                                  std::size_t num_classes, double dropout, Rng& rng) {
    Discriminator d;
    d.dropout_rate = dropout;
    d.trunk.push_back(DenseLayer::init(data_dim, hidden, rng));
    d.trunk.push_back(DenseLayer::init(hidden, hidden, rng));
    d.trunk.push_back(DenseLayer::init(hidden, hidden, rng));
    d.adv.push_back(DenseLayer::init(hidden, hidden, rng));
    d.adv.push_back(DenseLayer::init(hidden, 1, rng));
    d.cls.push_back(DenseLayer::init(hidden, hidden, rng));
    d.cls.push_back(DenseLayer::init(hidden, num_classes, rng));
    return d;
}

Discriminator::Out Discriminator::forward(Graph& g, const Tensor& x, bool training,
                                          Rng* dropout_rng) const {
    auto h = x;
    for (const auto& layer : trunk) {
        h = g.dense(h, layer.W, layer.b, Activation::leaky_relu(0.2));
    }
    auto a = g.dense(h, adv[0].W, adv[0].b, Activation::leaky_relu(0.2));
    auto score = g.dense(a, adv[1].W, adv[1].b, Activation::sigmoid());

    auto c = g.dense(h, cls[0].W, cls[0].b, Activation::leaky_relu(0.2));
    if (training && dropout_rate > 0.0) {
        if (!dropout_rng) throw ContractError("discriminator: training forward needs a dropout rng");
        c = apply_dropout(g, c, dropout_rate, *dropout_rng);
    }
    auto class_probs = g.softmax(g.dense(c, cls[1].W, cls[1].b, Activation::identity()));
    return {score, class_probs};
}

std::vector<std::pair<std::string, Tensor>> Discriminator::named() const {
    std::vector<std::pair<std::string, Tensor>> out;
    auto push = [&](const std::string& prefix, const std::vector<DenseLayer>& layers) {
        for (std::size_t i = 0; i < layers.size(); ++i) {
            out.emplace_back("disc." + prefix + std::to_string(i) + ".W", layers[i].W);
            out.emplace_back("disc." + prefix + std::to_string(i) + ".b", layers[i].b);
        }
    };
    push("trunk", trunk);
    push("adv", adv);
    push("cls", cls);
    return out;
}

Tensor nll_true_class(Graph& g, const Tensor& probs, const std::vector<std::size_t>& labels,
                      std::size_t* clamp_count) {
    return g.neg(g.mean(g.pick_log(probs, labels, 1e-12, clamp_count)));
}

Tensor loss_classifier(Graph& g, const Tensor& probs_real,
                       const std::vector<std::size_t>& labels_real,
                       const Tensor& probs_fake,
                       const std::vector<std::size_t>& labels_fake,
                       std::size_t* clamp_count) {
    return g.add(nll_true_class(g, probs_real, labels_real, clamp_count),
                 nll_true_class(g, probs_fake, labels_fake, clamp_count));
}

Tensor loss_d_adv(Graph& g, const Tensor& scores_real, const Tensor& scores_fake) {
    auto real_term = g.neg(g.mean(g.log_clamped(scores_real)));
    auto fake_term = g.neg(g.mean(g.log_clamped(g.add_const(g.neg(scores_fake), 1.0))));
    return g.add(real_term, fake_term);
}

Tensor loss_g_adv(Graph& g, const Tensor& scores_fake, GMode mode) {
    if (mode == GMode::saturating) {
        return g.mean(g.log_clamped(g.add_const(g.neg(scores_fake), 1.0)));
    }
    return g.neg(g.mean(g.log_clamped(scores_fake)));
}

Model Model::init(const latent::LatentConfig& lcfg, std::size_t hidden,
                  std::size_t data_dim, double dropout, Rng& rng) {
    Model m;
    m.lcfg = lcfg;
    auto gen_rng = rng.split(1);
    auto disc_rng = rng.split(2);
    auto lat_rng = rng.split(3);
    m.gen = Generator::init(lcfg.dim + lcfg.num_classes, hidden, data_dim, gen_rng);
    m.disc = Discriminator::init(data_dim, hidden, lcfg.num_classes, dropout, disc_rng);
    if (lcfg.has_mixture()) m.lparams = latent::LatentParams::init(lcfg, lat_rng);
    return m;
}

std::vector<std::pair<std::string, Tensor>> Model::named() const {
    std::vector<std::pair<std::string, Tensor>> out;
    if (lparams) {
        for (auto& nt : lparams->named()) out.push_back(nt);
    }
    for (auto& nt : gen.named()) out.push_back(nt);
    for (auto& nt : disc.named()) out.push_back(nt);
    return out;
}

std::vector<Tensor> Model::d_tensors() const {
    std::vector<Tensor> out;
    for (auto& nt : disc.named()) out.push_back(nt.second);
    return out;
}

std::vector<Tensor> Model::g_tensors() const {
    std::vector<Tensor> out;
    for (auto& nt : gen.named()) out.push_back(nt.second);
    if (lparams) {
        for (auto& t : lparams->tensors()) out.push_back(t);
    }
    return out;
}

std::string params_digest(const std::vector<std::pair<std::string, Tensor>>& named) {
    std::uint64_t h = 0xcbf29ce484222325ull;
    for (const auto& [name, t] : named) {
        h = fnv1a64(name.data(), name.size(), h);
        auto v = t.values();
        h = fnv1a64(v.data(), v.size() * sizeof(double), h);
    }
    return hex64(h);
}

Trainer::Trainer(Model model, TrainConfig cfg, std::uint64_t seed)
    : model_(std::move(model)), cfg_(cfg), root_(seed) {
    d_opt_ = optim::make_optimizer(cfg_.optimizer, model_.d_tensors(), cfg_.lr);
    g_opt_ = optim::make_optimizer(cfg_.optimizer, model_.g_tensors(), cfg_.lr);
}

StepReport Trainer::step(std::span<const double> real_batch,
                         const std::vector<std::size_t>& labels) {
    const std::size_t batch = labels.size();
    const std::size_t dim = model_.gen.data_dim();
    if (real_batch.size() != batch * dim) {
        throw ShapeError("train step: real batch has " + std::to_string(real_batch.size()) +
                         " values, expected " + std::to_string(batch * dim));
    }
    const std::size_t C = model_.lcfg.num_classes;
    auto step_rng = root_.split(step_);
    const auto* lp = model_.lparams ? &*model_.lparams : nullptr;

    StepReport report;

    // Discriminator update(s): fresh detached fakes each time.
    for (std::size_t r = 0; r < cfg_.d_steps_per_g; ++r) {
        auto rng_labels = step_rng.split(10 + 4 * r);
        auto rng_eps = step_rng.split(11 + 4 * r);
        auto rng_drop = step_rng.split(12 + 4 * r);

        std::vector<std::size_t> fake_labels(batch);
        for (auto& l : fake_labels) l = rng_labels.next_u64() % C;

        Graph fake_g(/*record=*/false);
        auto noise = latent::sample_noise(fake_g, model_.lcfg, lp, batch, rng_eps);
        auto zc = latent::concat_condition(fake_g, noise.z_prime, fake_labels, C);
        auto fake_t = model_.gen.forward(fake_g, zc);
        auto fake_values = fake_t.values();

        Graph g;
        auto real = Tensor::from_data({batch, dim}, {real_batch.begin(), real_batch.end()});
        auto fake = Tensor::from_data({batch, dim}, {fake_values.begin(), fake_values.end()});
        auto out_real = model_.disc.forward(g, real, /*training=*/true, &rng_drop);
        auto out_fake = model_.disc.forward(g, fake, /*training=*/true, &rng_drop);
        auto adv = loss_d_adv(g, out_real.score, out_fake.score);
        auto lc = loss_classifier(g, out_real.class_probs, labels, out_fake.class_probs,
                                  fake_labels, &clamp_count_);
        auto loss = g.add(adv, g.scale(lc, cfg_.alpha));

        report.d_adv = adv.item();
        report.c_loss = lc.item();
        report.d_loss = loss.item();
        if (!std::isfinite(report.d_loss)) {
            throw NumericError("train step " + std::to_string(step_) +
                               ": non-finite discriminator loss");
        }
        d_opt_->zero_grad();
        g_opt_->zero_grad();
        g.backward(loss);
        d_opt_->step();
    }

    // Generator update; latent parameters learn only through this objective.
    {
        auto rng_labels = step_rng.split(2);
        auto rng_eps = step_rng.split(3);
        auto rng_drop = step_rng.split(4);

        std::vector<std::size_t> fake_labels(batch);
        for (auto& l : fake_labels) l = rng_labels.next_u64() % C;

        Graph g;
        auto noise = latent::sample_noise(g, model_.lcfg, lp, batch, rng_eps);
        auto zc = latent::concat_condition(g, noise.z_prime, fake_labels, C);
        auto fake = model_.gen.forward(g, zc);
        auto out = model_.disc.forward(g, fake, /*training=*/true, &rng_drop);
        auto adv = loss_g_adv(g, out.score, cfg_.g_mode);
        auto lc_fake = nll_true_class(g, out.class_probs, fake_labels, &clamp_count_);
        auto loss = g.add(adv, g.scale(lc_fake, cfg_.alpha));
        if (lp && model_.lcfg.sigma_penalty > 0.0) {
            auto sigma = latent::sigma_vector(g, model_.lcfg, lp->comp);
            auto dev = g.add_const(g.neg(sigma), 1.0);  // 1 - sigma
            loss = g.add(loss, g.scale(g.mean(g.mul(dev, dev)), model_.lcfg.sigma_penalty));
        }

        report.g_loss = loss.item();
        if (!std::isfinite(report.g_loss)) {
            throw NumericError("train step " + std::to_string(step_) +
                               ": non-finite generator loss");
        }
        g_opt_->zero_grad();
        d_opt_->zero_grad();
        g.backward(loss);
        g_opt_->step();
    }

    ++step_;
    return report;
}

std::vector<double> sample(const Model& model, const std::vector<std::size_t>& labels,
                           Rng& rng) {
    Graph g(/*record=*/false);
    const auto* lp = model.lparams ? &*model.lparams : nullptr;
    auto noise = latent::sample_noise(g, model.lcfg, lp, labels.size(), rng);
    auto zc = latent::concat_condition(g, noise.z_prime, labels, model.lcfg.num_classes);
    auto out = model.gen.forward(g, zc);
    return {out.values().begin(), out.values().end()};
}

}  // namespace tgan::gan
