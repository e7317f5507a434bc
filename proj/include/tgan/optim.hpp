#pragma once

#include <memory>
#include <vector>

#include "tgan/tensor.hpp"

namespace tgan::optim {

class Optimizer {
  public:
    explicit Optimizer(std::vector<Tensor> params) : params_(std::move(params)) {}
    virtual ~Optimizer() = default;
    virtual void step() = 0;
    void zero_grad() {
        for (auto& p : params_) p.zero_grad();
    }
    const std::vector<Tensor>& params() const { return params_; }

  protected:
    std::vector<Tensor> params_;
};

struct AdamConfig {
    double lr = 2e-4;
    double beta1 = 0.5;
    double beta2 = 0.999;
    double eps = 1e-8;
};

class Adam : public Optimizer {
  public:
    Adam(std::vector<Tensor> params, AdamConfig cfg);
    void step() override;

  private:
    AdamConfig cfg_;
    std::vector<std::vector<double>> m_, v_;
    std::size_t t_ = 0;
};

class Sgd : public Optimizer {
  public:
    Sgd(std::vector<Tensor> params, double lr) : Optimizer(std::move(params)), lr_(lr) {}
    void step() override;

  private:
    double lr_;
};

std::unique_ptr<Optimizer> make_optimizer(const std::string& kind,
                                          std::vector<Tensor> params, double lr);

}  // namespace tgan::optim
