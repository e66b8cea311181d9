#pragma once

#include <Eigen/Core>
#include <map>
#include <string>
#include <vector>

#include "kvda/rng.hpp"

namespace kvda {

/// Named parameter tensors with deterministic iteration order. Vectors are
/// stored as n x 1 matrices. Gradient and optimizer-moment stores reuse the
/// same type with matching shapes.
class ParamStore {
public:
    Eigen::MatrixXd& add(const std::string& name, Eigen::Index rows, Eigen::Index cols);
    Eigen::MatrixXd& at(const std::string& name);
    const Eigen::MatrixXd& at(const std::string& name) const;
    bool has(const std::string& name) const { return tensors_.count(name) > 0; }

    ParamStore zeros_like() const;
    void set_zero();
    std::size_t count() const;  // total scalar count

    /// Flat scalar view across all tensors in name order; used by the
    /// optimizer and finite-difference checks.
    double get_flat(std::size_t i) const;
    void add_flat(std::size_t i, double delta);

    auto begin() { return tensors_.begin(); }
    auto end() { return tensors_.end(); }
    auto begin() const { return tensors_.begin(); }
    auto end() const { return tensors_.end(); }
    std::size_t size() const { return tensors_.size(); }

    /// Uniform +-1/sqrt(fan_in) init for a weight of the given fan-in.
    static void init_uniform(Eigen::MatrixXd& m, Eigen::Index fan_in, Rng& rng);

private:
    std::map<std::string, Eigen::MatrixXd> tensors_;
};

/// Adaptive-moment gradient step with bias correction.
class AdamOptimizer {
public:
    explicit AdamOptimizer(double lr, double beta1 = 0.9, double beta2 = 0.999,
                           double eps = 1e-8)
        : lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps) {}

    void step(ParamStore& params, const ParamStore& grads);
    long step_count() const { return t_; }

private:
    double lr_, beta1_, beta2_, eps_;
    long t_ = 0;
    ParamStore m_, v_;
    bool initialized_ = false;
};

}  // namespace kvda
