#include "kvda/params.hpp"

#include <cmath>
#include <stdexcept>

namespace kvda {

Eigen::MatrixXd& ParamStore::add(const std::string& name, Eigen::Index rows, Eigen::Index cols) {
    auto [it, inserted] = tensors_.emplace(name, Eigen::MatrixXd::Zero(rows, cols));
    if (!inserted) throw std::invalid_argument("duplicate parameter name: " + name);
    return it->second;
}

Eigen::MatrixXd& ParamStore::at(const std::string& name) {
    auto it = tensors_.find(name);
    if (it == tensors_.end()) throw std::out_of_range("no parameter named " + name);
    return it->second;
}

const Eigen::MatrixXd& ParamStore::at(const std::string& name) const {
    auto it = tensors_.find(name);
    if (it == tensors_.end()) throw std::out_of_range("no parameter named " + name);
    return it->second;
}

ParamStore ParamStore::zeros_like() const {
    ParamStore out;
    for (const auto& [name, m] : tensors_) out.add(name, m.rows(), m.cols());
    return out;
}

void ParamStore::set_zero() {
    for (auto& [name, m] : tensors_) m.setZero();
}

std::size_t ParamStore::count() const {
    std::size_t n = 0;
    for (const auto& [name, m] : tensors_) n += static_cast<std::size_t>(m.size());
    return n;
}

double ParamStore::get_flat(std::size_t i) const {
    for (const auto& [name, m] : tensors_) {
        const auto n = static_cast<std::size_t>(m.size());
        if (i < n) return m.data()[i];
        i -= n;
    }
    throw std::out_of_range("flat parameter index out of range");
}

void ParamStore::add_flat(std::size_t i, double delta) {
    for (auto& [name, m] : tensors_) {
        const auto n = static_cast<std::size_t>(m.size());
        if (i < n) {
            m.data()[i] += delta;
            return;
        }
        i -= n;
    }
    throw std::out_of_range("flat parameter index out of range");
}

void ParamStore::init_uniform(Eigen::MatrixXd& m, Eigen::Index fan_in, Rng& rng) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in > 0 ? fan_in : 1));
    for (Eigen::Index j = 0; j < m.cols(); ++j)
        for (Eigen::Index i = 0; i < m.rows(); ++i) m(i, j) = rng.uniform(-bound, bound);
}

void AdamOptimizer::step(ParamStore& params, const ParamStore& grads) {
    if (!initialized_) {
        m_ = params.zeros_like();
        v_ = params.zeros_like();
        initialized_ = true;
    }
    ++t_;
    const double bc1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
    const double bc2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
    for (auto& [name, p] : params) {
        const Eigen::MatrixXd& g = grads.at(name);
        Eigen::MatrixXd& m = m_.at(name);
        Eigen::MatrixXd& v = v_.at(name);
        m = beta1_ * m + (1.0 - beta1_) * g;
        v = beta2_ * v + (1.0 - beta2_) * g.cwiseProduct(g);
        const Eigen::MatrixXd mhat = m / bc1;
        const Eigen::MatrixXd vhat = v / bc2;
        p.array() -= lr_ * mhat.array() / (vhat.array().sqrt() + eps_);
    }
}

}  // namespace kvda
