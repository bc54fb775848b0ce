// Copyright (c) 2026 rdlab authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "rdlab/dense.hpp"
#include "rdlab/eig.hpp"

namespace rdlab::optim {

struct ParamBlock {
    std::string id;
    DenseMatrix value;
};

struct StepConfig {
    double lr = 1e-2;
};

using Blocks = std::vector<DenseMatrix>;
using Params = std::vector<ParamBlock>;

namespace detail {

inline void check_step_inputs(const Params& params, const Blocks& grads,
                              const StepConfig& cfg) {
    if (cfg.lr <= 0.0) {
        throw std::invalid_argument("StepConfig: lr must be positive");
    }
    if (params.size() != grads.size()) {
        throw std::invalid_argument("step: params/grads block count mismatch");
    }
    for (std::size_t b = 0; b < params.size(); ++b) {
        if (!params[b].value.same_shape(grads[b])) {
            throw std::invalid_argument("step: shape mismatch in block '" + params[b].id + "'");
        }
    }
}

}  // namespace detail

/// All step functions fold the leading minus sign and the learning rate
/// into the returned update, so params' = params + update everywhere.
///
/// precondition() applies the optimizer's current preconditioner to an
/// arbitrary gradient without touching state and without momentum, i.e.
/// it returns p = -P g. It is the probe used to extract the component
/// update directions p_R and p_D.

class SgdOptimizer {
public:
    Blocks step(Params& params, const Blocks& grads, const StepConfig& cfg) {
        detail::check_step_inputs(params, grads, cfg);
        Blocks updates;
        updates.reserve(grads.size());
        for (std::size_t b = 0; b < grads.size(); ++b) {
            updates.push_back(cwise(grads[b], [&](double g) { return -cfg.lr * g; }));
            params[b].value += updates.back();
        }
        return updates;
    }

    Blocks precondition(const Blocks& grads) const {
        Blocks out;
        out.reserve(grads.size());
        for (const auto& g : grads) out.push_back(cwise(g, [](double x) { return -x; }));
        return out;
    }
};

class SignOptimizer {
public:
    Blocks step(Params& params, const Blocks& grads, const StepConfig& cfg) {
        detail::check_step_inputs(params, grads, cfg);
        Blocks updates;
        updates.reserve(grads.size());
        for (std::size_t b = 0; b < grads.size(); ++b) {
            updates.push_back(
                cwise(grads[b], [&](double g) { return -cfg.lr * rdlab::sign(g); }));
            params[b].value += updates.back();
        }
        return updates;
    }

    Blocks precondition(const Blocks& grads) const {
        Blocks out;
        out.reserve(grads.size());
        for (const auto& g : grads)
            out.push_back(cwise(g, [](double x) { return -rdlab::sign(x); }));
        return out;
    }
};

struct AdamSettings {
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;

    void validate() const {
        if (beta1 < 0.0 || beta1 >= 1.0 || beta2 <= 0.0 || beta2 >= 1.0) {
            throw std::invalid_argument("AdamSettings: betas must lie in [0,1)");
        }
        if (eps <= 0.0) {
            throw std::invalid_argument("AdamSettings: eps must be positive");
        }
    }
};

class AdamOptimizer {
public:
    explicit AdamOptimizer(AdamSettings settings = {}) : settings_(settings) {
        settings_.validate();
    }

    Blocks step(Params& params, const Blocks& grads, const StepConfig& cfg) {
        detail::check_step_inputs(params, grads, cfg);
        ensure_state(grads);
        ++t_;
        const double bc1 = 1.0 - std::pow(settings_.beta1, static_cast<double>(t_));
        const double bc2 = 1.0 - std::pow(settings_.beta2, static_cast<double>(t_));
        Blocks updates;
        updates.reserve(grads.size());
        for (std::size_t b = 0; b < grads.size(); ++b) {
            m_[b] = cwise(m_[b], grads[b], [&](double m, double g) {
                return settings_.beta1 * m + (1.0 - settings_.beta1) * g;
            });
            v_[b] = cwise(v_[b], grads[b], [&](double v, double g) {
                return settings_.beta2 * v + (1.0 - settings_.beta2) * g * g;
            });
            updates.push_back(cwise(m_[b], v_[b], [&](double m, double v) {
                return -cfg.lr * (m / bc1) / (std::sqrt(v / bc2) + settings_.eps);
            }));
            params[b].value += updates.back();
        }
        return updates;
    }

    Blocks precondition(const Blocks& grads) const {
        const double bc2 =
            t_ > 0 ? 1.0 - std::pow(settings_.beta2, static_cast<double>(t_)) : 1.0;
        Blocks out;
        out.reserve(grads.size());
        for (std::size_t b = 0; b < grads.size(); ++b) {
            if (b < v_.size()) {
                out.push_back(cwise(grads[b], v_[b], [&](double g, double v) {
                    return -g / (std::sqrt(v / bc2) + settings_.eps);
                }));
            } else {
                out.push_back(cwise(grads[b], [&](double g) { return -g / settings_.eps; }));
            }
        }
        return out;
    }

    const AdamSettings& settings() const { return settings_; }
    long step_count() const { return t_; }
    std::vector<DenseMatrix>& second_moments() { return v_; }
    const std::vector<DenseMatrix>& second_moments() const { return v_; }
    std::vector<DenseMatrix>& first_moments() { return m_; }

private:
    void ensure_state(const Blocks& grads) {
        if (m_.empty()) {
            for (const auto& g : grads) {
                m_.emplace_back(g.rows(), g.cols());
                v_.emplace_back(g.rows(), g.cols());
            }
        } else if (m_.size() != grads.size()) {
            throw std::invalid_argument("AdamOptimizer: block count changed between steps");
        }
    }

    AdamSettings settings_;
    std::vector<DenseMatrix> m_;
    std::vector<DenseMatrix> v_;
    long t_ = 0;
};

class AdagradOptimizer {
public:
    explicit AdagradOptimizer(double eps = 1e-8) : eps_(eps) {
        if (eps <= 0.0) {
            throw std::invalid_argument("AdagradOptimizer: eps must be positive");
        }
    }

    Blocks step(Params& params, const Blocks& grads, const StepConfig& cfg) {
        detail::check_step_inputs(params, grads, cfg);
        ensure_state(grads);
        Blocks updates;
        updates.reserve(grads.size());
        for (std::size_t b = 0; b < grads.size(); ++b) {
            accum_[b] = cwise(accum_[b], grads[b],
                              [](double a, double g) { return a + g * g; });
            updates.push_back(cwise(grads[b], accum_[b], [&](double g, double a) {
                return -cfg.lr * g / (std::sqrt(a) + eps_);
            }));
            params[b].value += updates.back();
        }
        return updates;
    }

    Blocks precondition(const Blocks& grads) const {
        Blocks out;
        out.reserve(grads.size());
        for (std::size_t b = 0; b < grads.size(); ++b) {
            if (b < accum_.size()) {
                out.push_back(cwise(grads[b], accum_[b], [&](double g, double a) {
                    return -g / (std::sqrt(a) + eps_);
                }));
            } else {
                out.push_back(cwise(grads[b], [&](double g) { return -g / eps_; }));
            }
        }
        return out;
    }

private:
    void ensure_state(const Blocks& grads) {
        if (accum_.empty()) {
            for (const auto& g : grads) accum_.emplace_back(g.rows(), g.cols());
        } else if (accum_.size() != grads.size()) {
            throw std::invalid_argument("AdagradOptimizer: block count changed between steps");
        }
    }

    double eps_;
    std::vector<DenseMatrix> accum_;
};

struct KroneckerSettings {
    double ema_decay = 0.95;
    double damping = 1e-6;
    long update_freq = 10;

    void validate() const {
        if (ema_decay <= 0.0 || ema_decay >= 1.0) {
            throw std::invalid_argument("KroneckerSettings: ema_decay must lie in (0,1)");
        }
        if (damping <= 0.0) {
            throw std::invalid_argument("KroneckerSettings: damping must be positive");
        }
        if (update_freq < 1) {
            throw std::invalid_argument("KroneckerSettings: update_freq must be >= 1");
        }
    }
};

/// Shampoo with inverse fourth roots on both sides of matrix blocks.
/// Vector-shaped blocks degenerate to one factor, preconditioned with
/// the inverse square root so the overall H^(-1/2) scaling is kept.
class ShampooOptimizer {
public:
    explicit ShampooOptimizer(KroneckerSettings settings = {}) : settings_(settings) {
        settings_.validate();
    }

    Blocks step(Params& params, const Blocks& grads, const StepConfig& cfg) {
        detail::check_step_inputs(params, grads, cfg);
        ensure_state(grads);
        for (std::size_t b = 0; b < grads.size(); ++b) {
            accumulate(states_[b], grads[b]);
        }
        if (t_ % settings_.update_freq == 0) {
            recompute_roots();
        }
        ++t_;
        Blocks updates;
        updates.reserve(grads.size());
        for (std::size_t b = 0; b < grads.size(); ++b) {
            updates.push_back(apply_roots(states_[b], grads[b], -cfg.lr));
            params[b].value += updates.back();
        }
        return updates;
    }

    Blocks precondition(const Blocks& grads) const {
        Blocks out;
        out.reserve(grads.size());
        for (std::size_t b = 0; b < grads.size(); ++b) {
            if (b < states_.size() && states_[b].has_roots) {
                out.push_back(apply_roots(states_[b], grads[b], -1.0));
            } else if (b < states_.size()) {
                BlockState fresh = states_[b];
                compute_roots(fresh);
                out.push_back(apply_roots(fresh, grads[b], -1.0));
            } else {
                const double scale = -1.0 / std::sqrt(settings_.damping);
                out.push_back(cwise(grads[b], [&](double g) { return scale * g; }));
            }
        }
        return out;
    }

    struct BlockState {
        bool left = false;   // G G^T factor tracked
        bool right = false;  // G^T G factor tracked
        DenseMatrix l_ema;
        DenseMatrix r_ema;
        DenseMatrix l_root;
        DenseMatrix r_root;
        bool has_roots = false;
    };

    std::vector<BlockState>& block_states() { return states_; }
    const KroneckerSettings& settings() const { return settings_; }

    void recompute_roots() {
        for (auto& st : states_) compute_roots(st);
    }

private:
    void ensure_state(const Blocks& grads) {
        if (states_.empty()) {
            for (const auto& g : grads) {
                BlockState st;
                st.left = !(g.rows() == 1 && g.cols() > 1);
                st.right = g.cols() > 1;
                if (st.left) st.l_ema = DenseMatrix(g.rows(), g.rows());
                if (st.right) st.r_ema = DenseMatrix(g.cols(), g.cols());
                states_.push_back(std::move(st));
            }
        } else if (states_.size() != grads.size()) {
            throw std::invalid_argument("ShampooOptimizer: block count changed between steps");
        }
    }

    void accumulate(BlockState& st, const DenseMatrix& g) {
        const double b = settings_.ema_decay;
        if (st.left) {
            DenseMatrix ggt = matmul(g, g.transpose());
            st.l_ema = cwise(st.l_ema, ggt,
                             [b](double e, double x) { return b * e + (1.0 - b) * x; });
        }
        if (st.right) {
            DenseMatrix gtg = matmul(g.transpose(), g);
            st.r_ema = cwise(st.r_ema, gtg,
                             [b](double e, double x) { return b * e + (1.0 - b) * x; });
        }
    }

    void compute_roots(BlockState& st) const {
        const bool two_sided = st.left && st.right;
        const double expo = two_sided ? 0.25 : 0.5;
        if (st.left) st.l_root = spd_inv_power(st.l_ema, expo, settings_.damping);
        if (st.right) st.r_root = spd_inv_power(st.r_ema, expo, settings_.damping);
        st.has_roots = true;
    }

    static DenseMatrix apply_roots(const BlockState& st, const DenseMatrix& g, double scale) {
        DenseMatrix p = g;
        if (st.left) p = matmul(st.l_root, p);
        if (st.right) p = matmul(p, st.r_root);
        p *= scale;
        return p;
    }

    KroneckerSettings settings_;
    std::vector<BlockState> states_;
    long t_ = 0;
};

struct SoapSettings {
    KroneckerSettings factors;  // update_freq doubles as the refresh period T
    AdamSettings adam;

    void validate() const {
        factors.validate();
        adam.validate();
    }
};

/// SOAP: Shampoo-style factor EMAs provide an eigenbasis, and an Adam
/// update runs in the rotated space. The basis is refreshed every
/// factors.update_freq steps (forced at step 0); at each refresh the
/// rotated first moment is mapped exactly through the basis change and
/// the second moment through its entrywise square.
class SoapOptimizer {
public:
    explicit SoapOptimizer(SoapSettings settings = {}) : settings_(settings) {
        settings_.validate();
    }

    Blocks step(Params& params, const Blocks& grads, const StepConfig& cfg) {
        detail::check_step_inputs(params, grads, cfg);
        ensure_state(grads);
        for (std::size_t b = 0; b < grads.size(); ++b) {
            accumulate(states_[b], grads[b]);
        }
        if (t_ % settings_.factors.update_freq == 0) {
            refresh_basis();
        }
        ++t_;
        const double bc1 = 1.0 - std::pow(settings_.adam.beta1, static_cast<double>(t_));
        const double bc2 = 1.0 - std::pow(settings_.adam.beta2, static_cast<double>(t_));
        Blocks updates;
        updates.reserve(grads.size());
        for (std::size_t b = 0; b < grads.size(); ++b) {
            BlockState& st = states_[b];
            const DenseMatrix gr = rotate(st, grads[b]);
            st.m = cwise(st.m, gr, [&](double m, double g) {
                return settings_.adam.beta1 * m + (1.0 - settings_.adam.beta1) * g;
            });
            st.v = cwise(st.v, gr, [&](double v, double g) {
                return settings_.adam.beta2 * v + (1.0 - settings_.adam.beta2) * g * g;
            });
            const DenseMatrix dir = cwise(st.m, st.v, [&](double m, double v) {
                return (m / bc1) / (std::sqrt(v / bc2) + settings_.adam.eps);
            });
            DenseMatrix update = unrotate(st, dir);
            update *= -cfg.lr;
            updates.push_back(std::move(update));
            params[b].value += updates.back();
        }
        return updates;
    }

    Blocks precondition(const Blocks& grads) const {
        const double bc2 =
            t_ > 0 ? 1.0 - std::pow(settings_.adam.beta2, static_cast<double>(t_)) : 1.0;
        Blocks out;
        out.reserve(grads.size());
        for (std::size_t b = 0; b < grads.size(); ++b) {
            if (b >= states_.size()) {
                out.push_back(
                    cwise(grads[b], [&](double g) { return -g / settings_.adam.eps; }));
                continue;
            }
            const BlockState& st = states_[b];
            const DenseMatrix gr = rotate(st, grads[b]);
            const DenseMatrix dir = cwise(gr, st.v, [&](double g, double v) {
                return -g / (std::sqrt(v / bc2) + settings_.adam.eps);
            });
            out.push_back(unrotate(st, dir));
        }
        return out;
    }

    /// Recompute the eigenbases from the factor EMAs and re-project the
    /// rotated Adam moments into the new bases.
    void refresh_basis() {
        for (auto& st : states_) {
            if (st.left) {
                const DenseMatrix damped = damped_factor(st.l_ema);
                DenseMatrix q_new = sym_eig(damped).eigenvectors;
                const DenseMatrix rot = matmul(q_new.transpose(), st.q_l);
                reproject_left(st, rot);
                st.q_l = std::move(q_new);
            }
            if (st.right) {
                const DenseMatrix damped = damped_factor(st.r_ema);
                DenseMatrix q_new = sym_eig(damped).eigenvectors;
                const DenseMatrix rot = matmul(q_new.transpose(), st.q_r);
                reproject_right(st, rot);
                st.q_r = std::move(q_new);
            }
        }
    }

    struct BlockState {
        bool left = false;
        bool right = false;
        DenseMatrix l_ema;
        DenseMatrix r_ema;
        DenseMatrix q_l;
        DenseMatrix q_r;
        DenseMatrix m;
        DenseMatrix v;
    };

    std::vector<BlockState>& block_states() { return states_; }
    const SoapSettings& settings() const { return settings_; }
    long step_count() const { return t_; }

private:
    void ensure_state(const Blocks& grads) {
        if (states_.empty()) {
            for (const auto& g : grads) {
                BlockState st;
                st.left = !(g.rows() == 1 && g.cols() > 1);
                st.right = g.cols() > 1;
                if (st.left) {
                    st.l_ema = DenseMatrix(g.rows(), g.rows());
                    st.q_l = DenseMatrix::identity(g.rows());
                }
                if (st.right) {
                    st.r_ema = DenseMatrix(g.cols(), g.cols());
                    st.q_r = DenseMatrix::identity(g.cols());
                }
                st.m = DenseMatrix(g.rows(), g.cols());
                st.v = DenseMatrix(g.rows(), g.cols());
                states_.push_back(std::move(st));
            }
        } else if (states_.size() != grads.size()) {
            throw std::invalid_argument("SoapOptimizer: block count changed between steps");
        }
    }

    DenseMatrix damped_factor(const DenseMatrix& ema) const {
        DenseMatrix out = ema;
        for (std::size_t i = 0; i < out.rows(); ++i) out(i, i) += settings_.factors.damping;
        return out;
    }

    void accumulate(BlockState& st, const DenseMatrix& g) {
        const double b = settings_.factors.ema_decay;
        if (st.left) {
            DenseMatrix ggt = matmul(g, g.transpose());
            st.l_ema = cwise(st.l_ema, ggt,
                             [b](double e, double x) { return b * e + (1.0 - b) * x; });
        }
        if (st.right) {
            DenseMatrix gtg = matmul(g.transpose(), g);
            st.r_ema = cwise(st.r_ema, gtg,
                             [b](double e, double x) { return b * e + (1.0 - b) * x; });
        }
    }

    static DenseMatrix rotate(const BlockState& st, const DenseMatrix& g) {
        DenseMatrix out = g;
        if (st.left) out = matmul(st.q_l.transpose(), out);
        if (st.right) out = matmul(out, st.q_r);
        return out;
    }

    static DenseMatrix unrotate(const BlockState& st, const DenseMatrix& g) {
        DenseMatrix out = g;
        if (st.left) out = matmul(st.q_l, out);
        if (st.right) out = matmul(out, st.q_r.transpose());
        return out;
    }

    static void reproject_left(BlockState& st, const DenseMatrix& rot) {
        st.m = matmul(rot, st.m);
        const DenseMatrix rot2 = cwise(rot, [](double x) { return x * x; });
        st.v = matmul(rot2, st.v);
    }

    static void reproject_right(BlockState& st, const DenseMatrix& rot) {
        st.m = matmul(st.m, rot.transpose());
        const DenseMatrix rot2 = cwise(rot, [](double x) { return x * x; });
        st.v = matmul(st.v, rot2.transpose());
    }

    SoapSettings settings_;
    std::vector<BlockState> states_;
    long t_ = 0;
};

/// Damped exact Newton on a single vector block whose full Hessian is
/// known. update = -lr (H + damping I)^{-1} g.
class NewtonOptimizer {
public:
    NewtonOptimizer(DenseMatrix hessian, double damping)
        : damping_(damping), inverse_(spd_inv_power(hessian, 1.0, damping)) {}

    Blocks step(Params& params, const Blocks& grads, const StepConfig& cfg) {
        detail::check_step_inputs(params, grads, cfg);
        check_blocks(grads);
        DenseMatrix update = matmul(inverse_, grads[0]);
        update *= -cfg.lr;
        params[0].value += update;
        return {std::move(update)};
    }

    Blocks precondition(const Blocks& grads) const {
        check_blocks(grads);
        DenseMatrix p = matmul(inverse_, grads[0]);
        p *= -1.0;
        return {std::move(p)};
    }

    const DenseMatrix& inverse() const { return inverse_; }
    double damping() const { return damping_; }

private:
    void check_blocks(const Blocks& grads) const {
        if (grads.size() != 1 || grads[0].cols() != 1 || grads[0].rows() != inverse_.rows()) {
            throw std::invalid_argument(
                "NewtonOptimizer: expects a single vector block matching the Hessian");
        }
    }

    double damping_;
    DenseMatrix inverse_;
};

inline DenseMatrix exact_newton_step(const DenseMatrix& hessian, const DenseMatrix& grad,
                                     const StepConfig& cfg, double damping) {
    if (cfg.lr <= 0.0) {
        throw std::invalid_argument("exact_newton_step: lr must be positive");
    }
    if (grad.cols() != 1 || grad.rows() != hessian.rows()) {
        throw std::invalid_argument("exact_newton_step: gradient shape mismatch");
    }
    const DenseMatrix inv = spd_inv_power(hessian, 1.0, damping);
    DenseMatrix update = matmul(inv, grad);
    update *= -cfg.lr;
    return update;
}

using Optimizer = std::variant<SgdOptimizer, SignOptimizer, AdamOptimizer, AdagradOptimizer,
                               ShampooOptimizer, SoapOptimizer, NewtonOptimizer>;

inline Blocks step(Optimizer& opt, Params& params, const Blocks& grads, const StepConfig& cfg) {
    return std::visit([&](auto& o) { return o.step(params, grads, cfg); }, opt);
}

inline Blocks precondition(const Optimizer& opt, const Blocks& grads) {
    return std::visit([&](const auto& o) { return o.precondition(grads); }, opt);
}

}  // namespace rdlab::optim
