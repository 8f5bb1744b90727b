#pragma once

#include <algorithm>
#include <cmath>
#include <vector>

#include "blockforge/nn/net.hpp"
#include "blockforge/rng.hpp"

namespace blockforge::nn {

struct GradCheckReport {
    double max_rel_err = 0.0;
    int checked = 0;
    int skipped = 0;  // finite-difference probes that crossed a relu kink

    bool pass(double tol) const { return checked > 0 && max_rel_err < tol; }
};

namespace detail {

struct LossEval {
    double loss;
    std::vector<std::uint64_t> signs;
};

inline LossEval eval_loss(const GNParams& net, const GraphSpec& spec, const GraphInputs& in,
                          int n_rec, const Mat& loss_weights, bool trace) {
    Tape t;
    t.set_sign_tracing(trace);
    auto fw = gn_forward_tape(t, net, spec, in, n_rec, false);
    const Mat& q = t.val(fw.q_edges);
    double loss = 0.0;
    for (size_t i = 0; i < q.size(); ++i) loss += q.a[i] * loss_weights.a[i];
    return {loss, t.sign_trace()};
}

}  // namespace detail

// Central finite differences against the tape gradients of a fixed random
// linear readout of the edge Q matrix. Probes whose +/- h evaluations land
// on different sides of a relu kink are skipped: the finite difference is
// invalid there, not the gradient.
inline GradCheckReport grad_check(const GNParams& net, const GraphSpec& spec,
                                  const GraphInputs& in, int n_rec, Rng rng, double h = 1e-5,
                                  int samples_per_tensor = 3) {
    Mat q0 = gn_forward(net, spec, in, n_rec);
    Mat w(q0.rows, q0.cols);
    for (auto& x : w.a) x = rng.uniform(-1.0, 1.0);

    Tape t;
    auto fw = gn_forward_tape(t, net, spec, in, n_rec, true);
    auto wref = t.leaf(w);
    auto loss_ref = t.sum_all(t.mul(fw.q_edges, wref));
    t.backward(loss_ref);

    GradCheckReport rep;
    GNParams probe = net;  // mutated in place for FD evaluations
    for (size_t ti = 0; ti < net.p.t.size(); ++ti) {
        const Mat& analytic = t.grad(fw.param_refs[ti]);
        size_t n = net.p.t[ti].size();
        for (int s = 0; s < samples_per_tensor; ++s) {
            size_t k = static_cast<size_t>(rng.uniform_int(n));
            double keep = probe.p.t[ti].a[k];
            probe.p.t[ti].a[k] = keep + h;
            auto up = detail::eval_loss(probe, spec, in, n_rec, w, true);
            probe.p.t[ti].a[k] = keep - h;
            auto dn = detail::eval_loss(probe, spec, in, n_rec, w, true);
            probe.p.t[ti].a[k] = keep;
            if (up.signs != dn.signs) {
                rep.skipped += 1;
                continue;
            }
            double fd = (up.loss - dn.loss) / (2.0 * h);
            double ga = analytic.a[k];
            double rel = std::abs(ga - fd) / std::max({std::abs(ga), std::abs(fd), 1e-5});
            rep.max_rel_err = std::max(rep.max_rel_err, rel);
            rep.checked += 1;
        }
    }
    return rep;
}

}  // namespace blockforge::nn
