#pragma once

#include <cmath>
#include <stdexcept>
#include <vector>

#include "blockforge/nn/net.hpp"

namespace blockforge::nn {

struct AdamState {
    double lr = 1e-4;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    long long t = 0;
    std::vector<Mat> m, v;

    void init_like(const Params& p) {
        m.clear();
        v.clear();
        for (const auto& x : p.t) {
            m.emplace_back(x.rows, x.cols);
            v.emplace_back(x.rows, x.cols);
        }
        t = 0;
    }

    void step(Params& p, const std::vector<Mat>& grads) {
        if (m.size() != p.t.size()) throw std::logic_error("adam state not initialized");
        t += 1;
        double c1 = 1.0 - std::pow(beta1, static_cast<double>(t));
        double c2 = 1.0 - std::pow(beta2, static_cast<double>(t));
        for (size_t i = 0; i < p.t.size(); ++i) {
            auto& pm = m[i].a;
            auto& pv = v[i].a;
            auto& px = p.t[i].a;
            const auto& g = grads[i].a;
            for (size_t k = 0; k < px.size(); ++k) {
                pm[k] = beta1 * pm[k] + (1.0 - beta1) * g[k];
                pv[k] = beta2 * pv[k] + (1.0 - beta2) * g[k] * g[k];
                px[k] -= lr * (pm[k] / c1) / (std::sqrt(pv[k] / c2) + eps);
            }
        }
    }
};

}  // namespace blockforge::nn
