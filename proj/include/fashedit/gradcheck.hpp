#pragma once

#include <algorithm>

#include "fashedit/params.hpp"

namespace fashedit {

struct GradCheckReport {
    double maxRelErr = 0.0;
    int coordsChecked = 0;
};

// Central finite differences against the analytic gradients produced by
// f(params, /*wantGrad=*/true). A seeded subset of coordinates is probed
// (default well above the 200-coordinate floor); step size is scaled
// per-coordinate by max(1, |theta|).
template <typename F>
GradCheckReport grad_check(F&& f, ParamStore<double>& params, double h = 1e-3, int maxCoords = 256,
                           uint64_t seed = 0x67636b31ULL) {
    if (h <= 0) fail(ErrorKind::RejectedConfig, "grad_check: h must be positive");
    params.zero_grads();
    (void)f(params, true);

    struct Coord {
        Param<double>* p;
        int64_t i;
        double analytic;
    };
    std::vector<Coord> coords;
    for (auto& [name, p] : params)
        for (int64_t i = 0; i < p.value.numel(); i++) coords.push_back({&p, i, p.grad[i]});

    Rng rng(mix64(seed, coords.size()));
    for (size_t i = coords.size(); i > 1; i--) std::swap(coords[i - 1], coords[rng.uniform_int(i)]);
    size_t n = std::min<size_t>(coords.size(), (size_t)maxCoords);

    GradCheckReport rep;
    rep.coordsChecked = (int)n;
    for (size_t k = 0; k < n; k++) {
        Coord& c = coords[k];
        double theta = c.p->value[c.i];
        double hi = h * std::max(1.0, std::abs(theta));
        c.p->value[c.i] = theta + hi;
        double fp = f(params, false);
        c.p->value[c.i] = theta - hi;
        double fm = f(params, false);
        c.p->value[c.i] = theta;
        double fd = (fp - fm) / (2.0 * hi);
        double rel = std::abs(c.analytic - fd) / std::max({1e-6, std::abs(c.analytic), std::abs(fd)});
        rep.maxRelErr = std::max(rep.maxRelErr, rel);
    }
    return rep;
}

}  // namespace fashedit
