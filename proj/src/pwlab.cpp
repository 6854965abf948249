#include "maxoutlab/pwlab.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace maxoutlab {

double PwlFunction::value(double x) const {
    const std::size_t n = xs.size();
    if (n < 2) throw std::invalid_argument("PwlFunction: need at least 2 breakpoints");
    std::size_t hi = std::upper_bound(xs.begin(), xs.end(), x) - xs.begin();
    hi = std::min(std::max<std::size_t>(hi, 1), n - 1);
    const std::size_t lo = hi - 1;
    const double t = (x - xs[lo]) / (xs[hi] - xs[lo]);
    return ys[lo] + t * (ys[hi] - ys[lo]);
}

double ConvexPwl::value(double x) const {
    if (pieces.empty()) throw std::invalid_argument("ConvexPwl: no pieces");
    double best = pieces[0].first * x + pieces[0].second;
    for (std::size_t j = 1; j < pieces.size(); ++j)
        best = std::max(best, pieces[j].first * x + pieces[j].second);
    return best;
}

ConvexPwl ConvexPwl::from_convex_pwl(const PwlFunction& g) {
    ConvexPwl h;
    for (std::size_t i = 0; i + 1 < g.xs.size(); ++i) {
        const double w = (g.ys[i + 1] - g.ys[i]) / (g.xs[i + 1] - g.xs[i]);
        const double b = g.ys[i] - w * g.xs[i];
        if (!h.pieces.empty() && h.pieces.back().first == w) continue;
        h.pieces.emplace_back(w, b);
    }
    return h;
}

PwlFunction interpolate_pwl(const std::function<double(double)>& f, double a, double b,
                            std::size_t n_breakpoints) {
    if (!(a < b)) throw std::domain_error("interpolate_pwl: need a < b");
    if (n_breakpoints < 2) throw std::domain_error("interpolate_pwl: need >= 2 breakpoints");
    PwlFunction g;
    g.xs.reserve(n_breakpoints);
    g.ys.reserve(n_breakpoints);
    for (std::size_t i = 0; i < n_breakpoints; ++i) {
        const double x = a + (b - a) * static_cast<double>(i) /
                                 static_cast<double>(n_breakpoints - 1);
        const double y = f(x);
        if (!std::isfinite(y))
            throw std::domain_error("interpolate_pwl: non-finite value at x=" +
                                    std::to_string(x));
        g.xs.push_back(x);
        g.ys.push_back(y);
    }
    return g;
}

std::pair<ConvexPwl, ConvexPwl> dc_decompose(const PwlFunction& g) {
    const std::size_t n = g.xs.size();
    if (n < 2) throw std::invalid_argument("dc_decompose: need at least 2 breakpoints");

    std::vector<double> slopes(n - 1);
    for (std::size_t i = 0; i + 1 < n; ++i)
        slopes[i] = (g.ys[i + 1] - g.ys[i]) / (g.xs[i + 1] - g.xs[i]);

    // h2 accumulates hinge terms at every concave kink: flat on the first
    // segment, slope grows by |delta| wherever g's slope change is negative
    PwlFunction h2;
    h2.xs = g.xs;
    h2.ys.assign(n, 0.0);
    double s = 0.0;
    for (std::size_t i = 0; i + 1 < n; ++i) {
        if (i > 0) {
            const double delta = slopes[i] - slopes[i - 1];
            if (delta < 0.0) s += -delta;
        }
        h2.ys[i + 1] = h2.ys[i] + s * (g.xs[i + 1] - g.xs[i]);
    }

    PwlFunction h1;
    h1.xs = g.xs;
    h1.ys.resize(n);
    for (std::size_t i = 0; i < n; ++i) h1.ys[i] = g.ys[i] + h2.ys[i];

    return {ConvexPwl::from_convex_pwl(h1), ConvexPwl::from_convex_pwl(h2)};
}

LayerParams convex_to_maxout(const ConvexPwl& h) {
    const std::size_t k = h.pieces.size();
    if (k == 0) throw std::invalid_argument("convex_to_maxout: no pieces");
    LayerParams p;
    p.W = Tensor::zeros({1, 1, k});
    p.b = Tensor::zeros({1, k});
    for (std::size_t j = 0; j < k; ++j) {
        p.W.at(0, 0, j) = h.pieces[j].first;
        p.b.at(0, j) = h.pieces[j].second;
    }
    return p;
}

std::vector<double> eval_scalar_network(const NetworkSpec& spec, const Parameters& params,
                                        const std::vector<double>& xs) {
    Tensor x = Tensor::zeros({xs.size(), 1});
    x.data = xs;
    const ForwardTrace trace = forward(params, spec, x);
    return trace.h.back().data;
}

TwoUnitApproximator build_two_unit_approximator(const std::function<double(double)>& f, double a,
                                                double b, std::size_t n_breakpoints,
                                                std::size_t grid_points) {
    TwoUnitApproximator out;
    out.interpolant = interpolate_pwl(f, a, b, n_breakpoints);
    auto [h1, h2] = dc_decompose(out.interpolant);

    const std::size_t k = std::max(h1.pieces.size(), h2.pieces.size());
    // shorter piece lists are padded by repeating their first piece, which
    // leaves the max unchanged
    auto padded = [&](const ConvexPwl& h) {
        ConvexPwl p = h;
        while (p.pieces.size() < k) p.pieces.push_back(p.pieces.front());
        return p;
    };
    const ConvexPwl p1 = padded(h1), p2 = padded(h2);

    out.spec.input_dim = 1;
    out.spec.layers = {LayerKind::maxout(2, static_cast<int>(k)), LayerKind::linear(1)};

    LayerParams maxout_layer;
    maxout_layer.W = Tensor::zeros({1, 2, k});
    maxout_layer.b = Tensor::zeros({2, k});
    for (std::size_t j = 0; j < k; ++j) {
        maxout_layer.W.at(0, 0, j) = p1.pieces[j].first;
        maxout_layer.b.at(0, j) = p1.pieces[j].second;
        maxout_layer.W.at(0, 1, j) = p2.pieces[j].first;
        maxout_layer.b.at(1, j) = p2.pieces[j].second;
    }
    LayerParams output_layer;
    output_layer.W = Tensor::zeros({2, 1, 1});
    output_layer.W.at(0, 0, 0) = 1.0;
    output_layer.W.at(1, 0, 0) = -1.0;
    output_layer.b = Tensor::zeros({1, 1});

    out.params = {std::move(maxout_layer), std::move(output_layer)};

    std::vector<double> grid(grid_points);
    for (std::size_t i = 0; i < grid_points; ++i)
        grid[i] = a + (b - a) * static_cast<double>(i) / static_cast<double>(grid_points - 1);
    const std::vector<double> net = eval_scalar_network(out.spec, out.params, grid);

    out.sup_error = 0.0;
    out.network_vs_interpolant = 0.0;
    for (std::size_t i = 0; i < grid_points; ++i) {
        out.sup_error = std::max(out.sup_error, std::abs(net[i] - f(grid[i])));
        out.network_vs_interpolant =
            std::max(out.network_vs_interpolant, std::abs(net[i] - out.interpolant.value(grid[i])));
    }
    return out;
}

} // namespace maxoutlab
