#include "maxoutlab/tensor.hpp"

#include <cmath>
#include <numeric>
#include <sstream>

namespace maxoutlab {

namespace {

std::size_t shape_product(const std::vector<std::size_t>& shape) {
    std::size_t n = 1;
    for (std::size_t s : shape) n *= s;
    return n;
}

} // namespace

Tensor::Tensor(std::vector<std::size_t> s, std::vector<double> d)
    : shape(std::move(s)), data(std::move(d)) {
    if (shape_product(shape) != data.size())
        throw DimensionError("Tensor: shape " + shape_str() + " does not match data length " +
                             std::to_string(data.size()));
}

Tensor Tensor::zeros(std::vector<std::size_t> shape) {
    Tensor t;
    t.data.assign(shape_product(shape), 0.0);
    t.shape = std::move(shape);
    return t;
}

Tensor Tensor::full(std::vector<std::size_t> shape, double value) {
    Tensor t;
    t.data.assign(shape_product(shape), value);
    t.shape = std::move(shape);
    return t;
}

Tensor Tensor::identity(std::size_t n) {
    Tensor t = zeros({n, n});
    for (std::size_t i = 0; i < n; ++i) t.at(i, i) = 1.0;
    return t;
}

bool Tensor::all_finite() const {
    for (double v : data)
        if (!std::isfinite(v)) return false;
    return true;
}

std::string Tensor::shape_str() const {
    std::ostringstream out;
    out << "[";
    for (std::size_t i = 0; i < shape.size(); ++i) {
        if (i) out << "x";
        out << shape[i];
    }
    out << "]";
    return out.str();
}

Tensor matmul(const Tensor& a, const Tensor& b) {
    if (a.rank() != 2 || b.rank() != 2 || a.shape[1] != b.shape[0])
        throw DimensionError("matmul: incompatible shapes " + a.shape_str() + " and " +
                             b.shape_str());
    const std::size_t r = a.shape[0], s = a.shape[1], t = b.shape[0 + 1];
    Tensor c = Tensor::zeros({r, t});
    // ikj order: each c[i][j] accumulates terms in increasing k, matching the
    // naive ijk loop bit for bit while staying row-contiguous on b and c.
    for (std::size_t i = 0; i < r; ++i) {
        double* crow = &c.data[i * t];
        const double* arow = &a.data[i * s];
        for (std::size_t k = 0; k < s; ++k) {
            const double aik = arow[k];
            const double* brow = &b.data[k * t];
            for (std::size_t j = 0; j < t; ++j) crow[j] += aik * brow[j];
        }
    }
    return c;
}

Tensor matmul_tn(const Tensor& a, const Tensor& b) {
    if (a.rank() != 2 || b.rank() != 2 || a.shape[0] != b.shape[0])
        throw DimensionError("matmul_tn: incompatible shapes " + a.shape_str() + " and " +
                             b.shape_str());
    const std::size_t s = a.shape[0], r = a.shape[1], t = b.shape[1];
    Tensor c = Tensor::zeros({r, t});
    for (std::size_t k = 0; k < s; ++k) {
        const double* arow = &a.data[k * r];
        const double* brow = &b.data[k * t];
        for (std::size_t i = 0; i < r; ++i) {
            double* crow = &c.data[i * t];
            const double aki = arow[i];
            for (std::size_t j = 0; j < t; ++j) crow[j] += aki * brow[j];
        }
    }
    return c;
}

Tensor matmul_nt(const Tensor& a, const Tensor& b) {
    if (a.rank() != 2 || b.rank() != 2 || a.shape[1] != b.shape[1])
        throw DimensionError("matmul_nt: incompatible shapes " + a.shape_str() + " and " +
                             b.shape_str());
    const std::size_t r = a.shape[0], s = a.shape[1], t = b.shape[0];
    Tensor c = Tensor::zeros({r, t});
    for (std::size_t i = 0; i < r; ++i) {
        const double* arow = &a.data[i * s];
        double* crow = &c.data[i * t];
        for (std::size_t j = 0; j < t; ++j) {
            const double* brow = &b.data[j * s];
            double acc = 0.0;
            for (std::size_t k = 0; k < s; ++k) acc += arow[k] * brow[k];
            crow[j] = acc;
        }
    }
    return c;
}

MaxResult max_over_axis(const Tensor& t, std::size_t axis) {
    if (axis >= t.rank())
        throw DimensionError("max_over_axis: axis " + std::to_string(axis) +
                             " out of range for shape " + t.shape_str());
    const std::size_t extent = t.shape[axis];
    if (extent == 0)
        throw std::domain_error("max_over_axis: empty axis " + std::to_string(axis));

    std::size_t outer = 1, inner = 1;
    for (std::size_t i = 0; i < axis; ++i) outer *= t.shape[i];
    for (std::size_t i = axis + 1; i < t.rank(); ++i) inner *= t.shape[i];

    std::vector<std::size_t> out_shape;
    for (std::size_t i = 0; i < t.rank(); ++i)
        if (i != axis) out_shape.push_back(t.shape[i]);

    MaxResult res;
    res.values = Tensor::zeros(out_shape);
    res.indices.assign(outer * inner, 0);
    for (std::size_t o = 0; o < outer; ++o) {
        for (std::size_t in = 0; in < inner; ++in) {
            const double* base = &t.data[o * extent * inner + in];
            double best = base[0];
            std::size_t best_idx = 0;
            for (std::size_t e = 1; e < extent; ++e) {
                const double v = base[e * inner];
                if (v > best) {
                    best = v;
                    best_idx = e;
                }
            }
            res.values.data[o * inner + in] = best;
            res.indices[o * inner + in] = best_idx;
        }
    }
    return res;
}

Tensor sample_bernoulli(Prng& rng, double p, std::vector<std::size_t> shape) {
    if (!(p >= 0.0 && p <= 1.0))
        throw std::domain_error("sample_bernoulli: p=" + std::to_string(p) +
                                " outside [0,1]");
    Tensor t = Tensor::zeros(std::move(shape));
    for (double& v : t.data) v = rng.bernoulli(p) ? 1.0 : 0.0;
    return t;
}

Tensor sample_normal(Prng& rng, double mean, double stddev, std::vector<std::size_t> shape) {
    Tensor t = Tensor::zeros(std::move(shape));
    for (double& v : t.data) v = rng.normal(mean, stddev);
    return t;
}

} // namespace maxoutlab
