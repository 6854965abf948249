#ifndef MAXOUTLAB_TENSOR_HPP
#define MAXOUTLAB_TENSOR_HPP

#include <cstddef>
#include <initializer_list>
#include <stdexcept>
#include <string>
#include <vector>

#include "maxoutlab/prng.hpp"

namespace maxoutlab {

/// Thrown when tensor shapes do not line up; the message names both shapes.
class DimensionError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// Dense row-major array of doubles with shape metadata.
struct Tensor {
    std::vector<std::size_t> shape;
    std::vector<double> data;

    Tensor() = default;
    Tensor(std::vector<std::size_t> s, std::vector<double> d);

    static Tensor zeros(std::vector<std::size_t> shape);
    static Tensor full(std::vector<std::size_t> shape, double value);
    static Tensor identity(std::size_t n);

    std::size_t size() const { return data.size(); }
    std::size_t rank() const { return shape.size(); }

    double& at(std::size_t i) { return data[i]; }
    double at(std::size_t i) const { return data[i]; }
    double& at(std::size_t i, std::size_t j) { return data[i * shape[1] + j]; }
    double at(std::size_t i, std::size_t j) const { return data[i * shape[1] + j]; }
    double& at(std::size_t i, std::size_t j, std::size_t k) {
        return data[(i * shape[1] + j) * shape[2] + k];
    }
    double at(std::size_t i, std::size_t j, std::size_t k) const {
        return data[(i * shape[1] + j) * shape[2] + k];
    }

    bool same_shape(const Tensor& other) const { return shape == other.shape; }
    bool all_finite() const;

    std::string shape_str() const;
};

/// c[i][j] = sum_k a[i][k] * b[k][j], accumulated in increasing k order
/// (bit-identical to the naive triple loop).
Tensor matmul(const Tensor& a, const Tensor& b);

/// a^T * b for a of shape s x r, b of shape s x t -> r x t.  Same k-order
/// accumulation contract as matmul.
Tensor matmul_tn(const Tensor& a, const Tensor& b);

/// a * b^T for a of shape r x s, b of shape t x s -> r x t.
Tensor matmul_nt(const Tensor& a, const Tensor& b);

struct MaxResult {
    Tensor values;                    ///< input shape with `axis` removed
    std::vector<std::size_t> indices; ///< lowest index attaining each maximum
};

/// Maximum along one axis; ties resolve to the lowest index.
MaxResult max_over_axis(const Tensor& t, std::size_t axis);

/// Independent Bernoulli(p) entries in {0, 1}.
Tensor sample_bernoulli(Prng& rng, double p, std::vector<std::size_t> shape);

/// Independent Normal(mean, stddev^2) entries, drawn in row-major order.
Tensor sample_normal(Prng& rng, double mean, double stddev, std::vector<std::size_t> shape);

} // namespace maxoutlab

#endif
