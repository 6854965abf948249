#ifndef MAXOUTLAB_PWLAB_HPP
#define MAXOUTLAB_PWLAB_HPP

#include <functional>
#include <utility>
#include <vector>

#include "maxoutlab/network.hpp"

namespace maxoutlab {

/// Continuous piecewise-linear interpolant on [xs.front(), xs.back()];
/// evaluation outside the domain extends the end segments.
struct PwlFunction {
    std::vector<double> xs;  ///< strictly increasing
    std::vector<double> ys;

    double value(double x) const;
    double domain_lo() const { return xs.front(); }
    double domain_hi() const { return xs.back(); }
};

/// Convex PWL function as a max of affine pieces.
struct ConvexPwl {
    std::vector<std::pair<double, double>> pieces;  ///< (slope, intercept)

    double value(double x) const;

    /// Pieces of a convex PwlFunction: the affine extension of each segment.
    static ConvexPwl from_convex_pwl(const PwlFunction& g);
};

/// PWL interpolant of f on n uniform breakpoints over [a, b].
PwlFunction interpolate_pwl(const std::function<double(double)>& f, double a, double b,
                            std::size_t n_breakpoints);

/// g = h1 - h2 with both parts convex: kinks with negative slope change
/// accumulate into h2 and h1 = g + h2.
std::pair<ConvexPwl, ConvexPwl> dc_decompose(const PwlFunction& g);

/// Parameters of a single 1-input maxout unit computing h exactly
/// (W: 1 x 1 x k, b: 1 x k).
LayerParams convex_to_maxout(const ConvexPwl& h);

struct TwoUnitApproximator {
    NetworkSpec spec;       ///< Maxout{2, k} followed by a fixed +1/-1 Linear output
    Parameters params;
    PwlFunction interpolant;
    double sup_error;          ///< max |network - f| on a 10^4-point grid
    double network_vs_interpolant;  ///< max |network - g| on the same grid
};

/// Constructive Theorem-1 witness for 1-D f: interpolate, DC-decompose,
/// compile both convex parts into maxout units, subtract with fixed weights.
TwoUnitApproximator build_two_unit_approximator(const std::function<double(double)>& f, double a,
                                                double b, std::size_t n_breakpoints,
                                                std::size_t grid_points = 10000);

/// Network output for a batch of scalar inputs (regression head).
std::vector<double> eval_scalar_network(const NetworkSpec& spec, const Parameters& params,
                                        const std::vector<double>& xs);

} // namespace maxoutlab

#endif
