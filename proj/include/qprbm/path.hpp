#pragma once

#include <cstddef>
#include <iosfwd>
#include <vector>

#include "qprbm/vec2.hpp"

namespace qprbm {

enum class PathKind {
    Step,    // piecewise constant, right-continuous with left limits
    Linear,  // piecewise linear, continuous
};

// Planar cadlag path on [0, horizon], stored as breakpoints.
//  - t is strictly increasing, t.front() == 0, t.back() == horizon.
//  - A Step path takes the value x[k] on [t[k], t[k+1]).
struct CadlagPath {
    PathKind kind = PathKind::Step;
    std::vector<double> t;
    std::vector<Vec2> x;
    double horizon = 0.0;

    static CadlagPath constant(Vec2 value, double horizon);

    std::size_t size() const { return t.size(); }
    Vec2 eval(double time) const;  // throws std::out_of_range outside [0, horizon]

    // Index of the last breakpoint with t[k] <= time.
    std::size_t index_at(double time) const;

    void validate() const;  // throws std::invalid_argument on malformed data
};

// sup of ||x(u) - x(v)|| over u, v in [s, t]; exact on breakpoints.
double osc(const CadlagPath& p, double s, double t);

// Modulus of continuity w_S: sup over |u - v| <= delta within [0, S].
double modulus(const CadlagPath& p, double S, double delta);

// sup of ||x(u)|| over [0, S].
double sup_norm(const CadlagPath& p, double S);

// Total variation on [0, t] in the Euclidean norm; exact for breakpoint paths.
double total_variation(const CadlagPath& p, double t);

// JSONL: a header record {"kind":..., "horizon":...} followed by one record
// {"t":..., "x1":..., "x2":...} per breakpoint.
void write_jsonl(const CadlagPath& p, std::ostream& os);
CadlagPath read_path_jsonl(std::istream& is);

}  // namespace qprbm
