#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "qprbm/path.hpp"
#include "qprbm/vec2.hpp"

namespace qprbm {

// Scalar cadlag path on [0, horizon]; same breakpoint conventions as
// CadlagPath.
struct ScalarPath {
    PathKind kind = PathKind::Step;
    std::vector<double> t;
    std::vector<double> v;
    double horizon = 0.0;

    double eval(double time) const;
};

struct ScalarReflection {
    ScalarPath phi;  // constrained path, >= 0
    ScalarPath eta;  // minimal pushing term, nondecreasing, eta(0) = 0
};

// One-dimensional Skorohod map on the half line:
//   eta(t) = sup_{s<=t} psi(s)^-,  phi = psi + eta.
// Requires psi(0) >= 0. Exact on breakpoints; for piecewise-linear input the
// output carries extra breakpoints where the pushing starts to grow.
ScalarReflection gamma_half_line(const ScalarPath& psi);

enum class Axis { X1 = 0, X2 = 1 };

struct PlanarReflection {
    CadlagPath phi;
    CadlagPath eta;  // planar pushing, eta = h * |eta|
};

// Skorohod map onto the half plane {x_axis >= 0} with oblique direction h
// (h must have a positive component on the constrained axis).
PlanarReflection gamma_half_plane(Vec2 h, Axis axis, const CadlagPath& psi);

// Output of the alternating reflection/absorption map.
struct ReflectedPath {
    CadlagPath path;     // g, constrained to the quarter plane until absorption
    CadlagPath pushing;  // g - f up to absorption, frozen afterwards
    std::vector<double> switch_times;  // sigma_N with gamma_N < eta_N
    std::vector<int> faces;            // face index in {1,2}, strictly alternating
    std::optional<double> absorption_time;
    std::optional<Vec2> absorption_point;
};

// Alternating oblique reflection on the faces of the quarter plane with
// absorption on reaching the closed ball of radius c0*eps. Requires
// f(0) in S, ||f(0)|| > c0*eps, and (for step paths) jumps of size at most
// c0*eps/4. Exceeding the switch budget throws std::runtime_error.
ReflectedPath lambda_eps(const CadlagPath& f, double eps, double c0, Vec2 d1, Vec2 d2,
                         std::int64_t switch_budget = 1000000);

// JSONL: the constrained path, the pushing path, and a trailer record with
// switch times, face indices and absorption data.
void write_jsonl(const ReflectedPath& rp, std::ostream& os);

}  // namespace qprbm
