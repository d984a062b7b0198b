#ifndef ONCUE_INTEGRATION_HPP
#define ONCUE_INTEGRATION_HPP

#include <array>
#include <optional>
#include <vector>

#include "oncue/matrix.hpp"
#include "oncue/schedule.hpp"

namespace oncue {

// Per-layer values of one clip's aggregation tokens. levels[l][j-1] holds
// level j's (4-j)*n_vc x d matrix at layer l, or nothing before the level's
// insertion layer. Absent levels contribute no loss terms.
struct LevelSnapshots {
    std::vector<std::array<std::optional<Matrix>, 3>> layers;

    static LevelSnapshots zeros(const AggregationSchedule& s);
};

// Alignment-plus-smoothness objective over one clip, summed across layers and
// levels. For each present level j at layer l:
//   || p_j(l) - pool(v, rows_j) ||_F  +  || p_j(l) - pool(p_{j-1}(l), rows_j) ||_F
// with p_0(l) = v, so every term compares matrices of level j's shape.
// Throws ShapeError on dimension mismatch or when level j is present without
// level j-1, NonFiniteError on non-finite input.
double integration_loss(const LevelSnapshots& p, const Matrix& v,
                        const AggregationSchedule& s);

// Analytic gradient of integration_loss with respect to every present
// snapshot. Norm terms at exactly zero contribute a zero (sub)gradient.
LevelSnapshots integration_loss_grad(const LevelSnapshots& p, const Matrix& v,
                                     const AggregationSchedule& s);

}  // namespace oncue

#endif  // ONCUE_INTEGRATION_HPP
