#include "oncue/integration.hpp"

#include <cmath>
#include <string>

#include "oncue/errors.hpp"
#include "oncue/pooling.hpp"

namespace oncue {

namespace {

double frobenius(const Matrix& a, const Matrix& b) {
    double sum = 0.0;
    for (std::size_t i = 0; i < a.data.size(); ++i) {
        const double diff = a.data[i] - b.data[i];
        sum += diff * diff;
    }
    return std::sqrt(sum);
}

void check_snapshot(const Matrix& m, int level, const AggregationSchedule& s,
                    std::size_t d) {
    require_shape(m, static_cast<std::size_t>(s.level_size(level)), d,
                  "aggregation snapshot");
    if (!m.is_finite()) throw NonFiniteError("non-finite aggregation snapshot");
}

// The previous level's tokens pooled to level j's row count; p_0 = v.
Matrix pooled_predecessor(const std::array<std::optional<Matrix>, 3>& layer,
                          int j, const Matrix& v,
                          const AggregationSchedule& s) {
    const std::size_t rows = static_cast<std::size_t>(s.level_size(j));
    if (j == 1) return adapter_pool(v, rows);
    if (!layer[static_cast<std::size_t>(j - 2)].has_value())
        throw ShapeError("level " + std::to_string(j) +
                         " present without level " + std::to_string(j - 1));
    return adapter_pool(*layer[static_cast<std::size_t>(j - 2)], rows);
}

}  // namespace

LevelSnapshots LevelSnapshots::zeros(const AggregationSchedule& s) {
    LevelSnapshots p;
    p.layers.resize(static_cast<std::size_t>(s.layers));
    for (auto& layer : p.layers)
        for (int j = 1; j <= 3; ++j)
            layer[j - 1] = Matrix(static_cast<std::size_t>(s.level_size(j)),
                                  static_cast<std::size_t>(s.d));
    return p;
}

double integration_loss(const LevelSnapshots& p, const Matrix& v,
                        const AggregationSchedule& s) {
    s.validate();
    if (!v.is_finite()) throw NonFiniteError("non-finite clip tokens");
    if (v.rows < static_cast<std::size_t>(3 * s.n_vc))
        throw SizeError("clip too short for 3*n_vc level-1 tokens");

    double loss = 0.0;
    for (const auto& layer : p.layers) {
        for (int j = 1; j <= 3; ++j) {
            const auto& snap = layer[j - 1];
            if (!snap.has_value()) continue;
            check_snapshot(*snap, j, s, v.cols);
            const std::size_t rows = static_cast<std::size_t>(s.level_size(j));
            loss += frobenius(*snap, adapter_pool(v, rows));
            loss += frobenius(*snap, pooled_predecessor(layer, j, v, s));
        }
    }
    return loss;
}

LevelSnapshots integration_loss_grad(const LevelSnapshots& p, const Matrix& v,
                                     const AggregationSchedule& s) {
    s.validate();
    if (!v.is_finite()) throw NonFiniteError("non-finite clip tokens");
    if (v.rows < static_cast<std::size_t>(3 * s.n_vc))
        throw SizeError("clip too short for 3*n_vc level-1 tokens");

    LevelSnapshots grad;
    grad.layers.resize(p.layers.size());

    for (std::size_t l = 0; l < p.layers.size(); ++l) {
        const auto& layer = p.layers[l];
        auto& glayer = grad.layers[l];

        // d||X - A||_F / dX = (X - A) / ||X - A||_F, zero at X = A.
        auto accumulate_norm_grad = [](Matrix& g, const Matrix& x,
                                       const Matrix& a, double sign) {
            const double norm = frobenius(x, a);
            if (norm == 0.0) return;
            for (std::size_t i = 0; i < x.data.size(); ++i)
                g.data[i] += sign * (x.data[i] - a.data[i]) / norm;
        };

        for (int j = 1; j <= 3; ++j) {
            const auto& snap = layer[j - 1];
            if (!snap.has_value()) continue;
            check_snapshot(*snap, j, s, v.cols);
            const std::size_t rows = static_cast<std::size_t>(s.level_size(j));

            Matrix g(snap->rows, snap->cols);
            accumulate_norm_grad(g, *snap, adapter_pool(v, rows), 1.0);
            accumulate_norm_grad(g, *snap, pooled_predecessor(layer, j, v, s), 1.0);

            // Level j also appears inside level j+1's smoothness term through
            // the (linear) pooling map: add -P^T (p_{j+1} - P p_j) / norm.
            if (j < 3 && layer[static_cast<std::size_t>(j)].has_value()) {
                const Matrix& next = *layer[static_cast<std::size_t>(j)];
                const std::size_t next_rows =
                    static_cast<std::size_t>(s.level_size(j + 1));
                const Matrix pooled = adapter_pool(*snap, next_rows);
                const double norm = frobenius(next, pooled);
                if (norm != 0.0) {
                    const Matrix pmat = pooling_matrix(snap->rows, next_rows);
                    for (std::size_t k = 0; k < next_rows; ++k)
                        for (std::size_t r = 0; r < snap->rows; ++r) {
                            const double weight = pmat.at(k, r);
                            if (weight == 0.0) continue;
                            for (std::size_t c = 0; c < snap->cols; ++c)
                                g.at(r, c) -= weight *
                                              (next.at(k, c) - pooled.at(k, c)) /
                                              norm;
                        }
                }
            }
            glayer[j - 1] = std::move(g);
        }
    }
    return grad;
}

}  // namespace oncue
