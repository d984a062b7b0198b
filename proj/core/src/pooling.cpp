#include "oncue/pooling.hpp"

#include <string>

#include "oncue/errors.hpp"

namespace oncue {

Matrix adapter_pool(const Matrix& in, std::size_t m) {
    const std::size_t n = in.rows;
    if (m < 1 || m > n)
        throw SizeError("adapter_pool: target rows " + std::to_string(m) +
                        " out of range for input rows " + std::to_string(n));
    Matrix out(m, in.cols);
    for (std::size_t k = 0; k < m; ++k) {
        const std::size_t begin = k * n / m;
        const std::size_t end = (k + 1) * n / m;
        for (std::size_t c = 0; c < in.cols; ++c) {
            double sum = 0.0;
            for (std::size_t r = begin; r < end; ++r) sum += in.at(r, c);
            out.at(k, c) = sum / static_cast<double>(end - begin);
        }
    }
    return out;
}

std::array<Matrix, 3> init_aggregation_tokens(const Matrix& v, int n_vc) {
    if (n_vc < 1) throw SizeError("init_aggregation_tokens: n_vc must be >= 1");
    if (v.rows < static_cast<std::size_t>(3 * n_vc))
        throw SizeError("init_aggregation_tokens: clip of " +
                        std::to_string(v.rows) +
                        " tokens cannot seed 3*n_vc=" +
                        std::to_string(3 * n_vc) + " level-1 tokens");
    std::array<Matrix, 3> levels;
    const Matrix* prev = &v;
    for (int j = 1; j <= 3; ++j) {
        levels[j - 1] = adapter_pool(*prev, static_cast<std::size_t>((4 - j) * n_vc));
        prev = &levels[j - 1];
    }
    return levels;
}

Matrix pooling_matrix(std::size_t n, std::size_t m) {
    if (m < 1 || m > n)
        throw SizeError("pooling_matrix: target rows " + std::to_string(m) +
                        " out of range for input rows " + std::to_string(n));
    Matrix p(m, n);
    for (std::size_t k = 0; k < m; ++k) {
        const std::size_t begin = k * n / m;
        const std::size_t end = (k + 1) * n / m;
        for (std::size_t r = begin; r < end; ++r)
            p.at(k, r) = 1.0 / static_cast<double>(end - begin);
    }
    return p;
}

}  // namespace oncue
