#ifndef ONCUE_POOLING_HPP
#define ONCUE_POOLING_HPP

#include <array>
#include <cstddef>

#include "oncue/matrix.hpp"

namespace oncue {

// Segment-mean pooling from n rows to m rows: output row k is the mean of
// input rows in [floor(k*n/m), floor((k+1)*n/m)). Throws SizeError when
// m < 1 or m > n.
Matrix adapter_pool(const Matrix& in, std::size_t m);

// Chained initialization of the three aggregation levels for one clip:
// p_j = adapter_pool(p_{j-1}, (4-j)*n_vc) with p_0 = v. Requires
// v.rows >= 3*n_vc (SizeError otherwise).
std::array<Matrix, 3> init_aggregation_tokens(const Matrix& v, int n_vc);

// Pooling written as its explicit m x n linear map; adapter_pool(x, m)
// equals pooling_matrix(n, m) * x. Gradient code uses the transpose.
Matrix pooling_matrix(std::size_t n, std::size_t m);

}  // namespace oncue

#endif  // ONCUE_POOLING_HPP
