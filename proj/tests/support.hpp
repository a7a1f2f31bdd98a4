#pragma once

#include "cornerbie/corner_basis.hpp"
#include "cornerbie/geometry.hpp"
#include "cornerbie/panel_integrals.hpp"
#include "cornerbie/singular_quadrature.hpp"

namespace testing_support {

// Default universal basis, built once per test process.
const cornerbie::CornerBasis& basis();
cornerbie::TableCache& tables();
const cornerbie::CornerContext& corner_context();

// Basis for a non-default family; the only place besides basis() that runs the SVD.
cornerbie::CornerBasis make_basis(const cornerbie::PowerFamily& fam, const cornerbie::BasisOptions& opt);

inline std::vector<cornerbie::Vec2> square_vertices() { return {{0, 0}, {1, 0}, {1, 1}, {0, 1}}; }
inline std::vector<cornerbie::Vec2> triangle_vertices() { return {{0, 0}, {1, 0}, {0.3, 0.8}}; }
inline std::vector<cornerbie::Vec2> l_shape_vertices() { return {{0, 0}, {2, 0}, {2, 1}, {1, 1}, {1, 2}, {0, 2}}; }

}  // namespace testing_support
