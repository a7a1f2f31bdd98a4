#include "support.hpp"

#include <memory>

#include "cornerbie/io.hpp"

namespace testing_support {

using namespace cornerbie;

const CornerBasis& basis() {
  static const CornerBasis B = load_or_build_basis();
  return B;
}

TableCache& tables() {
  static TableCache T(basis());
  return T;
}

const CornerContext& corner_context() {
  static const CornerContext C(basis());
  return C;
}

CornerBasis make_basis(const PowerFamily& fam, const BasisOptions& opt) { return build_corner_basis(fam, opt); }

}  // namespace testing_support
