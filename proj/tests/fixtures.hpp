#pragma once

#include <vector>

#include "deeplde/problems.hpp"

namespace fixtures {

// Hand-built instance with Q = I, p = 0 unless overridden.
inline deeplde::ProblemInstance make_instance(deeplde::Matrix A, deeplde::Matrix G, deeplde::Vector h_ub,
                                              std::vector<std::size_t> partition_z,
                                              deeplde::ObjectiveKind kind = deeplde::ObjectiveKind::Quadratic) {
  deeplde::ProblemInstance inst;
  inst.n = A.cols() > 0 ? A.cols() : G.cols();
  inst.n_eq = A.rows();
  inst.n_ineq = G.rows();
  inst.Q = deeplde::Matrix::identity(inst.n);
  inst.p = deeplde::Vector(inst.n, 0.0);
  inst.A = std::move(A);
  inst.G = std::move(G);
  inst.h_ub = std::move(h_ub);
  inst.objective_kind = kind;
  inst.partition_z = std::move(partition_z);
  if (kind == deeplde::ObjectiveKind::NonlinearEq) inst.nonlinear_c.assign(inst.n, 0.0);
  return inst;
}

}  // namespace fixtures
