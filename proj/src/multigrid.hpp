#pragma once

#include <vector>

#include "hrve/operator.hpp"

namespace hrve::detail {

void build_csr(const GridSpec& g, const std::array<std::vector<double>, 3>& w, double mass,
               std::vector<std::size_t>& row_ptr, std::vector<std::uint32_t>& col,
               std::vector<double>& val);

void csr_apply(const std::vector<std::size_t>& row_ptr, const std::vector<std::uint32_t>& col,
               const std::vector<double>& val, const std::vector<double>& x,
               std::vector<double>& y);

/// Cell-centered geometric V-cycle: 2^d aggregation, Galerkin coarse
/// operators (halved, which is the rediscretization scaling), symmetric
/// Gauss-Seidel smoothing. Used only as a CG preconditioner.
class Multigrid {
public:
  explicit Multigrid(const SparseSpdOperator& op);
  void vcycle(const std::vector<double>& b, std::vector<double>& x);

private:
  struct Level {
    GridSpec grid;
    std::vector<std::size_t> row_ptr;
    std::vector<std::uint32_t> col;
    std::vector<double> val;
    std::vector<double> diag;
    std::vector<std::size_t> parent; // fine cell -> coarse cell of next level
    std::vector<double> r, x, b;
  };

  void cycle(std::size_t l);
  void smooth(Level& lv, bool forward, int sweeps);

  std::vector<Level> levels_;
};

} // namespace hrve::detail
