#include "multigrid.hpp"

namespace hrve::detail {

namespace {

bool can_coarsen(const GridSpec& g) {
  for (int k = 0; k < g.d; ++k)
    if (g.n[k] % 2 != 0 || g.n[k] / 2 < 4) return false;
  return true;
}

} // namespace

Multigrid::Multigrid(const SparseSpdOperator& op) {
  GridSpec g = op.grid;
  std::array<std::vector<double>, 3> w = op.face_weight;
  double mass = op.mass_diagonal;
  bool first = true;
  while (true) {
    Level lv;
    lv.grid = g;
    if (first) {
      lv.row_ptr = op.row_ptr;
      lv.col = op.col;
      lv.val = op.val;
      first = false;
    } else {
      build_csr(g, w, mass, lv.row_ptr, lv.col, lv.val);
    }
    const std::size_t n = g.cells();
    lv.diag.assign(n, 0.0);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t p = lv.row_ptr[i]; p < lv.row_ptr[i + 1]; ++p)
        if (lv.col[p] == i) lv.diag[i] = lv.val[p];
    lv.r.assign(n, 0.0);
    lv.x.assign(n, 0.0);
    lv.b.assign(n, 0.0);

    const bool more = can_coarsen(g);
    if (more) {
      GridSpec cg = g;
      for (int k = 0; k < g.d; ++k) cg.n[k] = g.n[k] / 2;
      cg.h = 2.0 * g.h;
      lv.parent.resize(n);
      for_each_cell(g, [&](const Index& c, std::size_t idx) {
        Index p{c[0] / 2, c[1] / 2, c[2] / 2};
        if (g.d == 2) p[2] = 0;
        lv.parent[idx] = linear(cg.n, p);
      });
      // Coarse face weight = half the sum of the fine faces it covers.
      std::array<std::vector<double>, 3> cw;
      for (int k = 0; k < g.d; ++k) {
        cw[k].assign(cg.faces(k), 0.0);
        const Index fe = face_extents(g, k), ce = face_extents(cg, k);
        for_each_face(g, k, [&](const Index& f, std::size_t idx) {
          if (f[k] % 2 != 0) return;
          Index p{f[0] / 2, f[1] / 2, f[2] / 2};
          if (g.d == 2) p[2] = 0;
          p[k] = f[k] / 2;
          cw[k][linear(ce, p)] += 0.5 * w[k][idx];
        });
        (void)fe;
      }
      w = std::move(cw);
      mass *= 0.5 * double(1 << g.d);
      g = cg;
    }
    levels_.push_back(std::move(lv));
    if (!more) break;
  }
}

void Multigrid::smooth(Level& lv, bool forward, int sweeps) {
  const std::size_t n = lv.grid.cells();
  for (int s = 0; s < sweeps; ++s) {
    for (std::size_t t = 0; t < n; ++t) {
      const std::size_t i = forward ? t : n - 1 - t;
      double acc = lv.b[i];
      for (std::size_t p = lv.row_ptr[i]; p < lv.row_ptr[i + 1]; ++p)
        if (lv.col[p] != i) acc -= lv.val[p] * lv.x[lv.col[p]];
      lv.x[i] = acc / lv.diag[i];
    }
  }
}

void Multigrid::cycle(std::size_t l) {
  Level& lv = levels_[l];
  std::fill(lv.x.begin(), lv.x.end(), 0.0);
  if (l + 1 == levels_.size()) {
    for (int s = 0; s < 20; ++s) {
      smooth(lv, true, 1);
      smooth(lv, false, 1);
    }
    return;
  }
  smooth(lv, true, 2);
  csr_apply(lv.row_ptr, lv.col, lv.val, lv.x, lv.r);
  Level& cl = levels_[l + 1];
  std::fill(cl.b.begin(), cl.b.end(), 0.0);
  for (std::size_t i = 0; i < lv.r.size(); ++i) cl.b[lv.parent[i]] += lv.b[i] - lv.r[i];
  cycle(l + 1);
  for (std::size_t i = 0; i < lv.x.size(); ++i) lv.x[i] += cl.x[lv.parent[i]];
  smooth(lv, false, 2);
}

void Multigrid::vcycle(const std::vector<double>& b, std::vector<double>& x) {
  levels_[0].b = b;
  cycle(0);
  x = levels_[0].x;
}

} // namespace hrve::detail
