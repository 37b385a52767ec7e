//! Levi-Civita connection and curvature, closed-form where the manifold
//! provides it and by central differences otherwise.

use crate::error::{GeometryError, Result};
use crate::manifold::{ChartManifold, Coords, MetricMatrix, MAX_DIM};

/// Central-difference step on metric entries.
pub const METRIC_FD_STEP: f64 = 1e-4;
/// Central-difference step on Christoffel symbols.
pub const CHRISTOFFEL_FD_STEP: f64 = 1e-3;

/// Christoffel symbols `Γ^k_ij`, stored as `data[k][i][j]`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Christoffel {
    dim: usize,
    data: [[[f64; MAX_DIM]; MAX_DIM]; MAX_DIM],
}

impl Christoffel {
    pub fn zeros(dim: usize) -> Self {
        Self {
            dim,
            data: [[[0.0; MAX_DIM]; MAX_DIM]; MAX_DIM],
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn get(&self, k: usize, i: usize, j: usize) -> f64 {
        self.data[k][i][j]
    }

    /// Sets `Γ^k_ij` and `Γ^k_ji` together.
    #[inline]
    pub fn set_sym(&mut self, k: usize, i: usize, j: usize, value: f64) {
        self.data[k][i][j] = value;
        self.data[k][j][i] = value;
    }

    /// `Γ^k_ij u^i w^j`.
    #[inline]
    pub fn contract(&self, u: &Coords, w: &Coords) -> Coords {
        let mut out = Coords::zeros();
        for k in 0..self.dim {
            let mut acc = 0.0;
            for i in 0..self.dim {
                for j in 0..self.dim {
                    acc += self.data[k][i][j] * u[i] * w[j];
                }
            }
            out[k] = acc;
        }
        out
    }

    pub fn max_abs_diff(&self, other: &Christoffel) -> f64 {
        let mut worst = 0.0f64;
        for k in 0..self.dim {
            for i in 0..self.dim {
                for j in 0..self.dim {
                    worst = worst.max((self.data[k][i][j] - other.data[k][i][j]).abs());
                }
            }
        }
        worst
    }
}

/// Riemann tensor `R^l_ijk` with `R(∂_j, ∂_k)∂_i = R^l_ijk ∂_l`, stored as `data[l][i][j][k]`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Riemann {
    dim: usize,
    data: [[[[f64; MAX_DIM]; MAX_DIM]; MAX_DIM]; MAX_DIM],
}

impl Riemann {
    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn get(&self, l: usize, i: usize, j: usize, k: usize) -> f64 {
        self.data[l][i][j][k]
    }

    /// `R(u, w) z`.
    pub fn apply(&self, u: &Coords, w: &Coords, z: &Coords) -> Coords {
        let n = self.dim;
        let mut out = Coords::zeros();
        for l in 0..n {
            let mut acc = 0.0;
            for i in 0..n {
                for j in 0..n {
                    for k in 0..n {
                        acc += self.data[l][i][j][k] * z[i] * u[j] * w[k];
                    }
                }
            }
            out[l] = acc;
        }
        out
    }

    /// Fully covariant component `R_lijk = g_lm R^m_ijk`.
    pub fn lowered(&self, g: &MetricMatrix, l: usize, i: usize, j: usize, k: usize) -> f64 {
        (0..self.dim).map(|m| g[(l, m)] * self.data[m][i][j][k]).sum()
    }

    pub fn max_abs(&self) -> f64 {
        self.data
            .iter()
            .flatten()
            .flatten()
            .flatten()
            .fold(0.0f64, |a, v| a.max(v.abs()))
    }
}

/// Christoffel symbols at `x`: closed form when available and enabled,
/// finite differences of the metric otherwise.
pub fn christoffel(m: &ChartManifold, x: &Coords) -> Result<Christoffel> {
    m.check_domain(x)?;
    if m.analytic_enabled() {
        if let Some(gamma) = m.field().christoffel(x) {
            return Ok(gamma);
        }
    }
    christoffel_fd(m, x)
}

/// `Γ^k_ij = ½ g^{kl}(∂_i g_jl + ∂_j g_il − ∂_l g_ij)` with central differences.
pub fn christoffel_fd(m: &ChartManifold, x: &Coords) -> Result<Christoffel> {
    let n = m.dim();
    let g_inv = m
        .metric_raw(x)
        .try_inverse()
        .ok_or_else(|| GeometryError::DegenerateMetric { point: m.to_vec(x) })?;

    // dg[l] = ∂_l g
    let mut dg = [MetricMatrix::zeros(); MAX_DIM];
    for (l, slot) in dg.iter_mut().enumerate().take(n) {
        let mut xp = *x;
        let mut xm = *x;
        xp[l] += METRIC_FD_STEP;
        xm[l] -= METRIC_FD_STEP;
        *slot = (m.metric_raw(&xp) - m.metric_raw(&xm)) / (2.0 * METRIC_FD_STEP);
    }

    let mut gamma = Christoffel::zeros(n);
    for k in 0..n {
        for i in 0..n {
            for j in i..n {
                let mut acc = 0.0;
                for l in 0..n {
                    acc += g_inv[(k, l)] * (dg[i][(j, l)] + dg[j][(i, l)] - dg[l][(i, j)]);
                }
                gamma.set_sym(k, i, j, 0.5 * acc);
            }
        }
    }
    Ok(gamma)
}

/// Riemann tensor from central differences of the Christoffel symbols.
pub fn riemann_fd(m: &ChartManifold, x: &Coords) -> Result<Riemann> {
    let n = m.dim();
    let gamma = christoffel(m, x)?;
    // dgamma[j] = ∂_j Γ
    let mut dgamma = [[[[0.0; MAX_DIM]; MAX_DIM]; MAX_DIM]; MAX_DIM];
    for (j, slot) in dgamma.iter_mut().enumerate().take(n) {
        let mut xp = *x;
        let mut xm = *x;
        xp[j] += CHRISTOFFEL_FD_STEP;
        xm[j] -= CHRISTOFFEL_FD_STEP;
        let gp = christoffel(m, &xp)?;
        let gm = christoffel(m, &xm)?;
        for (k, plane) in slot.iter_mut().enumerate().take(n) {
            for (a, row) in plane.iter_mut().enumerate().take(n) {
                for (b, entry) in row.iter_mut().enumerate().take(n) {
                    *entry = (gp.get(k, a, b) - gm.get(k, a, b)) / (2.0 * CHRISTOFFEL_FD_STEP);
                }
            }
        }
    }

    let mut data = [[[[0.0; MAX_DIM]; MAX_DIM]; MAX_DIM]; MAX_DIM];
    for l in 0..n {
        for i in 0..n {
            for j in 0..n {
                for k in 0..n {
                    let mut v = dgamma[j][l][k][i] - dgamma[k][l][j][i];
                    for mm in 0..n {
                        v += gamma.get(l, j, mm) * gamma.get(mm, k, i) - gamma.get(l, k, mm) * gamma.get(mm, j, i);
                    }
                    data[l][i][j][k] = v;
                }
            }
        }
    }
    Ok(Riemann { dim: n, data })
}

/// Squared area of the parallelogram spanned by `u`, `w`; errors when degenerate.
pub(crate) fn plane_area_sq(m: &ChartManifold, x: &Coords, u: &Coords, w: &Coords) -> Result<f64> {
    let uu = m.inner(x, u, u);
    let ww = m.inner(x, w, w);
    let uw = m.inner(x, u, w);
    let area = uu * ww - uw * uw;
    if !(area > 1e-14 * uu * ww) || uu <= 0.0 || ww <= 0.0 {
        return Err(GeometryError::DegeneratePlane);
    }
    Ok(area)
}

/// `⟨R(u,w)w, u⟩ / (|u|²|w|² − ⟨u,w⟩²)`.
pub fn sectional_curvature(m: &ChartManifold, x: &Coords, u: &Coords, w: &Coords) -> Result<f64> {
    m.check_domain(x)?;
    let area = plane_area_sq(m, x, u, w)?;
    if m.analytic_enabled() {
        if let Some(k) = m.field().sectional_curvature(x, u, w) {
            return Ok(k);
        }
    }
    let r = riemann_fd(m, x)?;
    let rw = r.apply(u, w, w);
    Ok(m.inner(x, &rw, u) / area)
}
