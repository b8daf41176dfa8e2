//! Cell-centered finite-volume discretization of `-Div(A(u)Du) = sigma f(u)`.
//!
//! The flux through the face between nodes `L` and `R` is
//! `(A(u_L) + A(u_R)) / 2 * (u_R - u_L) / h`. Neumann walls carry zero flux.
//! Dirichlet walls sit half a cell from the boundary node and hold `u = 0`.

use serde::{Deserialize, Serialize};

use super::banded::BandedMatrix;
use super::grid::Grid;
use crate::error::{Error, Result};
use crate::model::{BoundaryCondition, Model};

/// Which homotopy family the residual encodes.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Family {
    /// `-Div(A(W)DW) = sigma f(W)`, i.e. `W = sigma u` in the scaled family.
    #[default]
    Plain,
    /// Adds the relaxation term `(sigma - 1) W` on the right-hand side.
    Relaxed,
}

#[derive(Clone, Debug)]
pub struct Discretization<'a> {
    model: &'a Model,
    grid: &'a Grid,
    sigma: f64,
    family: Family,
    source: Option<&'a [f64]>,
    a_zero: Vec<f64>,
}

pub fn discretize<'a>(model: &'a Model, grid: &'a Grid) -> Result<Discretization<'a>> {
    let (ml, gl) = (model.domain().lengths(), grid.domain().lengths());
    if ml.len() != gl.len() || ml.iter().zip(&gl).any(|(a, b)| (a - b).abs() > 1e-12 * a.max(1.0)) {
        return Err(Error::Shape("grid domain differs from the model domain".into()));
    }
    let m = model.m();
    let mut a_zero = vec![0.0; m * m];
    model.diffusion_into(&vec![0.0; m], &mut a_zero);
    Ok(Discretization {
        model,
        grid,
        sigma: 1.0,
        family: Family::Plain,
        source: None,
        a_zero,
    })
}

impl<'a> Discretization<'a> {
    pub fn with_sigma(mut self, sigma: f64) -> Self {
        self.sigma = sigma;
        self
    }

    pub fn with_family(mut self, family: Family) -> Self {
        self.family = family;
        self
    }

    /// Extra right-hand side `sigma s`, node-major like the unknowns.
    pub fn with_source(mut self, source: &'a [f64]) -> Result<Self> {
        if source.len() != self.unknowns() {
            return Err(Error::Shape(format!("source has {} values, expected {}", source.len(), self.unknowns())));
        }
        self.source = Some(source);
        Ok(self)
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    pub fn model(&self) -> &Model {
        self.model
    }

    pub fn grid(&self) -> &Grid {
        self.grid
    }

    pub fn source(&self) -> Option<&[f64]> {
        self.source
    }

    pub fn unknowns(&self) -> usize {
        self.grid.node_count() * self.model.m()
    }

    pub fn bandwidth(&self) -> usize {
        let m = self.model.m();
        let stride = self.grid.stride(self.grid.dimension() - 1);
        (stride + 1) * m - 1
    }

    fn dirichlet(&self) -> bool {
        self.model.bc() == BoundaryCondition::Dirichlet
    }

    /// Visits every interior face as `(left node, right node, spacing)`.
    fn for_each_face(&self, mut visit: impl FnMut(usize, usize, f64)) {
        for axis in 0..self.grid.dimension() {
            let stride = self.grid.stride(axis);
            let cells = self.grid.cells()[axis];
            let h = self.grid.spacing()[axis];
            for node in 0..self.grid.node_count() {
                if (node / stride) % cells + 1 < cells {
                    visit(node, node + stride, h);
                }
            }
        }
    }

    /// Visits every boundary node once per wall it touches.
    fn for_each_wall(&self, mut visit: impl FnMut(usize, f64)) {
        for axis in 0..self.grid.dimension() {
            let stride = self.grid.stride(axis);
            let cells = self.grid.cells()[axis];
            let h = self.grid.spacing()[axis];
            for node in 0..self.grid.node_count() {
                let k = (node / stride) % cells;
                if k == 0 {
                    visit(node, h);
                }
                if k + 1 == cells {
                    visit(node, h);
                }
            }
        }
    }

    fn diffusion_at_nodes(&self, u: &[f64]) -> Vec<f64> {
        let m = self.model.m();
        let mut a = vec![0.0; self.grid.node_count() * m * m];
        for node in 0..self.grid.node_count() {
            self.model
                .diffusion_into(&u[node * m..(node + 1) * m], &mut a[node * m * m..(node + 1) * m * m]);
        }
        a
    }

    /// `-div(flux)` at every node (the diffusion part of the residual).
    pub fn diffusion_operator(&self, u: &[f64]) -> Vec<f64> {
        let m = self.model.m();
        let a = self.diffusion_at_nodes(u);
        let mut out = vec![0.0; u.len()];
        self.for_each_face(|l, r, h| {
            let (al, ar) = (&a[l * m * m..(l + 1) * m * m], &a[r * m * m..(r + 1) * m * m]);
            for i in 0..m {
                let mut flux = 0.0;
                for k in 0..m {
                    flux += 0.5 * (al[i * m + k] + ar[i * m + k]) * (u[r * m + k] - u[l * m + k]);
                }
                flux /= h;
                out[l * m + i] -= flux / h;
                out[r * m + i] += flux / h;
            }
        });
        if self.dirichlet() {
            self.for_each_wall(|b, h| {
                let ab = &a[b * m * m..(b + 1) * m * m];
                for i in 0..m {
                    let mut s = 0.0;
                    for k in 0..m {
                        s += (ab[i * m + k] + self.a_zero[i * m + k]) * u[b * m + k];
                    }
                    out[b * m + i] += s / (h * h);
                }
            });
        }
        out
    }

    pub fn residual(&self, u: &[f64]) -> Vec<f64> {
        let m = self.model.m();
        let mut r = self.diffusion_operator(u);
        let mut f = vec![0.0; m];
        for node in 0..self.grid.node_count() {
            self.model.reaction_into(&u[node * m..(node + 1) * m], &mut f);
            for i in 0..m {
                let k = node * m + i;
                r[k] -= self.sigma * f[i];
                if self.family == Family::Relaxed {
                    r[k] -= (self.sigma - 1.0) * u[k];
                }
                if let Some(s) = self.source {
                    r[k] -= self.sigma * s[k];
                }
            }
        }
        r
    }

    /// Analytic Jacobian of [`residual`](Self::residual).
    pub fn jacobian(&self, u: &[f64]) -> BandedMatrix {
        let m = self.model.m();
        let bw = self.bandwidth();
        let mut jac = BandedMatrix::zeros(self.unknowns(), bw, bw);
        let a = self.diffusion_at_nodes(u);
        let mut da = vec![0.0; self.grid.node_count() * m * m * m];
        for node in 0..self.grid.node_count() {
            self.model.diffusion_derivative_into(
                &u[node * m..(node + 1) * m],
                &mut da[node * m * m * m..(node + 1) * m * m * m],
            );
        }
        let mut gl = vec![0.0; m * m];
        let mut gr = vec![0.0; m * m];

        self.for_each_face(|l, r, h| {
            let (al, ar) = (&a[l * m * m..(l + 1) * m * m], &a[r * m * m..(r + 1) * m * m]);
            let (dl, dr) = (&da[l * m * m * m..(l + 1) * m * m * m], &da[r * m * m * m..(r + 1) * m * m * m]);
            for i in 0..m {
                for k in 0..m {
                    let abar = 0.5 * (al[i * m + k] + ar[i * m + k]);
                    let (mut tl, mut tr) = (0.0, 0.0);
                    for q in 0..m {
                        let delta = u[r * m + q] - u[l * m + q];
                        tl += dl[(i * m + q) * m + k] * delta;
                        tr += dr[(i * m + q) * m + k] * delta;
                    }
                    gl[i * m + k] = (-abar + 0.5 * tl) / h;
                    gr[i * m + k] = (abar + 0.5 * tr) / h;
                }
            }
            for i in 0..m {
                for k in 0..m {
                    jac.add(l * m + i, l * m + k, -gl[i * m + k] / h);
                    jac.add(l * m + i, r * m + k, -gr[i * m + k] / h);
                    jac.add(r * m + i, l * m + k, gl[i * m + k] / h);
                    jac.add(r * m + i, r * m + k, gr[i * m + k] / h);
                }
            }
        });
        if self.dirichlet() {
            self.for_each_wall(|b, h| {
                let ab = &a[b * m * m..(b + 1) * m * m];
                let db = &da[b * m * m * m..(b + 1) * m * m * m];
                for i in 0..m {
                    for k in 0..m {
                        let mut t = ab[i * m + k] + self.a_zero[i * m + k];
                        for q in 0..m {
                            t += db[(i * m + q) * m + k] * u[b * m + q];
                        }
                        jac.add(b * m + i, b * m + k, t / (h * h));
                    }
                }
            });
        }

        let mut jf = vec![0.0; m * m];
        for node in 0..self.grid.node_count() {
            self.model.reaction_jacobian_into(&u[node * m..(node + 1) * m], &mut jf);
            for i in 0..m {
                for k in 0..m {
                    jac.add(node * m + i, node * m + k, -self.sigma * jf[i * m + k]);
                }
                if self.family == Family::Relaxed {
                    jac.add(node * m + i, node * m + i, -(self.sigma - 1.0));
                }
            }
        }
        jac
    }

    /// Matrix of `v -> -Div(A(frozen) Dv) + shift v` with face-averaged frozen coefficients.
    pub fn frozen_operator(&self, frozen: &[f64], shift: f64) -> BandedMatrix {
        let m = self.model.m();
        let bw = self.bandwidth();
        let mut mat = BandedMatrix::zeros(self.unknowns(), bw, bw);
        let a = self.diffusion_at_nodes(frozen);
        self.for_each_face(|l, r, h| {
            for i in 0..m {
                for k in 0..m {
                    let abar = 0.5 * (a[l * m * m + i * m + k] + a[r * m * m + i * m + k]) / (h * h);
                    mat.add(l * m + i, l * m + k, abar);
                    mat.add(l * m + i, r * m + k, -abar);
                    mat.add(r * m + i, l * m + k, -abar);
                    mat.add(r * m + i, r * m + k, abar);
                }
            }
        });
        if self.dirichlet() {
            self.for_each_wall(|b, h| {
                for i in 0..m {
                    for k in 0..m {
                        let t = a[b * m * m + i * m + k] + self.a_zero[i * m + k];
                        mat.add(b * m + i, b * m + k, t / (h * h));
                    }
                }
            });
        }
        for k in 0..self.unknowns() {
            mat.add(k, k, shift);
        }
        mat
    }

    /// Right-hand side of the frozen-coefficient iteration: `sigma f(u) + shift u (+ relaxation, source)`.
    pub fn frozen_rhs(&self, u: &[f64], shift: f64) -> Vec<f64> {
        let m = self.model.m();
        let mut out = vec![0.0; u.len()];
        let mut f = vec![0.0; m];
        for node in 0..self.grid.node_count() {
            self.model.reaction_into(&u[node * m..(node + 1) * m], &mut f);
            for i in 0..m {
                let k = node * m + i;
                out[k] = self.sigma * f[i] + shift * u[k];
                if self.family == Family::Relaxed {
                    out[k] += (self.sigma - 1.0) * u[k];
                }
                if let Some(s) = self.source {
                    out[k] += self.sigma * s[k];
                }
            }
        }
        out
    }

    /// `|| sigma f(u) ||_inf + || sigma s ||_inf`, the scale for relative convergence.
    pub fn forcing_scale(&self, u: &[f64]) -> f64 {
        let m = self.model.m();
        let mut f = vec![0.0; m];
        let mut fmax: f64 = 0.0;
        for node in 0..self.grid.node_count() {
            self.model.reaction_into(&u[node * m..(node + 1) * m], &mut f);
            fmax = f.iter().fold(fmax, |a, v| a.max(v.abs()));
        }
        let smax = self.source.map_or(0.0, |s| s.iter().fold(0.0f64, |a, v| a.max(v.abs())));
        self.sigma.abs() * (fmax + smax)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{build_model, Domain, DomainConfig, DomainKind, ModelConfig};
    use std::f64::consts::PI;

    fn cross_model(domain: DomainConfig, bc: BoundaryCondition) -> Model {
        build_model(&ModelConfig {
            m: 2,
            d: vec![0.3, 1.2],
            alpha: vec![vec![0.4, 1.5], vec![0.2, 0.1]],
            r: vec![1.0, 0.8],
            c: vec![vec![1.0, 0.5], vec![0.3, 1.0]],
            domain,
            bc,
        })
        .unwrap()
    }

    fn interval() -> DomainConfig {
        DomainConfig {
            kind: DomainKind::Interval,
            lengths: vec![PI],
        }
    }

    #[test]
    fn constant_state_has_zero_residual() {
        let model = cross_model(interval(), BoundaryCondition::Neumann);
        let grid = Grid::new(*model.domain(), 16).unwrap();
        let disc = discretize(&model, &grid).unwrap();
        let states = crate::steady_states::find_constant_states(&model).unwrap();
        for s in &states.states {
            let u: Vec<f64> = s.u_star.repeat(16);
            let r = disc.residual(&u);
            let f = model.reaction(&s.u_star);
            for (k, v) in r.iter().enumerate() {
                // only the reaction at the rounded root survives
                assert_eq!(*v, -f[k % 2]);
            }
        }
    }

    #[test]
    fn affine_profile_is_exact_for_laplace() {
        let model = build_model(&ModelConfig {
            m: 1,
            d: vec![1.0],
            alpha: vec![vec![0.0]],
            r: vec![0.0],
            c: vec![vec![0.0]],
            domain: DomainConfig {
                kind: DomainKind::Interval,
                lengths: vec![1.0],
            },
            bc: BoundaryCondition::Dirichlet,
        })
        .unwrap();
        let grid = Grid::new(*model.domain(), 20).unwrap();
        let disc = discretize(&model, &grid).unwrap();
        let u: Vec<f64> = (0..20).map(|k| 2.0 * grid.coords(k)[0] + 0.5).collect();
        let r = disc.residual(&u);
        assert!(r[1..19].iter().all(|v| v.abs() < 1e-10), "{:?}", &r[1..19]);
    }

    fn fd_check(model: &Model, grid: &Grid, sigma: f64, family: Family) {
        let disc = discretize(model, grid).unwrap().with_sigma(sigma).with_family(family);
        let n = disc.unknowns();
        let u: Vec<f64> = (0..n).map(|k| 0.5 + 0.4 * ((k as f64) * 0.77).sin()).collect();
        let jac = disc.jacobian(&u);
        let eps = 1e-6;
        for col in (0..n).step_by(7) {
            let mut up = u.clone();
            let mut dn = u.clone();
            up[col] += eps;
            dn[col] -= eps;
            let (rp, rd) = (disc.residual(&up), disc.residual(&dn));
            for row in 0..n {
                let fd = (rp[row] - rd[row]) / (2.0 * eps);
                let an = jac.get(row, col);
                assert!((fd - an).abs() <= 1e-5 * (1.0 + an.abs()), "({row},{col}) fd {fd} analytic {an}");
            }
        }
    }

    #[test]
    fn jacobian_matches_finite_differences() {
        for bc in [BoundaryCondition::Neumann, BoundaryCondition::Dirichlet] {
            let model = cross_model(interval(), bc);
            fd_check(&model, &Grid::new(*model.domain(), 12).unwrap(), 0.7, Family::Plain);
            let rect = cross_model(
                DomainConfig {
                    kind: DomainKind::Rectangle,
                    lengths: vec![2.0, 1.5],
                },
                bc,
            );
            fd_check(&rect, &Grid::with_cells(*rect.domain(), &[9, 8]).unwrap(), 1.0, Family::Relaxed);
        }
    }

    #[test]
    fn frozen_operator_matches_residual_for_constant_coefficients() {
        let model = build_model(&ModelConfig {
            m: 2,
            d: vec![0.5, 2.0],
            alpha: vec![vec![0.0; 2]; 2],
            r: vec![0.0, 0.0],
            c: vec![vec![0.0; 2]; 2],
            domain: interval(),
            bc: BoundaryCondition::Dirichlet,
        })
        .unwrap();
        let grid = Grid::new(Domain::interval(PI).unwrap(), 10).unwrap();
        let disc = discretize(&model, &grid).unwrap();
        let u: Vec<f64> = (0..20).map(|k| (k as f64 * 0.3).cos()).collect();
        let lhs = disc.frozen_operator(&u, 0.0).mul_vec(&u);
        let r = disc.residual(&u);
        for (a, b) in lhs.iter().zip(&r) {
            assert!((a - b).abs() < 1e-10);
        }
    }
}
