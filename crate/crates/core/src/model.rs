//! SKT-type cross-diffusion systems `-Div(A(u)Du) = f(u)`.
//!
//! Diffusion comes from the flux potential `P_i(u) = u_i (d_i + sum_j alpha_ij u_j)`
//! so that `A(u) = dP/du`, and the reaction is of Lotka-Volterra form
//! `f_i(u) = u_i g_i(u)` with `g_i(u) = r_i - sum_j c_ij u_j`.

use nalgebra::{DMatrix, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DomainKind {
    Interval,
    Rectangle,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DomainConfig {
    pub kind: DomainKind,
    pub lengths: Vec<f64>,
}

/// Interval `(0, L)` or rectangle `(0, L1) x (0, L2)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Domain {
    Interval { length: f64 },
    Rectangle { lx: f64, ly: f64 },
}

impl Domain {
    pub fn interval(length: f64) -> Result<Self> {
        Self::from_config(&DomainConfig {
            kind: DomainKind::Interval,
            lengths: vec![length],
        })
    }

    pub fn rectangle(lx: f64, ly: f64) -> Result<Self> {
        Self::from_config(&DomainConfig {
            kind: DomainKind::Rectangle,
            lengths: vec![lx, ly],
        })
    }

    pub fn from_config(config: &DomainConfig) -> Result<Self> {
        let expected = match config.kind {
            DomainKind::Interval => 1,
            DomainKind::Rectangle => 2,
        };
        if config.lengths.len() != expected {
            return Err(Error::Shape(format!(
                "domain of kind {:?} needs {expected} length(s), got {}",
                config.kind,
                config.lengths.len()
            )));
        }
        if let Some(bad) = config.lengths.iter().find(|l| !(l.is_finite() && **l > 0.0)) {
            return Err(Error::Config(format!("domain lengths must be positive, got {bad}")));
        }
        Ok(match config.kind {
            DomainKind::Interval => Domain::Interval {
                length: config.lengths[0],
            },
            DomainKind::Rectangle => Domain::Rectangle {
                lx: config.lengths[0],
                ly: config.lengths[1],
            },
        })
    }

    pub fn to_config(&self) -> DomainConfig {
        match *self {
            Domain::Interval { length } => DomainConfig {
                kind: DomainKind::Interval,
                lengths: vec![length],
            },
            Domain::Rectangle { lx, ly } => DomainConfig {
                kind: DomainKind::Rectangle,
                lengths: vec![lx, ly],
            },
        }
    }

    pub fn dimension(&self) -> usize {
        match self {
            Domain::Interval { .. } => 1,
            Domain::Rectangle { .. } => 2,
        }
    }

    pub fn lengths(&self) -> Vec<f64> {
        match *self {
            Domain::Interval { length } => vec![length],
            Domain::Rectangle { lx, ly } => vec![lx, ly],
        }
    }

    pub fn diameter(&self) -> f64 {
        self.lengths().iter().map(|l| l * l).sum::<f64>().sqrt()
    }

    /// Lebesgue measure |Omega|.
    pub fn measure(&self) -> f64 {
        self.lengths().iter().product()
    }

    /// Domain with every length multiplied by `s`.
    pub fn scaled(&self, s: f64) -> Self {
        match *self {
            Domain::Interval { length } => Domain::Interval { length: length * s },
            Domain::Rectangle { lx, ly } => Domain::Rectangle {
                lx: lx * s,
                ly: ly * s,
            },
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BoundaryCondition {
    Neumann,
    Dirichlet,
}

/// Declarative model description, as read from a config file.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    pub m: usize,
    pub d: Vec<f64>,
    pub alpha: Vec<Vec<f64>>,
    pub r: Vec<f64>,
    pub c: Vec<Vec<f64>>,
    pub domain: DomainConfig,
    pub bc: BoundaryCondition,
}

impl ModelConfig {
    pub fn from_json_str(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn to_json_string(&self) -> String {
        serde_json::to_string_pretty(self).expect("model config serializes")
    }
}

/// Values of the coefficient functions at a single state.
#[derive(Clone, Debug, PartialEq)]
pub struct Evaluation {
    /// Diffusion matrix `A(u) = dP/du`.
    pub a: DMatrix<f64>,
    pub f: Vec<f64>,
    /// Reaction Jacobian `df/du`.
    pub j: DMatrix<f64>,
}

/// A validated SKT-type system. Immutable after construction.
#[derive(Clone, Debug, PartialEq)]
pub struct Model {
    d: Vec<f64>,
    alpha: DMatrix<f64>,
    r: Vec<f64>,
    c: DMatrix<f64>,
    domain: Domain,
    bc: BoundaryCondition,
}

fn square(rows: &[Vec<f64>], m: usize, name: &str) -> Result<DMatrix<f64>> {
    if rows.len() != m || rows.iter().any(|row| row.len() != m) {
        return Err(Error::Shape(format!("{name} must be {m}x{m}")));
    }
    Ok(DMatrix::from_fn(m, m, |i, j| rows[i][j]))
}

pub fn build_model(config: &ModelConfig) -> Result<Model> {
    let m = config.m;
    if m == 0 {
        return Err(Error::Shape("m must be at least 1".into()));
    }
    if config.d.len() != m {
        return Err(Error::Shape(format!("d has length {}, expected {m}", config.d.len())));
    }
    if config.r.len() != m {
        return Err(Error::Shape(format!("r has length {}, expected {m}", config.r.len())));
    }
    let alpha = square(&config.alpha, m, "alpha")?;
    let c = square(&config.c, m, "c")?;
    let finite = config.d.iter().chain(&config.r).chain(alpha.iter()).chain(c.iter());
    if finite.into_iter().any(|v| !v.is_finite()) {
        return Err(Error::Config("coefficients must be finite".into()));
    }
    for (index, &value) in config.d.iter().enumerate() {
        if value <= 0.0 {
            return Err(Error::NonPositiveDiffusion { index, value });
        }
    }
    for row in 0..m {
        for col in 0..m {
            let value = alpha[(row, col)];
            if value < 0.0 {
                return Err(Error::NegativeCrossDiffusion { row, col, value });
            }
        }
    }
    Ok(Model {
        d: config.d.clone(),
        alpha,
        r: config.r.clone(),
        c,
        domain: Domain::from_config(&config.domain)?,
        bc: config.bc,
    })
}

impl Model {
    pub fn m(&self) -> usize {
        self.d.len()
    }

    pub fn d(&self) -> &[f64] {
        &self.d
    }

    pub fn alpha(&self) -> &DMatrix<f64> {
        &self.alpha
    }

    pub fn r(&self) -> &[f64] {
        &self.r
    }

    pub fn c(&self) -> &DMatrix<f64> {
        &self.c
    }

    pub fn domain(&self) -> &Domain {
        &self.domain
    }

    pub fn bc(&self) -> BoundaryCondition {
        self.bc
    }

    pub fn to_config(&self) -> ModelConfig {
        let rows = |mat: &DMatrix<f64>| {
            (0..mat.nrows())
                .map(|i| mat.row(i).iter().copied().collect())
                .collect()
        };
        ModelConfig {
            m: self.m(),
            d: self.d.clone(),
            alpha: rows(&self.alpha),
            r: self.r.clone(),
            c: rows(&self.c),
            domain: self.domain.to_config(),
            bc: self.bc,
        }
    }

    pub fn with_domain(&self, domain: Domain) -> Self {
        Model {
            domain,
            ..self.clone()
        }
    }

    pub fn with_bc(&self, bc: BoundaryCondition) -> Self {
        Model { bc, ..self.clone() }
    }

    /// Multiplies diffusion and reaction by the same `s > 0`.
    pub fn scaled(&self, s: f64) -> Self {
        Model {
            d: self.d.iter().map(|v| v * s).collect(),
            alpha: &self.alpha * s,
            r: self.r.iter().map(|v| v * s).collect(),
            c: &self.c * s,
            ..self.clone()
        }
    }

    /// Restriction to the species in `support` (the face `u_j = 0, j not in support`).
    pub fn restricted(&self, support: &[bool]) -> Self {
        let idx: Vec<usize> = (0..self.m()).filter(|&i| support[i]).collect();
        let k = idx.len();
        Model {
            d: idx.iter().map(|&i| self.d[i]).collect(),
            alpha: DMatrix::from_fn(k, k, |a, b| self.alpha[(idx[a], idx[b])]),
            r: idx.iter().map(|&i| self.r[i]).collect(),
            c: DMatrix::from_fn(k, k, |a, b| self.c[(idx[a], idx[b])]),
            domain: self.domain,
            bc: self.bc,
        }
    }

    /// `P(u)`, whose gradient is the flux `A(u)Du`.
    pub fn flux_potential(&self, u: &[f64]) -> Vec<f64> {
        let m = self.m();
        (0..m)
            .map(|i| {
                let cross: f64 = (0..m).map(|j| self.alpha[(i, j)] * u[j]).sum();
                u[i] * (self.d[i] + cross)
            })
            .collect()
    }

    /// Row-major `A(u)` written into `out` (length m*m).
    pub fn diffusion_into(&self, u: &[f64], out: &mut [f64]) {
        let m = self.m();
        for i in 0..m {
            let mut diag = self.d[i];
            for j in 0..m {
                diag += self.alpha[(i, j)] * u[j];
                out[i * m + j] = u[i] * self.alpha[(i, j)];
            }
            out[i * m + i] += diag;
        }
    }

    /// `dA_il/du_k` stored at `out[(i*m + l)*m + k]`. Constant for this family.
    pub fn diffusion_derivative_into(&self, _u: &[f64], out: &mut [f64]) {
        let m = self.m();
        out.iter_mut().for_each(|v| *v = 0.0);
        for i in 0..m {
            for l in 0..m {
                let base = (i * m + l) * m;
                if i == l {
                    for k in 0..m {
                        out[base + k] += self.alpha[(i, k)];
                    }
                }
                out[base + i] += self.alpha[(i, l)];
            }
        }
    }

    pub fn growth(&self, u: &[f64]) -> Vec<f64> {
        let m = self.m();
        (0..m)
            .map(|i| self.r[i] - (0..m).map(|j| self.c[(i, j)] * u[j]).sum::<f64>())
            .collect()
    }

    pub fn reaction_into(&self, u: &[f64], out: &mut [f64]) {
        let m = self.m();
        for i in 0..m {
            let mut g = self.r[i];
            for j in 0..m {
                g -= self.c[(i, j)] * u[j];
            }
            out[i] = u[i] * g;
        }
    }

    /// Row-major `df/du`: `J_ij = delta_ij g_i(u) - u_i c_ij`.
    pub fn reaction_jacobian_into(&self, u: &[f64], out: &mut [f64]) {
        let m = self.m();
        for i in 0..m {
            let mut g = self.r[i];
            for j in 0..m {
                g -= self.c[(i, j)] * u[j];
                out[i * m + j] = -u[i] * self.c[(i, j)];
            }
            out[i * m + i] += g;
        }
    }

    pub fn diffusion_matrix(&self, u: &[f64]) -> DMatrix<f64> {
        let m = self.m();
        let mut buf = vec![0.0; m * m];
        self.diffusion_into(u, &mut buf);
        DMatrix::from_row_slice(m, m, &buf)
    }

    pub fn reaction(&self, u: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.m()];
        self.reaction_into(u, &mut out);
        out
    }

    pub fn reaction_jacobian(&self, u: &[f64]) -> DMatrix<f64> {
        let m = self.m();
        let mut buf = vec![0.0; m * m];
        self.reaction_jacobian_into(u, &mut buf);
        DMatrix::from_row_slice(m, m, &buf)
    }

    pub fn evaluate(&self, u: &[f64]) -> Evaluation {
        Evaluation {
            a: self.diffusion_matrix(u),
            f: self.reaction(u),
            j: self.reaction_jacobian(u),
        }
    }
}

/// Axis-aligned sampling box in state space.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SamplingBox {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

impl SamplingBox {
    pub fn new(lower: Vec<f64>, upper: Vec<f64>) -> Result<Self> {
        if lower.len() != upper.len() || lower.is_empty() {
            return Err(Error::Shape("box bounds must have equal, nonzero length".into()));
        }
        if lower.iter().zip(&upper).any(|(l, u)| !(l.is_finite() && u.is_finite() && l <= u)) {
            return Err(Error::InvalidInput("empty box".into()));
        }
        Ok(SamplingBox { lower, upper })
    }

    pub fn uniform(m: usize, lower: f64, upper: f64) -> Result<Self> {
        Self::new(vec![lower; m], vec![upper; m])
    }

    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    /// All 2^m vertices (capped at m <= 16).
    pub fn corners(&self) -> Vec<Vec<f64>> {
        let m = self.dim().min(16);
        (0..1usize << m)
            .map(|mask| {
                (0..self.dim())
                    .map(|i| {
                        if i < m && mask & (1 << i) != 0 {
                            self.upper[i]
                        } else {
                            self.lower[i]
                        }
                    })
                    .collect()
            })
            .collect()
    }

    /// Tensor grid with `per_axis` points per axis, endpoints included.
    pub fn tensor_grid(&self, per_axis: usize) -> Vec<Vec<f64>> {
        let per_axis = per_axis.max(2);
        let m = self.dim();
        let total = per_axis.pow(m as u32);
        (0..total)
            .map(|mut flat| {
                (0..m)
                    .map(|i| {
                        let k = flat % per_axis;
                        flat /= per_axis;
                        let t = k as f64 / (per_axis - 1) as f64;
                        self.lower[i] + t * (self.upper[i] - self.lower[i])
                    })
                    .collect()
            })
            .collect()
    }

    /// Box vertices followed by `count` uniform points from a fixed-seed stream.
    pub fn sample(&self, count: usize, seed: u64) -> Vec<Vec<f64>> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut points = self.corners();
        for _ in 0..count {
            points.push(
                self.lower
                    .iter()
                    .zip(&self.upper)
                    .map(|(&l, &u)| if u > l { rng.random_range(l..=u) } else { l })
                    .collect(),
            );
        }
        points
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CheckStatus {
    Vacuous,
    Pass,
    Fail,
}

/// Sampled estimates of the structural constants. Not certified suprema.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StructureReport {
    /// Minimum over samples of lambda(u), the smallest eigenvalue of sym(A(u)).
    pub lambda_floor: f64,
    pub ellipticity: CheckStatus,
    /// max ||A(u)||_2 / lambda(u); absent when ellipticity fails.
    pub c_star: Option<f64>,
    pub sg_check: CheckStatus,
    /// Slope of log lambda(u) against log(1 + |u|).
    pub growth_exponent: f64,
    /// max |grad lambda(u)| / lambda(u); absent when ellipticity fails.
    pub lambda_sup: Option<f64>,
    pub sampling_box: SamplingBox,
    pub samples: usize,
    pub dimension: usize,
    pub note: String,
}

/// Smallest eigenvalue of the symmetric part of `A` and a unit eigenvector.
fn symmetric_floor(a: &DMatrix<f64>) -> (f64, Vec<f64>) {
    let sym = (a + a.transpose()) * 0.5;
    let eig = SymmetricEigen::new(sym);
    let (k, value) = eig
        .eigenvalues
        .iter()
        .enumerate()
        .min_by(|x, y| x.1.total_cmp(y.1))
        .map(|(k, v)| (k, *v))
        .expect("nonempty matrix");
    (value, eig.eigenvectors.column(k).iter().copied().collect())
}

pub fn validate_structure(model: &Model, sampling_box: &SamplingBox, samples: usize) -> Result<StructureReport> {
    let m = model.m();
    if sampling_box.dim() != m {
        return Err(Error::Shape(format!("box has dimension {}, model has m = {m}", sampling_box.dim())));
    }
    if samples == 0 {
        return Err(Error::InvalidInput("samples must be at least 1".into()));
    }
    let n = model.domain().dimension();
    let points = sampling_box.sample(samples, 0);

    let mut lambda_floor = f64::INFINITY;
    let mut c_star: f64 = 0.0;
    let mut lambda_sup: f64 = 0.0;
    let mut elliptic = true;
    let mut log_pairs = Vec::with_capacity(points.len());
    let mut dadu = vec![0.0; m * m * m];

    for u in &points {
        let a = model.diffusion_matrix(u);
        let (lambda, v) = symmetric_floor(&a);
        lambda_floor = lambda_floor.min(lambda);
        if lambda <= 0.0 {
            elliptic = false;
            continue;
        }
        c_star = c_star.max(crate::linalg::spectral_norm(&a) / lambda);

        // d lambda / du_k = v^T sym(dA/du_k) v for a simple eigenvalue
        model.diffusion_derivative_into(u, &mut dadu);
        let grad_sq: f64 = (0..m)
            .map(|k| {
                let mut s = 0.0;
                for i in 0..m {
                    for l in 0..m {
                        s += v[i] * dadu[(i * m + l) * m + k] * v[l];
                    }
                }
                s * s
            })
            .sum();
        lambda_sup = lambda_sup.max(grad_sq.sqrt() / lambda);

        let norm_u = u.iter().map(|x| x * x).sum::<f64>().sqrt();
        log_pairs.push(((1.0 + norm_u).ln(), lambda.ln()));
    }

    let sg_check = if n <= 4 {
        CheckStatus::Vacuous
    } else if elliptic && c_star < (n as f64 - 2.0) / (n as f64 - 4.0) {
        CheckStatus::Pass
    } else {
        CheckStatus::Fail
    };

    Ok(StructureReport {
        lambda_floor,
        ellipticity: if elliptic { CheckStatus::Pass } else { CheckStatus::Fail },
        c_star: elliptic.then_some(c_star),
        sg_check,
        growth_exponent: regression_slope(&log_pairs),
        lambda_sup: elliptic.then_some(lambda_sup),
        sampling_box: sampling_box.clone(),
        samples: points.len(),
        dimension: n,
        note: "sampled estimates over the box, not certified global constants".into(),
    })
}

/// Least-squares slope; 0 when the abscissae do not vary.
fn regression_slope(pairs: &[(f64, f64)]) -> f64 {
    if pairs.len() < 2 {
        return 0.0;
    }
    let n = pairs.len() as f64;
    let mx = pairs.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pairs.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pairs.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pairs.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    if sxx <= f64::EPSILON * n {
        0.0
    } else {
        sxy / sxx
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) fn config(m: usize, d: Vec<f64>, alpha: Vec<Vec<f64>>, r: Vec<f64>, c: Vec<Vec<f64>>) -> ModelConfig {
        ModelConfig {
            m,
            d,
            alpha,
            r,
            c,
            domain: DomainConfig {
                kind: DomainKind::Interval,
                lengths: vec![std::f64::consts::PI],
            },
            bc: BoundaryCondition::Neumann,
        }
    }

    fn weak_competition() -> Model {
        build_model(&config(
            2,
            vec![0.05, 1.0],
            vec![vec![0.0; 2]; 2],
            vec![1.0, 1.0],
            vec![vec![1.0, 0.5], vec![0.3, 1.0]],
        ))
        .unwrap()
    }

    #[test]
    fn no_cross_terms_gives_constant_diagonal_diffusion() {
        let model = weak_competition();
        for u in [[0.0, 0.0], [3.0, -1.0], [0.2, 7.0]] {
            let a = model.diffusion_matrix(&u);
            assert_eq!(a, DMatrix::from_row_slice(2, 2, &[0.05, 0.0, 0.0, 1.0]));
        }
    }

    #[test]
    fn cross_term_differentiates_by_hand() {
        let model = build_model(&config(
            2,
            vec![1.0, 1.0],
            vec![vec![0.0, 3.0], vec![0.0, 0.0]],
            vec![1.0, 1.0],
            vec![vec![1.0, 0.0], vec![0.0, 1.0]],
        ))
        .unwrap();
        let u = [0.7, 1.9];
        let a = model.diffusion_matrix(&u);
        assert_eq!(a[(0, 1)], 3.0 * u[0]);
        assert_eq!(a[(0, 0)], 1.0 + 3.0 * u[1]);
        assert_eq!(a[(1, 0)], 0.0);
        assert_eq!(a[(1, 1)], 1.0);
    }

    #[test]
    fn rejects_nonpositive_diffusion() {
        let err = build_model(&config(
            2,
            vec![0.0, 1.0],
            vec![vec![0.0; 2]; 2],
            vec![1.0, 1.0],
            vec![vec![1.0, 0.0], vec![0.0, 1.0]],
        ))
        .unwrap_err();
        assert!(err.to_string().contains("d_i must be positive"));
    }

    #[test]
    fn rejects_negative_alpha_and_bad_shapes() {
        let neg = config(
            2,
            vec![1.0, 1.0],
            vec![vec![0.0, -1.0], vec![0.0, 0.0]],
            vec![1.0, 1.0],
            vec![vec![1.0, 0.0], vec![0.0, 1.0]],
        );
        assert!(matches!(build_model(&neg), Err(Error::NegativeCrossDiffusion { .. })));
        let mut bad = neg.clone();
        bad.alpha = vec![vec![0.0; 2]; 2];
        bad.c = vec![vec![1.0, 0.0]];
        assert!(matches!(build_model(&bad), Err(Error::Shape(_))));
        let mut bad_domain = neg;
        bad_domain.alpha = vec![vec![0.0; 2]; 2];
        bad_domain.domain.lengths = vec![1.0, 2.0];
        assert!(matches!(build_model(&bad_domain), Err(Error::Shape(_))));
    }

    #[test]
    fn config_parsing_rejects_unknown_keys() {
        let text = r#"{"m":1,"d":[1],"alpha":[[0]],"r":[1],"c":[[1]],
            "domain":{"kind":"interval","lengths":[3.0]},"bc":"neumann","extra":1}"#;
        assert!(matches!(ModelConfig::from_json_str(text), Err(Error::Config(_))));
        let nested = r#"{"m":1,"d":[1],"alpha":[[0]],"r":[1],"c":[[1]],
            "domain":{"kind":"interval","lengths":[3.0],"shape":"x"},"bc":"neumann"}"#;
        assert!(ModelConfig::from_json_str(nested).is_err());
    }

    #[test]
    fn evaluate_at_trivial_and_semitrivial_states() {
        let model = weak_competition();
        let at_zero = model.evaluate(&[0.0, 0.0]);
        assert_eq!(at_zero.f, vec![0.0, 0.0]);
        assert_eq!(at_zero.j, DMatrix::identity(2, 2));
        let at_one = model.evaluate(&[1.0, 0.0]);
        assert_eq!(at_one.f, vec![0.0, 0.0]);
    }

    #[test]
    fn diagonal_entry_matches_symbolic_derivative() {
        let model = build_model(&config(
            2,
            vec![1.0, 1.0],
            vec![vec![1.0, 2.0], vec![0.0, 1.0]],
            vec![1.0, 1.0],
            vec![vec![1.0, 0.0], vec![0.0, 1.0]],
        ))
        .unwrap();
        // P_1 = u1 (1 + u1 + 2 u2)  =>  dP_1/du1 = 1 + 2 u1 + 2 u2
        assert_eq!(model.diffusion_matrix(&[1.0, 2.0])[(0, 0)], 7.0);
    }

    #[test]
    fn diffusion_derivative_matches_finite_differences() {
        let model = build_model(&config(
            3,
            vec![0.3, 1.0, 2.0],
            vec![vec![0.5, 2.0, 0.1], vec![0.7, 0.0, 1.5], vec![0.2, 0.4, 0.9]],
            vec![1.0, 1.0, 1.0],
            vec![vec![1.0, 0.0, 0.0], vec![0.0, 1.0, 0.0], vec![0.0, 0.0, 1.0]],
        ))
        .unwrap();
        let u = [0.4, 1.3, 0.8];
        let mut tensor = vec![0.0; 27];
        model.diffusion_derivative_into(&u, &mut tensor);
        let h = 1e-6;
        for k in 0..3 {
            let mut up = u;
            let mut dn = u;
            up[k] += h;
            dn[k] -= h;
            let fd = (model.diffusion_matrix(&up) - model.diffusion_matrix(&dn)) / (2.0 * h);
            for i in 0..3 {
                for l in 0..3 {
                    assert!((fd[(i, l)] - tensor[(i * 3 + l) * 3 + k]).abs() < 1e-8);
                }
            }
        }
        // A = dP/du
        for k in 0..3 {
            let mut up = u;
            let mut dn = u;
            up[k] += h;
            dn[k] -= h;
            let (pu, pd) = (model.flux_potential(&up), model.flux_potential(&dn));
            let a = model.diffusion_matrix(&u);
            for i in 0..3 {
                assert!(((pu[i] - pd[i]) / (2.0 * h) - a[(i, k)]).abs() < 1e-8);
            }
        }
    }

    #[test]
    fn structure_of_diagonal_model() {
        let model = weak_competition();
        let bx = SamplingBox::uniform(2, 0.0, 3.0).unwrap();
        let report = validate_structure(&model, &bx, 64).unwrap();
        assert!((report.lambda_floor - 0.05).abs() < 1e-14);
        assert_eq!(report.sg_check, CheckStatus::Vacuous);
        assert_eq!(report.ellipticity, CheckStatus::Pass);
        assert!(report.growth_exponent.abs() < 1e-12);
        assert!((report.c_star.unwrap() - 20.0).abs() < 1e-9);
        assert_eq!(report.lambda_sup, Some(0.0));
    }

    #[test]
    fn affine_lambda_has_unit_growth_exponent() {
        // d = 2 alpha: lambda(u) = 2 + 2u = 2 (1 + u), so the log-log slope is exactly 1
        let model = build_model(&config(1, vec![2.0], vec![vec![1.0]], vec![1.0], vec![vec![1.0]])).unwrap();
        let bx = SamplingBox::uniform(1, 0.0, 50.0).unwrap();
        let report = validate_structure(&model, &bx, 200).unwrap();
        assert!((report.growth_exponent - 1.0).abs() < 1e-10, "{}", report.growth_exponent);
        // |lambda'| / lambda = 2 / (2 + 2u) peaks at u = 0
        assert!((report.lambda_sup.unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn strong_cross_diffusion_fails_ellipticity_loudly() {
        let model = build_model(&config(
            2,
            vec![0.1, 0.1],
            vec![vec![0.0, 5.0], vec![0.0, 0.0]],
            vec![1.0, 1.0],
            vec![vec![1.0, 0.0], vec![0.0, 1.0]],
        ))
        .unwrap();
        let bx = SamplingBox::uniform(2, 0.0, 4.0).unwrap();
        let report = validate_structure(&model, &bx, 32).unwrap();
        assert_eq!(report.ellipticity, CheckStatus::Fail);
        assert!(report.lambda_floor <= 0.0);
        assert_eq!(report.c_star, None);
    }

    #[test]
    fn sampling_box_rejects_empty() {
        assert!(SamplingBox::new(vec![1.0], vec![0.0]).is_err());
        assert!(SamplingBox::new(vec![], vec![]).is_err());
    }
}
