//! Local fixed-point indices at constant states and the resulting existence verdict.
//!
//! At a nontrivial constant state `u*` the linearized problem splits over the
//! Neumann modes. Mode `i >= 1` contributes the number `N_i` of real negative
//! eigenvalues of `d_A^{-1} A_i`, where `A_i = A(u*) - J / lambda_hat_i` and
//! `d_A` is the diagonal of `A(u*)`, weighted by the multiplicity `M_i`.
//! The constant mode contributes `N_0`, the number of real positive
//! eigenvalues of `J`; it is reported separately because the mode-wise
//! formula `(-1)^gamma` leaves it out.

use nalgebra::DMatrix;
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg;
use crate::model::{BoundaryCondition, Domain, Model};
use crate::spectral::{self, ModeSpectrum};
use crate::steady_states::{self, ConstantState, ConstantStates, StateClass};
use crate::tol;

/// Modes past the certified cutoff that are still decided and checked.
pub const SAFETY_SCAN: usize = 3;
/// Above this many lattice points the Bauer-Fike cutoff is replaced by the crossing bound.
const MAX_CUTOFF_MODES: f64 = 1e5;

pub const ASSUMPTION_NO_NONCONSTANT_SEMITRIVIAL: &str =
    "no nonconstant semitrivial solutions exist (not verifiable numerically)";
pub const ASSUMPTION_CONSTANTS_EXHAUST: &str =
    "the listed constant states exhaust the trivial and semitrivial solutions";

/// `A(u*)`, `J = f'(u*)` and the diagonal `d_A` of `A(u*)`.
#[derive(Clone, Debug, PartialEq)]
pub struct Linearization {
    pub u_star: Vec<f64>,
    pub a: DMatrix<f64>,
    pub j: DMatrix<f64>,
    pub d_a: Vec<f64>,
}

impl Linearization {
    pub fn at(model: &Model, u_star: &[f64]) -> Result<Self> {
        let e = model.evaluate(u_star);
        let mut lin = Self::from_matrices(e.a, e.j)?;
        lin.u_star = u_star.to_vec();
        Ok(lin)
    }

    pub fn from_matrices(a: DMatrix<f64>, j: DMatrix<f64>) -> Result<Self> {
        if !a.is_square() || a.shape() != j.shape() {
            return Err(Error::Shape("A and J must be square of equal size".into()));
        }
        let d_a: Vec<f64> = a.diagonal().iter().copied().collect();
        if let Some(v) = d_a.iter().find(|v| !(**v > 0.0)) {
            return Err(Error::InvalidInput(format!("diagonal of A must be positive, found {v}")));
        }
        Ok(Linearization {
            u_star: Vec::new(),
            a,
            j,
            d_a,
        })
    }

    pub fn m(&self) -> usize {
        self.d_a.len()
    }

    fn scale_rows(&self, mat: &DMatrix<f64>) -> DMatrix<f64> {
        DMatrix::from_fn(mat.nrows(), mat.ncols(), |i, k| mat[(i, k)] / self.d_a[i])
    }
}

fn mode_matrix_of(lin: &Linearization, lambda_hat: f64) -> Result<DMatrix<f64>> {
    if !(lambda_hat > 0.0) {
        return Err(Error::ZeroMode(lambda_hat));
    }
    Ok(&lin.a - &lin.j / lambda_hat)
}

/// `A_i = A(u*) - J(u*) / lambda_hat`.
pub fn mode_matrix(model: &Model, u_star: &[f64], lambda_hat: f64) -> Result<DMatrix<f64>> {
    mode_matrix_of(&Linearization::at(model, u_star)?, lambda_hat)
}

#[derive(Clone, Debug, PartialEq)]
pub struct NegativeCount {
    pub n: usize,
    pub eigs: Vec<Complex64>,
    pub margin: f64,
    pub degenerate: bool,
    pub defective: bool,
}

/// Real negative eigenvalues of `d_A^{-1} A_i`, counted with algebraic multiplicity.
pub fn negative_count(d_a: &[f64], ai: &DMatrix<f64>) -> Result<NegativeCount> {
    if d_a.len() != ai.nrows() || !ai.is_square() {
        return Err(Error::Shape("d_A and A_i sizes differ".into()));
    }
    if let Some(v) = d_a.iter().find(|v| !(**v > 0.0)) {
        return Err(Error::InvalidInput(format!("d_A entries must be positive, found {v}")));
    }
    let b = DMatrix::from_fn(ai.nrows(), ai.ncols(), |i, k| ai[(i, k)] / d_a[i]);
    let (eigs, _) = linalg::eigen(&b)?;
    let scale = linalg::spectral_scale(&eigs);
    let threshold = tol::DEGENERATE * b.norm().max(f64::MIN_POSITIVE);

    let margin = eigs.iter().map(|z| z.re.abs()).fold(f64::INFINITY, f64::min);
    let degenerate = margin <= threshold;
    let negatives: Vec<f64> = eigs
        .iter()
        .filter(|z| linalg::is_real(**z, scale) && z.re < -threshold)
        .map(|z| z.re)
        .collect();

    // algebraic vs geometric multiplicity on clusters of counted eigenvalues
    let mut defective = false;
    let mut sorted = negatives.clone();
    sorted.sort_by(f64::total_cmp);
    let cluster_tol = 1e-6 * scale;
    let mut start = 0;
    while start < sorted.len() {
        let mut end = start + 1;
        while end < sorted.len() && sorted[end] - sorted[end - 1] <= cluster_tol {
            end += 1;
        }
        if end - start > 1 {
            let centre = sorted[start..end].iter().sum::<f64>() / (end - start) as f64;
            if linalg::geometric_multiplicity(&b, centre) < end - start {
                defective = true;
            }
        }
        start = end;
    }

    Ok(NegativeCount {
        n: negatives.len(),
        eigs,
        margin,
        degenerate,
        defective,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModeDecision {
    /// Position in the distinct-eigenvalue list (0 is the constant mode).
    pub mode: usize,
    pub lambda_hat: f64,
    pub multiplicity: usize,
    pub mode_indices: Vec<Vec<usize>>,
    pub a_i: Vec<Vec<f64>>,
    /// Eigenvalues of `d_A^{-1} A_i` as `[re, im]`.
    pub eigs: Vec<[f64; 2]>,
    pub n_neg: usize,
    pub margin: f64,
    pub degenerate: bool,
    pub defective: bool,
    /// False for the safety-scan modes past `L0`.
    pub within_cutoff: bool,
}

impl ModeDecision {
    pub fn a_i_matrix(&self) -> DMatrix<f64> {
        let m = self.a_i.len();
        DMatrix::from_fn(m, m, |i, k| self.a_i[i][k])
    }
}

fn rows(mat: &DMatrix<f64>) -> Vec<Vec<f64>> {
    (0..mat.nrows()).map(|i| mat.row(i).iter().copied().collect()).collect()
}

fn pairs(eigs: &[Complex64]) -> Vec<[f64; 2]> {
    let mut out: Vec<[f64; 2]> = eigs.iter().map(|z| [z.re, z.im]).collect();
    out.sort_by(|a, b| a[0].total_cmp(&b[0]).then(a[1].total_cmp(&b[1])));
    out
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CutoffMethod {
    /// No eigenvalue of `d_A^{-1} A_i` reaches the closed left half-plane past the bound.
    BauerFike,
    /// Past the last real positive eigenvalue of `A^{-1} J` no determinant changes sign,
    /// so only the parity of the tail is certified.
    CrossingParity,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CutoffCertificate {
    pub method: CutoffMethod,
    /// min Re eig(d_A^{-1} A(u*))
    pub rho: f64,
    pub kappa_v: f64,
    pub norm_dinv_j: f64,
    /// Modes with `lambda_hat <= bound` are decided.
    pub bound: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModeCutoff {
    pub l0: usize,
    pub certificate: CutoffCertificate,
    pub warnings: Vec<String>,
}

fn cutoff_for(lin: &Linearization, domain: &Domain) -> Result<ModeCutoff> {
    let b = lin.scale_rows(&lin.a);
    let (eigs, vecs) = linalg::eigen(&b)?;
    let rho = eigs.iter().map(|z| z.re).fold(f64::INFINITY, f64::min);
    if !(rho > 0.0) {
        return Err(Error::CutoffUncertifiable(format!(
            "d_A^{{-1}} A(u*) has an eigenvalue with real part {rho:.6e} <= 0"
        )));
    }
    let kappa_v = linalg::condition_number(&vecs);
    let norm_dinv_j = linalg::spectral_norm(&lin.scale_rows(&lin.j));
    let mut warnings = Vec::new();

    let bf_bound = if norm_dinv_j == 0.0 { 0.0 } else { kappa_v * norm_dinv_j / rho };
    let (method, bound) = if bf_bound.is_finite() && spectral::lattice_count_estimate(domain, bf_bound) <= MAX_CUTOFF_MODES
    {
        (CutoffMethod::BauerFike, bf_bound)
    } else {
        let lu = lin.a.clone().lu();
        let Some(inv) = lu.try_inverse() else {
            return Err(Error::CutoffUncertifiable("A(u*) is singular".into()));
        };
        let crossings = linalg::eigenvalues(&linalg::to_faer(&(inv * &lin.j)))?;
        let scale = linalg::spectral_scale(&crossings);
        let last = crossings
            .iter()
            .filter(|z| linalg::is_real(**z, scale) && z.re > 0.0)
            .map(|z| z.re)
            .fold(0.0, f64::max);
        let bound = last * (1.0 + 1e-6);
        if spectral::lattice_count_estimate(domain, bound) > MAX_CUTOFF_MODES {
            return Err(Error::CutoffUncertifiable(format!(
                "determinant crossings extend to lambda_hat = {last:.6e}, too many modes"
            )));
        }
        warnings.push(format!(
            "Bauer-Fike bound {bf_bound:.3e} unusable (kappa_V = {kappa_v:.3e}); cutoff certifies parity only"
        ));
        (CutoffMethod::CrossingParity, bound)
    };
    let l0 = spectral::neumann_eigenvalues_up_to(domain, bound).entries.len() - 1;
    Ok(ModeCutoff {
        l0,
        certificate: CutoffCertificate {
            method,
            rho,
            kappa_v,
            norm_dinv_j,
            bound,
        },
        warnings,
    })
}

/// Index `L0` past which no mode contributes to `gamma`.
pub fn mode_cutoff(model: &Model, u_star: &[f64]) -> Result<ModeCutoff> {
    cutoff_for(&Linearization::at(model, u_star)?, model.domain())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModeDeterminant {
    pub mode: usize,
    pub lambda_hat: f64,
    /// |det(lambda_hat A - J)| divided by the product of the row scales of `lambda_hat A` and `J`.
    pub ratio: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Nondegeneracy {
    pub nondegenerate: bool,
    pub modes: Vec<ModeDeterminant>,
    pub offending: Vec<usize>,
}

/// `|det(lambda_hat A - J)|` over the product of the row scales `lambda_hat |A_r| + |J_r|`.
fn determinant_ratio(lin: &Linearization, lambda_hat: f64) -> f64 {
    let mat = &lin.a * lambda_hat - &lin.j;
    let scale: f64 = (0..mat.nrows())
        .map(|i| lambda_hat * lin.a.row(i).norm() + lin.j.row(i).norm())
        .product();
    if scale == 0.0 {
        0.0
    } else {
        mat.determinant().abs() / scale
    }
}

fn nondegeneracy_of(lin: &Linearization, spectrum: &ModeSpectrum) -> Nondegeneracy {
    let modes: Vec<ModeDeterminant> = spectrum
        .entries
        .iter()
        .enumerate()
        .map(|(mode, e)| ModeDeterminant {
            mode,
            lambda_hat: e.lambda_hat,
            ratio: determinant_ratio(lin, e.lambda_hat),
        })
        .collect();
    let offending: Vec<usize> = modes.iter().filter(|d| !(d.ratio > tol::DEGENERATE)).map(|d| d.mode).collect();
    Nondegeneracy {
        nondegenerate: offending.is_empty(),
        modes,
        offending,
    }
}

/// `Ker(lambda_hat_i A(u*) - J(u*)) = {0}` for every listed mode, including `lambda_hat = 0`.
pub fn check_nondegeneracy(model: &Model, u_star: &[f64], spectrum: &ModeSpectrum) -> Result<Nondegeneracy> {
    Ok(nondegeneracy_of(&Linearization::at(model, u_star)?, spectrum))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IndexReport {
    pub u_star: Vec<f64>,
    pub mode_decisions: Vec<ModeDecision>,
    pub l0: usize,
    pub cutoff: CutoffCertificate,
    pub gamma: usize,
    /// `(-1)^gamma`; absent when degenerate.
    pub index: Option<i32>,
    /// Real positive eigenvalues of `J` (constant mode), with multiplicity.
    pub homogeneous_count: usize,
    pub homogeneous_eigs: Vec<[f64; 2]>,
    /// `(-1)^(gamma + N_0)`, the index of the full linearized solution map.
    pub full_index: Option<i32>,
    pub nondegenerate: bool,
    pub nondegeneracy: Nondegeneracy,
    pub warnings: Vec<String>,
}

fn parity(n: usize) -> i32 {
    if n % 2 == 0 {
        1
    } else {
        -1
    }
}

/// Index computation from `A(u*)` and `J(u*)` on a Neumann domain.
pub fn index_from_linearization(lin: &Linearization, domain: &Domain) -> Result<IndexReport> {
    let cutoff = cutoff_for(lin, domain)?;
    let spectrum = spectral::neumann_eigenvalues(domain, cutoff.l0 + 1 + SAFETY_SCAN);
    let nondegeneracy = nondegeneracy_of(lin, &spectrum);
    let mut warnings = cutoff.warnings.clone();

    let decisions: Vec<ModeDecision> = spectrum.entries[1..]
        .par_iter()
        .enumerate()
        .map(|(k, entry)| -> Result<ModeDecision> {
            let mode = k + 1;
            let ai = mode_matrix_of(lin, entry.lambda_hat)?;
            let count = negative_count(&lin.d_a, &ai)?;
            Ok(ModeDecision {
                mode,
                lambda_hat: entry.lambda_hat,
                multiplicity: entry.multiplicity,
                mode_indices: entry.mode_indices.clone(),
                a_i: rows(&ai),
                eigs: pairs(&count.eigs),
                n_neg: count.n,
                margin: count.margin,
                degenerate: count.degenerate,
                defective: count.defective,
                within_cutoff: mode <= cutoff.l0,
            })
        })
        .collect::<Result<_>>()?;

    let (j_eigs, _) = linalg::eigen(&lin.j)?;
    let j_scale = linalg::spectral_scale(&j_eigs);
    let homogeneous_count = j_eigs
        .iter()
        .filter(|z| linalg::is_real(**z, j_scale) && z.re > 0.0)
        .count();

    let gamma: usize = decisions
        .iter()
        .filter(|d| d.within_cutoff)
        .map(|d| d.n_neg * d.multiplicity)
        .sum();
    for d in &decisions {
        if d.defective {
            warnings.push(format!(
                "mode {} (lambda_hat = {:.6}): a counted eigenvalue is defective; algebraic multiplicity used",
                d.mode, d.lambda_hat
            ));
        }
        if d.degenerate {
            warnings.push(format!("mode {} (lambda_hat = {:.6}) is degenerate", d.mode, d.lambda_hat));
        }
        if !d.within_cutoff && d.n_neg > 0 && cutoff.certificate.method == CutoffMethod::BauerFike {
            warnings.push(format!("safety scan found N = {} at mode {} past the cutoff", d.n_neg, d.mode));
        }
    }
    if nondegeneracy.offending.contains(&0) {
        warnings.push("det J(u*) vanishes: the constant state is not isolated".into());
    }

    let nondegenerate = nondegeneracy.nondegenerate && decisions.iter().all(|d| !d.degenerate);
    let index = nondegenerate.then(|| parity(gamma));
    let full_index = nondegenerate.then(|| parity(gamma + homogeneous_count));
    if nondegenerate && index != full_index {
        warnings.push(format!(
            "constant mode has N_0 = {homogeneous_count} (odd): index of the solution map is {} while (-1)^gamma = {}",
            parity(gamma + homogeneous_count),
            parity(gamma)
        ));
    }

    Ok(IndexReport {
        u_star: lin.u_star.clone(),
        mode_decisions: decisions,
        l0: cutoff.l0,
        cutoff: cutoff.certificate,
        gamma,
        index,
        homogeneous_count,
        homogeneous_eigs: pairs(&j_eigs),
        full_index,
        nondegenerate,
        nondegeneracy,
        warnings,
    })
}

/// Decision for a single entry of the distinct Neumann spectrum, regardless of the cutoff.
pub fn mode_decision(model: &Model, u_star: &[f64], mode: usize) -> Result<ModeDecision> {
    if mode == 0 {
        return Err(Error::ZeroMode(0.0));
    }
    let lin = Linearization::at(model, u_star)?;
    let spectrum = spectral::neumann_eigenvalues(model.domain(), mode + 1);
    let entry = &spectrum.entries[mode];
    let ai = mode_matrix_of(&lin, entry.lambda_hat)?;
    let count = negative_count(&lin.d_a, &ai)?;
    Ok(ModeDecision {
        mode,
        lambda_hat: entry.lambda_hat,
        multiplicity: entry.multiplicity,
        mode_indices: entry.mode_indices.clone(),
        a_i: rows(&ai),
        eigs: pairs(&count.eigs),
        n_neg: count.n,
        margin: count.margin,
        degenerate: count.degenerate,
        defective: count.defective,
        within_cutoff: cutoff_for(&lin, model.domain()).map(|c| mode <= c.l0).unwrap_or(false),
    })
}

pub fn constant_state_index(model: &Model, u_star: &[f64]) -> Result<IndexReport> {
    if model.bc() != BoundaryCondition::Neumann {
        return Err(Error::RequiresNeumann);
    }
    if u_star.len() != model.m() {
        return Err(Error::Shape(format!("u_star has length {}, expected {}", u_star.len(), model.m())));
    }
    index_from_linearization(&Linearization::at(model, u_star)?, model.domain())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum VClass {
    VStable,
    VUnstable,
    Degenerate,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ComplementSign {
    pub component: usize,
    pub g: f64,
    pub sign: i32,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StabilityVerdict {
    pub state: ConstantState,
    pub complement_signs: Vec<ComplementSign>,
    pub v_class: VClass,
}

/// Sign test of `g_i` in every direction that vanishes at the state.
pub fn semitrivial_stability(model: &Model, state: &ConstantState) -> Result<StabilityVerdict> {
    if model.bc() != BoundaryCondition::Neumann {
        return Err(Error::RequiresNeumann);
    }
    if state.classification == StateClass::Nontrivial {
        return Err(Error::InvalidInput("state has full support".into()));
    }
    let g = model.growth(&state.u_star);
    let complement_signs: Vec<ComplementSign> = (0..model.m())
        .filter(|&i| !state.support[i])
        .map(|i| ComplementSign {
            component: i,
            g: g[i],
            sign: if g[i].abs() <= tol::SIGN {
                0
            } else if g[i] > 0.0 {
                1
            } else {
                -1
            },
        })
        .collect();
    let v_class = if complement_signs.iter().any(|c| c.sign == 0) {
        VClass::Degenerate
    } else if complement_signs.iter().any(|c| c.sign > 0) {
        VClass::VUnstable
    } else {
        VClass::VStable
    };
    Ok(StabilityVerdict {
        state: state.clone(),
        complement_signs,
        v_class,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundaryContribution {
    pub u_star: Vec<f64>,
    pub support: Vec<bool>,
    pub v_class: VClass,
    pub local_index: Option<i32>,
    pub reason: String,
    /// Index of the subsystem on the support, used for v-stable semitrivial states.
    pub restricted_index: Option<IndexReport>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NontrivialContribution {
    pub u_star: Vec<f64>,
    pub report: Option<IndexReport>,
    pub error: Option<String>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum VerdictStatus {
    Conclusive,
    Inconclusive,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExistenceVerdict {
    pub status: VerdictStatus,
    /// Sign-pattern case for two species: a, b, c, "c (relabelled)" or none.
    pub case_label: Option<String>,
    pub case_boundary_sum: Option<i32>,
    pub boundary: Vec<BoundaryContribution>,
    pub sum_of_boundary_indices: Option<i32>,
    pub nontrivial_constant_indices: Vec<NontrivialContribution>,
    /// Boundary sum plus the full index of every nontrivial constant state.
    pub total: Option<i32>,
    /// Same sum with `(-1)^gamma` in place of the full index.
    pub total_mode_formula: Option<i32>,
    /// Boundary sum differs from 1: some positive solution exists.
    pub predicts_nontrivial: Option<bool>,
    pub predicts_nonconstant: Option<bool>,
    pub statement: String,
    pub causes: Vec<String>,
    pub assumptions: Vec<String>,
    pub warnings: Vec<String>,
    /// Bookkeeping beyond the two-species theorem.
    pub experimental: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IndexAnalysis {
    pub states: ConstantStates,
    pub stability: Vec<StabilityVerdict>,
    pub verdict: ExistenceVerdict,
}

fn case_analysis(model: &Model, states: &ConstantStates) -> (Option<String>, Option<i32>) {
    if model.m() != 2 {
        return (None, None);
    }
    let r = model.r();
    let find = |support: [bool; 2]| {
        states
            .states
            .iter()
            .find(|s| s.support == support)
            .map(|s| model.growth(&s.u_star))
    };
    let g_at_u1 = find([true, false]);
    let g_at_u2 = find([false, true]);
    let label = match (g_at_u1, g_at_u2) {
        (Some(g1), Some(g2)) if r[0] > 0.0 && r[1] > 0.0 && g1[1] > 0.0 && g2[0] > 0.0 => Some(("a", 0)),
        (Some(g1), Some(g2)) if r[0] > 0.0 && r[1] > 0.0 && g1[1] < 0.0 && g2[0] < 0.0 => Some(("b", 2)),
        (Some(g1), _) if r[0] > 0.0 && r[1] < 0.0 && g1[1] > 0.0 => Some(("c", 0)),
        (_, Some(g2)) if r[1] > 0.0 && r[0] < 0.0 && g2[0] > 0.0 => Some(("c (relabelled)", 0)),
        _ => None,
    };
    match label {
        Some((l, s)) => (Some(l.to_string()), Some(s)),
        None => (Some("none".to_string()), None),
    }
}

fn boundary_contribution(model: &Model, verdict: &StabilityVerdict) -> BoundaryContribution {
    let state = &verdict.state;
    let base = |local_index, reason: &str, restricted_index| BoundaryContribution {
        u_star: state.u_star.clone(),
        support: state.support.clone(),
        v_class: verdict.v_class,
        local_index,
        reason: reason.to_string(),
        restricted_index,
    };
    match verdict.v_class {
        VClass::Degenerate => base(None, "a complementary growth rate vanishes", None),
        VClass::VUnstable => base(Some(0), "unstable in a complementary direction", None),
        VClass::VStable if state.classification == StateClass::Trivial => {
            base(Some(1), "stable in every direction", None)
        }
        VClass::VStable => {
            let sub = model.restricted(&state.support);
            match constant_state_index(&sub, &state.restricted_state()) {
                Ok(report) => match report.full_index {
                    Some(i) => base(Some(i), "v-stable: index of the subsystem on the support", Some(report)),
                    None => base(None, "subsystem on the support is degenerate", Some(report)),
                },
                Err(e) => base(None, &format!("subsystem index failed: {e}"), None),
            }
        }
    }
}

/// Full index bookkeeping: states, boundary stability, nontrivial indices, verdict.
pub fn analyze_indices(model: &Model) -> Result<IndexAnalysis> {
    if model.bc() != BoundaryCondition::Neumann {
        return Err(Error::RequiresNeumann);
    }
    let states = steady_states::find_constant_states(model)?;
    let stability: Vec<StabilityVerdict> = states
        .states
        .iter()
        .filter(|s| s.classification != StateClass::Nontrivial)
        .map(|s| semitrivial_stability(model, s))
        .collect::<Result<_>>()?;
    let boundary: Vec<BoundaryContribution> = stability.iter().map(|v| boundary_contribution(model, v)).collect();
    let nontrivial: Vec<NontrivialContribution> = states
        .states
        .iter()
        .filter(|s| s.classification == StateClass::Nontrivial)
        .map(|s| match constant_state_index(model, &s.u_star) {
            Ok(report) => NontrivialContribution {
                u_star: s.u_star.clone(),
                report: Some(report),
                error: None,
            },
            Err(e) => NontrivialContribution {
                u_star: s.u_star.clone(),
                report: None,
                error: Some(e.to_string()),
            },
        })
        .collect();

    let mut causes = Vec::new();
    let mut warnings = Vec::new();
    for d in &states.degenerate_subsets {
        causes.push(format!("degenerate-subset {:?}: {}", d.support, d.note));
    }
    for b in &boundary {
        if b.local_index.is_none() {
            causes.push(format!("boundary state {:?}: {}", b.u_star, b.reason));
        }
    }
    for n in &nontrivial {
        match (&n.report, &n.error) {
            (_, Some(e)) => causes.push(format!("nontrivial state {:?}: {e}", n.u_star)),
            (Some(r), None) if !r.nondegenerate => {
                causes.push(format!("nontrivial state {:?}: degenerate modes {:?}", n.u_star, r.nondegeneracy.offending))
            }
            (Some(r), None) => warnings.extend(r.warnings.iter().map(|w| format!("at {:?}: {w}", n.u_star))),
            _ => {}
        }
    }

    let (case_label, case_boundary_sum) = case_analysis(model, &states);
    let conclusive = causes.is_empty();
    let sum_of_boundary_indices: Option<i32> =
        conclusive.then(|| boundary.iter().map(|b| b.local_index.unwrap_or(0)).sum());
    let total = sum_of_boundary_indices.map(|s| {
        s + nontrivial
            .iter()
            .filter_map(|n| n.report.as_ref().and_then(|r| r.full_index))
            .sum::<i32>()
    });
    let total_mode_formula = sum_of_boundary_indices.map(|s| {
        s + nontrivial
            .iter()
            .filter_map(|n| n.report.as_ref().and_then(|r| r.index))
            .sum::<i32>()
    });
    if let (Some(case_sum), Some(sum)) = (case_boundary_sum, sum_of_boundary_indices) {
        if case_sum != sum {
            warnings.push(format!("boundary sum {sum} differs from the case table value {case_sum}"));
        }
    }
    if total != total_mode_formula {
        warnings.push(format!(
            "mode formula without the constant mode gives total {:?}, the full index gives {:?}",
            total_mode_formula, total
        ));
    }

    let predicts_nontrivial = sum_of_boundary_indices.map(|s| s != 1);
    let predicts_nonconstant = total.map(|t| t != 1);
    let case_suffix = match case_label.as_deref() {
        Some(l) if l != "none" => format!(" (case {l})"),
        _ => String::new(),
    };
    let statement = match (total, sum_of_boundary_indices) {
        (Some(t), Some(s)) => {
            let mut parts = Vec::new();
            if s != 1 {
                parts.push(format!("nontrivial positive solution exists{case_suffix}"));
            }
            if t != 1 {
                parts.push(format!("nonconstant positive solution predicted (total index {t} != 1)"));
            }
            if parts.is_empty() {
                format!("no prediction: total index {t} is consistent with constant solutions only")
            } else {
                parts.join("; ")
            }
        }
        _ => format!("inconclusive: {}", causes.join("; ")),
    };

    Ok(IndexAnalysis {
        verdict: ExistenceVerdict {
            status: if conclusive {
                VerdictStatus::Conclusive
            } else {
                VerdictStatus::Inconclusive
            },
            case_label,
            case_boundary_sum,
            boundary,
            sum_of_boundary_indices,
            nontrivial_constant_indices: nontrivial,
            total,
            total_mode_formula,
            predicts_nontrivial,
            predicts_nonconstant,
            statement,
            causes,
            assumptions: vec![
                ASSUMPTION_NO_NONCONSTANT_SEMITRIVIAL.to_string(),
                ASSUMPTION_CONSTANTS_EXHAUST.to_string(),
            ],
            warnings,
            experimental: model.m() != 2,
        },
        states,
        stability,
    })
}

pub fn existence_verdict(model: &Model) -> Result<ExistenceVerdict> {
    Ok(analyze_indices(model)?.verdict)
}
