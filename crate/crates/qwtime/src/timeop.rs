//! Strong time operators of walk evolutions: construction and application,
//! commutation residuals, uncertainty, deficiency-index classification,
//! energy representation, deficiency vectors, truncated-matrix spectra and
//! the tensor construction on the plane.
//!
//! Two sign conventions coexist and are never mixed:
//! - self-adjoint case (`e^{itH} T e^{-itH} = T + t` for the multiplication
//!   operator by `g(k)`): `T = -(1/2) (1/g' P + P 1/g')`;
//! - unitary case (`U* T U = T + 1` for the multiplication operator by
//!   `lambda(k) = e^{i g(k)}`): `T = +(1/2) (1/g' P + P 1/g')` with
//!   `g' = m + theta'`.
//!
//! The dense operator domains are represented by fields that vanish within
//! a fixed margin of every zero of `g'`; applying `T` to anything else is a
//! hard [`QwError::DomainViolation`].

use std::f64::consts::PI;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;

use crate::dispersion::{Band, GPrimeForm};
use crate::error::{QwError, Result};
use crate::mat2;
use crate::models::MomentumWalk;
use crate::spectral::{
    apply_p, circle_distance, inner, spectral_derivative_real, Field, Field2, MomentumGrid,
    Representation, SpinorField, TrigSeries,
};

const TWO_PI: f64 = 2.0 * PI;

/// Exclusion margin around each zero of `g'`.
pub const DOMAIN_MARGIN: f64 = 0.05;

/// Amplitude below which a field counts as vanishing inside a margin.
pub const DOMAIN_AMPLITUDE_TOL: f64 = 1e-12;

/// Which commutation relation the operator realizes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TimeOpCase {
    /// `e^{itg(k)} T e^{-itg(k)} = T + t`.
    SelfAdjoint,
    /// `lambda(k)* T lambda(k) = T + 1`.
    Unitary,
}

enum KernelForm {
    Band {
        form: GPrimeForm,
        theta: TrigSeries,
    },
    /// The continuous-time energy curve `g(k) = cos k`.
    Cosine,
}

/// The sampled data of one time operator: `g`, `g'`, `g''`, the zeros of
/// `g'` and the sign convention.
pub struct TimeKernel {
    grid: MomentumGrid,
    case: TimeOpCase,
    g: Vec<f64>,
    g_prime: Vec<f64>,
    g_dprime: Vec<f64>,
    zeros: Vec<f64>,
    winding: i64,
    form: KernelForm,
}

impl TimeKernel {
    /// Unitary-case operator attached to a dispersion branch.
    pub fn from_band(band: &Band) -> Self {
        let g_dprime = spectral_derivative_real(band.g_prime());
        Self {
            grid: band.grid(),
            case: TimeOpCase::Unitary,
            g: band.g().to_vec(),
            g_prime: band.g_prime().to_vec(),
            g_dprime,
            zeros: band.zeros().iter().map(|z| z.location).collect(),
            winding: band.winding(),
            form: KernelForm::Band {
                form: band.g_prime_form().clone(),
                theta: band.theta_series(),
            },
        }
    }

    /// Self-adjoint-case operator for the energy curve `g(k) = cos k`, the
    /// momentum-space form of the continuous-time walk Hamiltonian.
    pub fn cosine(grid: MomentumGrid) -> Self {
        Self {
            grid,
            case: TimeOpCase::SelfAdjoint,
            g: grid.points().map(f64::cos).collect(),
            g_prime: grid.points().map(|k| -k.sin()).collect(),
            g_dprime: grid.points().map(|k| -k.cos()).collect(),
            zeros: vec![0.0, PI],
            winding: 0,
            form: KernelForm::Cosine,
        }
    }

    pub fn grid(&self) -> MomentumGrid {
        self.grid
    }

    pub fn case(&self) -> TimeOpCase {
        self.case
    }

    pub fn zeros(&self) -> &[f64] {
        &self.zeros
    }

    pub fn winding(&self) -> i64 {
        self.winding
    }

    pub fn g_samples(&self) -> &[f64] {
        &self.g
    }

    pub fn g_prime_samples(&self) -> &[f64] {
        &self.g_prime
    }

    pub fn g_at(&self, k: f64) -> f64 {
        match &self.form {
            KernelForm::Band { theta, .. } => self.winding as f64 * k + theta.eval_real(k),
            KernelForm::Cosine => k.cos(),
        }
    }

    pub fn g_prime_at(&self, k: f64) -> f64 {
        match &self.form {
            KernelForm::Band { form, .. } => form.eval(k),
            KernelForm::Cosine => -k.sin(),
        }
    }

    fn sign(&self) -> f64 {
        match self.case {
            TimeOpCase::SelfAdjoint => -1.0,
            TimeOpCase::Unitary => 1.0,
        }
    }

    fn in_margin(&self, k: f64) -> bool {
        self.zeros
            .iter()
            .any(|&z| circle_distance(k, z) < DOMAIN_MARGIN)
    }

    fn margin_mask(&self) -> Vec<bool> {
        (0..self.grid.n())
            .map(|j| self.in_margin(self.grid.k(j)))
            .collect()
    }

    /// Verifies the domain condition: `|f| < 1e-12` on every grid point
    /// within the margin of a zero of `g'`.
    pub fn check_admissible(&self, f: &Field) -> Result<()> {
        if f.rep() != Representation::Momentum {
            return Err(QwError::RepresentationMismatch {
                expected: "momentum",
                got: "position",
            });
        }
        if f.grid() != self.grid {
            return Err(QwError::GridMismatch);
        }
        if !self.zeros.is_empty() {
            let mask = self.margin_mask();
            if mask.iter().all(|&m| m) {
                return Err(QwError::NoZeroFreeDomain);
            }
            for (j, &inside) in mask.iter().enumerate() {
                let value = f.values()[j].norm();
                if inside && value >= DOMAIN_AMPLITUDE_TOL {
                    return Err(QwError::DomainViolation {
                        k: self.grid.k(j),
                        value,
                        margin: DOMAIN_MARGIN,
                    });
                }
            }
        }
        Ok(())
    }

    /// Applies the time operator
    /// `T f = sign * (1/2) ((1/g') Pf + P ((1/g') f))` by spectral
    /// differentiation, with values inside the exclusion margins pinned to
    /// zero on both input and output.
    pub fn apply(&self, f: &Field) -> Result<Field> {
        self.check_admissible(f)?;
        let values = self.apply_raw(f.values());
        Field::new(self.grid, Representation::Momentum, values)
    }

    pub(crate) fn apply_raw(&self, values: &[Complex64]) -> Vec<Complex64> {
        let n = self.grid.n();
        let mask = self.margin_mask();
        let zero = Complex64::new(0.0, 0.0);
        let masked = |vals: Vec<Complex64>| -> Vec<Complex64> {
            vals.into_iter()
                .enumerate()
                .map(|(j, v)| if mask[j] { zero } else { v })
                .collect()
        };
        let u = masked(values.to_vec());
        let u_field = Field::new(self.grid, Representation::Momentum, u.clone()).expect("grid");
        let pu = apply_p(&u_field).expect("momentum field");
        let mut t1 = Vec::with_capacity(n);
        let mut w = Vec::with_capacity(n);
        for j in 0..n {
            if mask[j] {
                t1.push(zero);
                w.push(zero);
            } else {
                let h = 1.0 / self.g_prime[j];
                t1.push(pu.values()[j] * h);
                w.push(u[j] * h);
            }
        }
        let w_field = Field::new(self.grid, Representation::Momentum, w).expect("grid");
        let t2 = apply_p(&w_field).expect("momentum field");
        let half_sign = 0.5 * self.sign();
        masked(
            t1.iter()
                .zip(t2.values())
                .map(|(a, b)| (a + b) * half_sign)
                .collect(),
        )
    }

    /// Evaluates the classical differential expression
    /// `T f = -sign * (i/2) (2 f'/g' - (g''/g'^2) f)` at grid point `j`
    /// from caller-supplied `f(k_j)` and `f'(k_j)`. This sidesteps global
    /// spectral differentiation for functions that are smooth only inside
    /// one branch (deficiency vectors).
    pub fn apply_classical_at(
        &self,
        j: usize,
        value: Complex64,
        derivative: Complex64,
    ) -> Complex64 {
        let gp = self.g_prime[j];
        let gpp = self.g_dprime[j];
        let sum = 2.0 / gp * derivative - gpp / (gp * gp) * value;
        Complex64::new(0.0, -0.5 * self.sign()) * sum
    }

    /// Uncertainty `(Delta T)_f = ||Tf - <f, Tf> f||` for a unit vector.
    /// `<f, Tf>` must come out real; a large imaginary part indicates a
    /// symmetry defect and is an error.
    pub fn uncertainty(&self, f: &Field) -> Result<f64> {
        let norm = f.norm();
        if (norm - 1.0).abs() > 1e-10 {
            return Err(QwError::NotNormalized { norm });
        }
        let tf = self.apply(f)?;
        let mean = inner(f, &tf)?;
        if mean.im.abs() > 1e-8 {
            return Err(QwError::SymmetryDefect {
                defect: mean.im.abs(),
            });
        }
        let centered: Vec<Complex64> = tf
            .values()
            .iter()
            .zip(f.values())
            .map(|(t, v)| t - Complex64::new(mean.re, 0.0) * v)
            .collect();
        Ok(Field::new(self.grid, Representation::Momentum, centered)?.norm())
    }
}

/// Relative residual of `U* T (U f) = T f + f` for the multiplication
/// operator `U = lambda(k)` of one branch.
pub fn commutation_residual_unitary(band: &Band, f: &Field) -> Result<f64> {
    let kernel = TimeKernel::from_band(band);
    kernel.check_admissible(f)?;
    let uf = crate::spectral::multiply(f, band.lambda())?;
    kernel.check_admissible(&uf)?;
    let t_uf = kernel.apply(&uf)?;
    let conj_lambda: Vec<Complex64> = band.lambda().iter().map(|l| l.conj()).collect();
    let back = crate::spectral::multiply(&t_uf, &conj_lambda)?;
    let tf = kernel.apply(f)?;
    let residual: Vec<Complex64> = back
        .values()
        .iter()
        .zip(tf.values())
        .zip(f.values())
        .map(|((a, b), c)| a - b - c)
        .collect();
    Ok(Field::new(f.grid(), Representation::Momentum, residual)?.norm() / f.norm())
}

/// Relative residual of `e^{itg} T (e^{-itg} f) = T f + t f` for the
/// continuous-time energy curve `g = cos k`.
pub fn commutation_residual_sa(f: &Field, t: f64) -> Result<f64> {
    let kernel = TimeKernel::cosine(f.grid());
    kernel.check_admissible(f)?;
    let grid = f.grid();
    let phase = |s: f64| -> Vec<Complex64> {
        grid.points()
            .map(|k| Complex64::from_polar(1.0, s * k.cos()))
            .collect()
    };
    let forward = crate::spectral::multiply(f, &phase(-t))?;
    let t_forward = kernel.apply(&forward)?;
    let back = crate::spectral::multiply(&t_forward, &phase(t))?;
    let tf = kernel.apply(f)?;
    let residual: Vec<Complex64> = back
        .values()
        .iter()
        .zip(tf.values())
        .zip(f.values())
        .map(|((a, b), c)| a - b - t * c)
        .collect();
    Ok(Field::new(grid, Representation::Momentum, residual)?.norm() / f.norm())
}

/// Applies the full walk time operator `T = W diag(T_1, T_2) W^{-1}` to a
/// momentum spinor; the per-band domain condition applies to the components
/// of `W^{-1} psi`.
pub fn apply_t_full(walk: &MomentumWalk, psi: &SpinorField) -> Result<SpinorField> {
    if psi.rep() != Representation::Momentum {
        return Err(QwError::RepresentationMismatch {
            expected: "momentum",
            got: "position",
        });
    }
    let grid = walk.grid();
    if psi.grid() != grid {
        return Err(QwError::GridMismatch);
    }
    let n = grid.n();
    let frame = walk.frame();
    let (band1, band2) = walk.bands();
    let mut c1 = Vec::with_capacity(n);
    let mut c2 = Vec::with_capacity(n);
    for j in 0..n {
        let c = frame.apply_inverse_at(j, &[psi.upper().values()[j], psi.lower().values()[j]]);
        c1.push(c[0]);
        c2.push(c[1]);
    }
    let k1 = TimeKernel::from_band(band1);
    let k2 = TimeKernel::from_band(band2);
    let t1 = k1.apply(&Field::new(grid, Representation::Momentum, c1)?)?;
    let t2 = k2.apply(&Field::new(grid, Representation::Momentum, c2)?)?;
    let mut up = Vec::with_capacity(n);
    let mut lo = Vec::with_capacity(n);
    for j in 0..n {
        let v = frame.apply_at(j, &[t1.values()[j], t2.values()[j]]);
        up.push(v[0]);
        lo.push(v[1]);
    }
    SpinorField::new(
        Field::new(grid, Representation::Momentum, up)?,
        Field::new(grid, Representation::Momentum, lo)?,
    )
}

/// Relative residual of `U* T (U psi) = T psi + psi` for the full walk.
pub fn commutation_residual_unitary_spinor(
    walk: &MomentumWalk,
    psi: &SpinorField,
) -> Result<f64> {
    let u_psi = walk.power_apply(psi, 1)?;
    let t_u_psi = apply_t_full(walk, &u_psi)?;
    let grid = walk.grid();
    let n = grid.n();
    let mut up = Vec::with_capacity(n);
    let mut lo = Vec::with_capacity(n);
    for j in 0..n {
        let adj = mat2::adjoint(&walk.symbol()[j]);
        let v = mat2::mul_vec(
            &adj,
            &[t_u_psi.upper().values()[j], t_u_psi.lower().values()[j]],
        );
        up.push(v[0]);
        lo.push(v[1]);
    }
    let back = SpinorField::new(
        Field::new(grid, Representation::Momentum, up)?,
        Field::new(grid, Representation::Momentum, lo)?,
    )?;
    let t_psi = apply_t_full(walk, psi)?;
    let mut sq = 0.0f64;
    for j in 0..n {
        let du = back.upper().values()[j] - t_psi.upper().values()[j] - psi.upper().values()[j];
        let dl = back.lower().values()[j] - t_psi.lower().values()[j] - psi.lower().values()[j];
        sq += du.norm_sqr() + dl.norm_sqr();
    }
    Ok((sq / n as f64).sqrt() / psi.norm())
}

/// Spectrum of one time operator as determined by winding and zero count.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SpectrumTag {
    /// `sigma(T) = { s / denominator : s integer }`.
    IntegersScaled { denominator: u32 },
    /// `sigma(T) = C`.
    ComplexPlane,
    /// Constant branches (`a = 0`): the evolution has two eigenvalues, a
    /// bounded self-adjoint time operator exists, but no strong one.
    TwoPoint,
}

impl std::fmt::Display for SpectrumTag {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            SpectrumTag::IntegersScaled { denominator: 1 } => write!(f, "Z"),
            SpectrumTag::IntegersScaled { denominator } => write!(f, "Z/{denominator}"),
            SpectrumTag::ComplexPlane => write!(f, "C"),
            SpectrumTag::TwoPoint => write!(f, "two-point"),
        }
    }
}

impl Serialize for SpectrumTag {
    fn serialize<S: serde::Serializer>(
        &self,
        serializer: S,
    ) -> std::result::Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

/// Deficiency indices and spectrum classification of one band's operator.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TimeOpClassification {
    pub zero_count: usize,
    pub deficiency: (usize, usize),
    pub spectrum: SpectrumTag,
    pub self_adjoint: bool,
    pub winding: i64,
}

/// Classifies the time operator of one branch:
/// - no zeros of `lambda'` (hence nonzero winding): self-adjoint with
///   spectrum `(1/|m|) Z`;
/// - `z > 0` zeros: deficiency indices `(z, z)` and spectrum `C`;
/// - constant branch (`a = 0`): two-point spectrum of the evolution, no
///   strong time operator exists (a bounded self-adjoint time operator
///   does; see [`two_eigenvalue_time_operator`]).
pub fn classify(band: &Band) -> TimeOpClassification {
    if band.is_constant() {
        return TimeOpClassification {
            zero_count: 0,
            deficiency: (0, 0),
            spectrum: SpectrumTag::TwoPoint,
            self_adjoint: false,
            winding: 0,
        };
    }
    let zero_count = band.zeros().len();
    if zero_count == 0 {
        TimeOpClassification {
            zero_count,
            deficiency: (0, 0),
            spectrum: SpectrumTag::IntegersScaled {
                denominator: band.winding().unsigned_abs() as u32,
            },
            self_adjoint: true,
            winding: band.winding(),
        }
    } else {
        TimeOpClassification {
            zero_count,
            deficiency: (zero_count, zero_count),
            spectrum: SpectrumTag::ComplexPlane,
            self_adjoint: false,
            winding: band.winding(),
        }
    }
}

/// One zero entry in a walk-level classification report.
#[derive(Debug, Clone, Serialize)]
pub struct ZeroReport {
    pub band: usize,
    pub k: f64,
    pub kind: String,
}

/// Classification of the full two-band walk operator.
#[derive(Debug, Clone, Serialize)]
pub struct WalkClassification {
    pub winding: [i64; 2],
    pub zeros: Vec<ZeroReport>,
    pub deficiency: [usize; 2],
    pub spectrum: SpectrumTag,
    pub self_adjoint: bool,
}

/// Combines the two branch classifications into the direct-sum operator's
/// report: deficiency indices add, the spectrum is the union.
pub fn classify_walk(band1: &Band, band2: &Band) -> WalkClassification {
    let c1 = classify(band1);
    let c2 = classify(band2);
    let mut zeros = Vec::new();
    for (idx, band) in [(1usize, band1), (2, band2)] {
        for z in band.zeros() {
            zeros.push(ZeroReport {
                band: idx,
                k: z.location,
                kind: match z.kind {
                    crate::dispersion::ZeroKind::SignChange => "sign-change".into(),
                    crate::dispersion::ZeroKind::Tangential => "tangential".into(),
                },
            });
        }
    }
    let spectrum = match (c1.spectrum, c2.spectrum) {
        (SpectrumTag::TwoPoint, SpectrumTag::TwoPoint) => SpectrumTag::TwoPoint,
        (SpectrumTag::ComplexPlane, _) | (_, SpectrumTag::ComplexPlane) => {
            SpectrumTag::ComplexPlane
        }
        (
            SpectrumTag::IntegersScaled { denominator: d1 },
            SpectrumTag::IntegersScaled { denominator: d2 },
        ) => {
            // Both branches of one walk wind oppositely with equal modulus,
            // so the union of the two lattices is the lattice itself.
            debug_assert_eq!(d1, d2);
            SpectrumTag::IntegersScaled {
                denominator: d1.max(d2),
            }
        }
        (a, SpectrumTag::TwoPoint) => a,
        (SpectrumTag::TwoPoint, b) => b,
    };
    WalkClassification {
        winding: [c1.winding, c2.winding],
        zeros,
        deficiency: [
            c1.deficiency.0 + c2.deficiency.0,
            c1.deficiency.1 + c2.deficiency.1,
        ],
        spectrum,
        self_adjoint: c1.self_adjoint && c2.self_adjoint,
    }
}

/// One maximal interval of monotone `g` between consecutive zeros of `g'`
/// (or the whole circle when `g'` never vanishes). The source interval may
/// extend past `2 pi` when the branch wraps the seam.
#[derive(Debug, Clone, Copy)]
pub struct EnergyBranch {
    pub source: (f64, f64),
    pub image: (f64, f64),
    pub increasing: bool,
}

impl EnergyBranch {
    /// The image interval sorted ascending.
    pub fn e_interval(&self) -> (f64, f64) {
        if self.increasing {
            self.image
        } else {
            (self.image.1, self.image.0)
        }
    }

    /// Inverts `E = g(k)` on the branch by monotone bisection.
    pub fn invert(&self, kernel: &TimeKernel, e: f64) -> f64 {
        let (mut lo, mut hi) = self.source;
        for _ in 0..80 {
            let mid = 0.5 * (lo + hi);
            let val = kernel.g_at(mid);
            let below = if self.increasing { val < e } else { val > e };
            if below {
                lo = mid;
            } else {
                hi = mid;
            }
            if hi - lo < 1e-12 {
                break;
            }
        }
        0.5 * (lo + hi)
    }
}

/// Splits the circle into monotone branches of `g` between the zeros of
/// `g'`. Constant kernels have no branches.
pub fn energy_branches(kernel: &TimeKernel) -> Result<Vec<EnergyBranch>> {
    let max_slope = kernel
        .g_prime
        .iter()
        .map(|g| g.abs())
        .fold(0.0f64, f64::max);
    if max_slope < 1e-12 {
        return Ok(Vec::new());
    }
    let mut points: Vec<f64> = kernel.zeros.clone();
    points.sort_by(f64::total_cmp);
    let intervals: Vec<(f64, f64)> = if points.is_empty() {
        vec![(0.0, TWO_PI)]
    } else {
        let n = points.len();
        (0..n)
            .map(|i| {
                let a = points[i];
                let b = if i + 1 < n {
                    points[i + 1]
                } else {
                    points[0] + TWO_PI
                };
                (a, b)
            })
            .collect()
    };
    let mut branches = Vec::with_capacity(intervals.len());
    for (a, b) in intervals {
        // Monotonicity guard on interior probe points.
        let mut min_slope = f64::INFINITY;
        let mut sign = 0.0f64;
        for i in 1..32 {
            let k = a + (b - a) * i as f64 / 32.0;
            let s = kernel.g_prime_at(k);
            if sign == 0.0 {
                sign = s.signum();
            }
            if s != 0.0 && s.signum() != sign {
                return Err(QwError::BranchNotMonotone { min_slope: 0.0 });
            }
            min_slope = min_slope.min(s.abs());
        }
        let ea = kernel.g_at(a);
        let eb = kernel.g_at(b);
        branches.push(EnergyBranch {
            source: (a, b),
            image: (ea, eb),
            increasing: eb > ea,
        });
    }
    Ok(branches)
}

/// A function sampled on a uniform energy grid over one branch image.
#[derive(Debug, Clone)]
pub struct EnergyFunction {
    pub e_grid: Vec<f64>,
    pub values: Vec<Complex64>,
}

impl EnergyFunction {
    pub fn spacing(&self) -> f64 {
        self.e_grid[1] - self.e_grid[0]
    }

    /// `int |u|^2 dE` by composite Simpson quadrature.
    pub fn norm_sq(&self) -> f64 {
        let sq: Vec<f64> = self.values.iter().map(|v| v.norm_sqr()).collect();
        simpson(&sq, self.spacing())
    }
}

fn simpson(values: &[f64], h: f64) -> f64 {
    let n = values.len();
    assert!(n >= 3 && n % 2 == 1, "Simpson needs an odd sample count");
    let mut acc = values[0] + values[n - 1];
    for (i, v) in values.iter().enumerate().take(n - 1).skip(1) {
        acc += if i % 2 == 1 { 4.0 * v } else { 2.0 * v };
    }
    acc * h / 3.0
}

/// Transforms a momentum field into the energy representation of one
/// branch: `(V f)(E) = f(g^{-1}(E)) / sqrt(2 pi |g'(g^{-1}(E))|)`, sampled
/// uniformly over the branch image with 2% endpoint margins.
pub fn energy_transform(
    kernel: &TimeKernel,
    branch: &EnergyBranch,
    f: &Field,
    n_e: usize,
) -> Result<EnergyFunction> {
    if f.rep() != Representation::Momentum {
        return Err(QwError::RepresentationMismatch {
            expected: "momentum",
            got: "position",
        });
    }
    let n_e = if n_e % 2 == 0 { n_e + 1 } else { n_e };
    let (lo, hi) = branch.e_interval();
    let len = hi - lo;
    let start = lo + 0.02 * len;
    let stop = hi - 0.02 * len;
    let series = TrigSeries::from_samples(f.values());
    let step = (stop - start) / (n_e - 1) as f64;
    let mut e_grid = Vec::with_capacity(n_e);
    let mut values = Vec::with_capacity(n_e);
    for i in 0..n_e {
        let e = start + step * i as f64;
        let k = branch.invert(kernel, e);
        let slope = kernel.g_prime_at(k).abs();
        e_grid.push(e);
        values.push(series.eval(k) / (TWO_PI * slope).sqrt());
    }
    Ok(EnergyFunction { e_grid, values })
}

/// `|sum_j ||V_j f||^2 - ||f||^2|`: the defect of energy-representation
/// unitarity for a given field.
pub fn energy_unitarity_defect(kernel: &TimeKernel, f: &Field, n_e: usize) -> Result<f64> {
    let branches = energy_branches(kernel)?;
    let mut total = 0.0;
    for branch in &branches {
        total += energy_transform(kernel, branch, f, n_e)?.norm_sq();
    }
    Ok((total - f.norm_sq()).abs())
}

/// Intertwining defect on one branch: the energy representation conjugates
/// `T` to `-i d/dE` (unitary case) or `+i d/dE` (self-adjoint case). The
/// derivative is taken by 4th-order centred differences on the uniform
/// energy grid and compared on interior points, relative to `||Tf||`.
pub fn energy_intertwining_defect(
    kernel: &TimeKernel,
    branch: &EnergyBranch,
    f: &Field,
    n_e: usize,
) -> Result<f64> {
    let tf = kernel.apply(f)?;
    let u = energy_transform(kernel, branch, f, n_e)?;
    let v = energy_transform(kernel, branch, &tf, n_e)?;
    let h = u.spacing();
    let n = u.values.len();
    let orientation = match kernel.case {
        TimeOpCase::Unitary => Complex64::new(0.0, -1.0),
        TimeOpCase::SelfAdjoint => Complex64::new(0.0, 1.0),
    };
    let mut diff_sq = 0.0;
    let mut ref_sq = 0.0;
    for i in 2..n - 2 {
        let d = (u.values[i - 2] - 8.0 * u.values[i - 1] + 8.0 * u.values[i + 1]
            - u.values[i + 2])
            / (12.0 * h);
        let lhs = orientation * d;
        diff_sq += (lhs - v.values[i]).norm_sqr();
        ref_sq += v.values[i].norm_sqr();
    }
    Ok((diff_sq / ref_sq).sqrt())
}

/// Pointwise residual of `(T - i*eigen_im) psi = 0` for the branch
/// deficiency vector `psi = sqrt(|g'|) e^{beta g}`, with `beta` fixed by
/// the case sign so `T psi = i*eigen_im*psi` holds identically in the
/// continuum. Evaluated through the classical differential expression on
/// grid points at least `interior_margin` inside the branch.
pub fn deficiency_vector_residual(
    kernel: &TimeKernel,
    branch: &EnergyBranch,
    eigen_im: f64,
    interior_margin: f64,
) -> Result<f64> {
    let beta = match kernel.case {
        TimeOpCase::SelfAdjoint => eigen_im,
        TimeOpCase::Unitary => -eigen_im,
    };
    let (a, b) = branch.source;
    let grid = kernel.grid;
    let mut max_residual: f64 = 0.0;
    let mut seen = false;
    for j in 0..grid.n() {
        let mut k = grid.k(j);
        if k < a {
            k += TWO_PI;
        }
        if k <= a + interior_margin || k >= b - interior_margin {
            continue;
        }
        seen = true;
        let g = kernel.g[j];
        let gp = kernel.g_prime[j];
        let gpp = kernel.g_dprime[j];
        let weight = Complex64::new((beta * g).exp(), 0.0);
        let psi = gp.abs().sqrt() * weight;
        let dpsi =
            (0.5 * gpp * gp.signum() / gp.abs().sqrt() + beta * gp * gp.abs().sqrt()) * weight;
        let t_psi = kernel.apply_classical_at(j, psi, dpsi);
        let residual = (t_psi - Complex64::new(0.0, eigen_im) * psi).norm() / psi.norm();
        max_residual = max_residual.max(residual);
    }
    if !seen {
        return Err(QwError::BranchNotMonotone { min_slope: 0.0 });
    }
    Ok(max_residual)
}

/// Result of a truncated-matrix spectrum computation for a self-adjoint
/// time operator.
#[derive(Debug, Clone)]
pub struct SpectrumCheck {
    pub eigenvalues: Vec<f64>,
    pub denominator: u32,
    /// Distance of each eigenvalue to the lattice `(1/denominator) Z`.
    pub lattice_distances: Vec<f64>,
}

impl SpectrumCheck {
    /// Eigenvalues within `[-bound, bound]` paired with lattice distances.
    pub fn within(&self, bound: f64) -> Vec<(f64, f64)> {
        self.eigenvalues
            .iter()
            .zip(&self.lattice_distances)
            .filter(|(e, _)| e.abs() <= bound)
            .map(|(e, d)| (*e, *d))
            .collect()
    }
}

/// Builds the Hermitian matrix `<e^{ipk}, T e^{iqk}>` for `|p|, |q| <= M`
/// by quadrature and solves it densely. Only meaningful in the
/// self-adjoint case (nonzero winding, no zeros of `g'`). Truncated-matrix
/// eigenvalues must be confirmed at a second resolution before being
/// trusted; callers re-run with a larger `M` and compare.
pub fn self_adjoint_spectrum_check(
    kernel: &TimeKernel,
    m_cutoff: usize,
) -> Result<SpectrumCheck> {
    if kernel.winding == 0 || !kernel.zeros.is_empty() {
        return Err(QwError::NotSelfAdjointCase {
            winding: kernel.winding,
            zeros: kernel.zeros.len(),
        });
    }
    let grid = kernel.grid;
    let n = grid.n();
    let dim = 2 * m_cutoff + 1;
    let columns: Vec<Vec<Complex64>> = (0..dim)
        .into_par_iter()
        .map(|col| {
            let q = col as i64 - m_cutoff as i64;
            let mut buf = kernel.apply_raw(Field::mode(grid, q).values());
            crate::spectral::dft(&mut buf);
            (0..dim)
                .map(|row| {
                    let p = row as i64 - m_cutoff as i64;
                    let bin = p.rem_euclid(n as i64) as usize;
                    buf[bin] / n as f64
                })
                .collect()
        })
        .collect();
    let mut m = DMatrix::<Complex64>::zeros(dim, dim);
    for (col, column) in columns.iter().enumerate() {
        for (row, val) in column.iter().enumerate() {
            m[(row, col)] = *val;
        }
    }
    // Hermitize to wash out quadrature round-off before the eigensolve.
    let herm = (&m + m.adjoint()) * Complex64::new(0.5, 0.0);
    let eig = herm.symmetric_eigen();
    let mut eigenvalues: Vec<f64> = eig.eigenvalues.iter().copied().collect();
    eigenvalues.sort_by(f64::total_cmp);
    let denominator = kernel.winding.unsigned_abs() as u32;
    let lattice_distances = eigenvalues
        .iter()
        .map(|e| {
            let scaled = e * denominator as f64;
            (scaled - scaled.round()).abs() / denominator as f64
        })
        .collect();
    Ok(SpectrumCheck {
        eigenvalues,
        denominator,
        lattice_distances,
    })
}

/// The bounded self-adjoint time operator built from two distinct
/// eigenvalues of a unitary: on `span{xi, eta}` it acts by
/// `T xi = (i mu / (lambda - mu)) eta`,
/// `T eta = (i lambda / (lambda - mu)) xi`, and
/// `[T, U] (xi + i eta) = U (xi + i eta)` holds exactly.
#[derive(Debug, Clone)]
pub struct TwoEigenvalueOp {
    pub t: mat2::Mat2,
    pub commutator_residual: f64,
    pub hermiticity_defect: f64,
}

pub fn two_eigenvalue_time_operator(lambda: Complex64, mu: Complex64) -> Result<TwoEigenvalueOp> {
    for v in [lambda, mu] {
        if (v.norm() - 1.0).abs() > 1e-12 {
            return Err(QwError::NotUnimodular {
                defect: (v.norm() - 1.0).abs(),
            });
        }
    }
    let gap = (lambda - mu).norm();
    if gap < 1e-12 {
        return Err(QwError::EigenvaluesCoincide { gap });
    }
    let i = Complex64::i();
    let zero = Complex64::new(0.0, 0.0);
    let t = [
        [zero, i * lambda / (lambda - mu)],
        [i * mu / (lambda - mu), zero],
    ];
    let u = [[lambda, zero], [zero, mu]];
    let probe = [Complex64::new(1.0, 0.0), i];
    let tu = mat2::mul_vec(&t, &mat2::mul_vec(&u, &probe));
    let ut = mat2::mul_vec(&u, &mat2::mul_vec(&t, &probe));
    let u_probe = mat2::mul_vec(&u, &probe);
    let commutator_residual = ((tu[0] - ut[0] - u_probe[0]).norm_sqr()
        + (tu[1] - ut[1] - u_probe[1]).norm_sqr())
    .sqrt()
        / mat2::norm_vec(&probe);
    let hermiticity_defect = mat2::max_abs(&mat2::sub(&t, &mat2::adjoint(&t)));
    Ok(TwoEigenvalueOp {
        t,
        commutator_residual,
        hermiticity_defect,
    })
}

fn check_weights(alpha: (f64, f64)) -> Result<()> {
    let sum = alpha.0 + alpha.1;
    if (sum - 1.0).abs() > 1e-12 {
        return Err(QwError::InvalidWeights { sum });
    }
    Ok(())
}

/// Applies the tensor time operator
/// `T_2 = 2 (alpha_1 T_1 (x) 1 + alpha_2 1 (x) T_1)` of the 2-D
/// continuous-time walk to a momentum torus field. The field must vanish
/// within the margin of the lines `sin k_j = 0` on both axes.
pub fn tensor_time_apply(psi: &Field2, alpha: (f64, f64)) -> Result<Field2> {
    check_weights(alpha)?;
    if psi.rep() != Representation::Momentum {
        return Err(QwError::RepresentationMismatch {
            expected: "momentum",
            got: "position",
        });
    }
    let grid = psi.grid();
    let kernel = TimeKernel::cosine(grid);
    let n = grid.n();
    for j1 in 0..n {
        for j2 in 0..n {
            let in_margin = kernel.in_margin(grid.k(j1)) || kernel.in_margin(grid.k(j2));
            let value = psi.at(j1, j2).norm();
            if in_margin && value >= DOMAIN_AMPLITUDE_TOL {
                return Err(QwError::DomainViolation {
                    k: grid.k(j1),
                    value,
                    margin: DOMAIN_MARGIN,
                });
            }
        }
    }
    let along_axis0 = psi.map_axis(0, |slice| kernel.apply_raw(slice));
    let along_axis1 = psi.map_axis(1, |slice| kernel.apply_raw(slice));
    let values: Vec<Complex64> = along_axis0
        .values()
        .iter()
        .zip(along_axis1.values())
        .map(|(a, b)| 2.0 * (alpha.0 * a + alpha.1 * b))
        .collect();
    Field2::new(grid, Representation::Momentum, values)
}

/// Relative residual of
/// `e^{itH_2} T_2 (e^{-itH_2} psi) = T_2 psi + t psi` for the tensor time
/// operator, with `H_2 = (cos k_1 + cos k_2)/2` acting by multiplication.
pub fn tensor_commutation_residual(psi: &Field2, alpha: (f64, f64), t: f64) -> Result<f64> {
    check_weights(alpha)?;
    let phase = |s: f64| {
        move |k1: f64, k2: f64| Complex64::from_polar(1.0, s * (k1.cos() + k2.cos()) / 2.0)
    };
    let forward = psi.multiply_fn(phase(-t))?;
    let t_forward = tensor_time_apply(&forward, alpha)?;
    let back = t_forward.multiply_fn(phase(t))?;
    let t_psi = tensor_time_apply(psi, alpha)?;
    let mut sq = 0.0f64;
    for (idx, v) in back.values().iter().enumerate() {
        let d = v - t_psi.values()[idx] - t * psi.values()[idx];
        sq += d.norm_sqr();
    }
    let n2 = (psi.grid().n() * psi.grid().n()) as f64;
    Ok((sq / n2).sqrt() / psi.norm())
}

/// Pointwise residual of `(T_2 - sign*i) Psi_eps = 0` for the product
/// deficiency family `Psi_eps = psi_eps (x) phi_eps` built from the 1-D
/// eigenvector families on the branch `(0, pi)` of `cos k`:
/// `T_1 psi_eps = sign*i*eps*psi_eps` and
/// `T_1 phi = sign*i*(1 - 2 alpha_1 eps)/(2 alpha_2) phi`. Evaluated by the
/// classical expression along each axis on the interior square.
pub fn tensor_deficiency_residual(
    grid: MomentumGrid,
    alpha: (f64, f64),
    eps: f64,
    sign: f64,
    interior_margin: f64,
) -> Result<f64> {
    check_weights(alpha)?;
    if alpha.1.abs() < 1e-12 {
        return Err(QwError::InvalidWeights { sum: alpha.1 });
    }
    let kernel = TimeKernel::cosine(grid);
    let eps2 = (1.0 - 2.0 * alpha.0 * eps) / (2.0 * alpha.1);
    // Self-adjoint case: beta equals the eigenvalue's imaginary part.
    let family = |beta: f64| -> (Vec<Complex64>, Vec<Complex64>) {
        let n = grid.n();
        let zero = Complex64::new(0.0, 0.0);
        let mut vals = vec![zero; n];
        let mut t_vals = vec![zero; n];
        for j in 0..n {
            let k = grid.k(j);
            if k <= interior_margin || k >= PI - interior_margin {
                continue;
            }
            let g = kernel.g[j];
            let gp = kernel.g_prime[j];
            let gpp = kernel.g_dprime[j];
            let weight = Complex64::new((beta * g).exp(), 0.0);
            let psi = gp.abs().sqrt() * weight;
            let dpsi =
                (0.5 * gpp * gp.signum() / gp.abs().sqrt() + beta * gp * gp.abs().sqrt()) * weight;
            vals[j] = psi;
            t_vals[j] = kernel.apply_classical_at(j, psi, dpsi);
        }
        (vals, t_vals)
    };
    let (psi1, t_psi1) = family(sign * eps);
    let (psi2, t_psi2) = family(sign * eps2);
    let mut max_residual: f64 = 0.0;
    let mut seen = false;
    for j1 in 0..grid.n() {
        if psi1[j1].norm() == 0.0 {
            continue;
        }
        for j2 in 0..grid.n() {
            if psi2[j2].norm() == 0.0 {
                continue;
            }
            seen = true;
            let product = psi1[j1] * psi2[j2];
            let t2 = 2.0 * (alpha.0 * t_psi1[j1] * psi2[j2] + alpha.1 * psi1[j1] * t_psi2[j2]);
            let residual = (t2 - Complex64::new(0.0, sign) * product).norm() / product.norm();
            max_residual = max_residual.max(residual);
        }
    }
    if !seen {
        return Err(QwError::BranchNotMonotone { min_slope: 0.0 });
    }
    Ok(max_residual)
}
