//! Coin parametrization, closed-form dispersion branches, winding numbers,
//! zeros of the dispersion derivative and gauge-fixed eigenvector frames.
//!
//! A dispersion branch is a unimodular function `lambda(k) = e^{i g(k)}`
//! with `g(k) = m k + theta(k)`, `theta` periodic; `m` is the winding
//! number and `g' = m + theta' = -i lambda'/lambda` is the quantity whose
//! zeros control the deficiency indices of the associated time operator.

use std::f64::consts::PI;

use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::{QwError, Result};
use crate::mat2::{self, Mat2, Vec2};
use crate::spectral::{circle_distance, MomentumGrid, TrigSeries};

const TWO_PI: f64 = 2.0 * PI;

/// Tolerance for coin unitarity validation.
const COIN_UNITARITY_TOL: f64 = 1e-10;

/// Unimodularity tolerance for sampled bands.
const UNIMODULAR_TOL: f64 = 1e-8;

/// Residual allowed when rounding the total phase increment to an integer
/// winding number.
const WINDING_RESIDUAL_TOL: f64 = 1e-6;

/// `|g'|` below this times `max |g'|` marks a tangential-zero candidate.
const TANGENTIAL_REL_TOL: f64 = 1e-6;

/// Refinement target for sign-change zeros.
const ZERO_REFINE_TOL: f64 = 1e-12;

/// Eigenvalue gap below which a symbol sample counts as degenerate.
const DEGENERACY_TOL: f64 = 1e-10;

/// A validated 2x2 unitary coin together with the derived parameters
/// `|a|`, `alpha = arg a` and `delta = arg det C`.
#[derive(Debug, Clone)]
pub struct CoinParams {
    a: Complex64,
    b: Complex64,
    c: Complex64,
    d: Complex64,
    abs_a: f64,
    alpha: f64,
    delta: f64,
    degenerate_alpha: bool,
}

impl CoinParams {
    /// Validates a 2x2 matrix as a coin. `alpha` is undefined when `a = 0`;
    /// the coin is then flagged (`degenerate_alpha`) rather than rejected.
    pub fn from_entries(m: Mat2) -> Result<Self> {
        let defect = mat2::unitarity_defect(&m);
        if defect > COIN_UNITARITY_TOL {
            return Err(QwError::NotUnitary { defect });
        }
        let a = m[0][0];
        let abs_a = a.norm();
        let degenerate_alpha = abs_a < 1e-14;
        let alpha = if degenerate_alpha {
            0.0
        } else {
            a.arg().rem_euclid(TWO_PI)
        };
        let delta = mat2::det(&m).arg().rem_euclid(TWO_PI);
        Ok(Self {
            a,
            b: m[0][1],
            c: m[1][0],
            d: m[1][1],
            abs_a: if degenerate_alpha { 0.0 } else { abs_a },
            alpha,
            delta,
            degenerate_alpha,
        })
    }

    /// Builds the coin from `(|a|, alpha, delta, arg b)` via the standard
    /// parametrization of a 2x2 unitary.
    pub fn from_params(abs_a: f64, alpha: f64, delta: f64, b_arg: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&abs_a) {
            return Err(QwError::InvalidParameter(format!(
                "|a| = {abs_a} outside [0, 1]"
            )));
        }
        let abs_b = (1.0 - abs_a * abs_a).max(0.0).sqrt();
        let a = Complex64::from_polar(abs_a, alpha);
        let b = Complex64::from_polar(abs_b, b_arg);
        let phase_delta = Complex64::from_polar(1.0, delta);
        let c = -b.conj() * phase_delta;
        let d = Complex64::from_polar(abs_a, delta - alpha);
        Self::from_entries([[a, b], [c, d]])
    }

    pub fn hadamard() -> Self {
        let s = std::f64::consts::FRAC_1_SQRT_2;
        Self::from_entries([
            [Complex64::new(s, 0.0), Complex64::new(s, 0.0)],
            [Complex64::new(s, 0.0), Complex64::new(-s, 0.0)],
        ])
        .expect("Hadamard matrix is unitary")
    }

    pub fn identity() -> Self {
        Self::from_entries(mat2::identity()).expect("identity matrix is unitary")
    }

    pub fn matrix(&self) -> Mat2 {
        [[self.a, self.b], [self.c, self.d]]
    }

    pub fn a(&self) -> Complex64 {
        self.a
    }

    pub fn b(&self) -> Complex64 {
        self.b
    }

    pub fn abs_a(&self) -> f64 {
        self.abs_a
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    pub fn degenerate_alpha(&self) -> bool {
        self.degenerate_alpha
    }
}

/// Momentum-space symbol of the coined walk at one `k`:
/// `[[e^{ik} a, e^{ik} b], [e^{-ik} c, e^{-ik} d]]`.
pub fn coined_symbol_at(coin: &CoinParams, k: f64) -> Mat2 {
    let ep = Complex64::from_polar(1.0, k);
    let em = Complex64::from_polar(1.0, -k);
    [[ep * coin.a, ep * coin.b], [em * coin.c, em * coin.d]]
}

/// The coined-walk symbol sampled over the grid.
pub fn coined_symbol(coin: &CoinParams, grid: MomentumGrid) -> Vec<Mat2> {
    grid.points().map(|k| coined_symbol_at(coin, k)).collect()
}

/// Momentum-space symbol of the three-step walk `U_3 = S S C_2 S C_3` with
/// `C_2 = [[b, a], [-a, b]]`, `C_3 = [[b, -a], [a, b]]`, `a = +sqrt(1-b^2)`.
pub fn threestep_symbol_at(b: f64, k: f64) -> Mat2 {
    let a = (1.0 - b * b).max(0.0).sqrt();
    let (a2, b2, ab) = (a * a, b * b, a * b);
    let e1 = Complex64::from_polar(1.0, k);
    let e3 = Complex64::from_polar(1.0, 3.0 * k);
    [
        [a2 * e1 + b2 * e3, ab * e1 - ab * e3],
        [-ab * e1.conj() + ab * e3.conj(), a2 * e1.conj() + b2 * e3.conj()],
    ]
}

pub fn threestep_symbol(b: f64, grid: MomentumGrid) -> Vec<Mat2> {
    grid.points().map(|k| threestep_symbol_at(b, k)).collect()
}

/// How a zero of `g'` was located.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ZeroKind {
    /// `g'` changes sign across the zero.
    SignChange,
    /// Even-multiplicity zero: `g'` touches zero without changing sign.
    Tangential,
}

#[derive(Debug, Clone, Copy)]
pub struct DerivativeZero {
    pub location: f64,
    pub kind: ZeroKind,
}

/// Closed-form (or interpolated) evaluator for `g'` off the grid.
#[derive(Debug, Clone)]
pub(crate) enum GPrimeForm {
    Constant(f64),
    /// `sign * |a| sin(k + phase) / sqrt(1 - (|a| cos(k + phase))^2)`.
    Coined { abs_a: f64, phase: f64, sign: f64 },
    /// `sign * (1 + 8 b^2 - 12 b^2 sin^2 k) / sqrt(beta(k))`.
    ThreeStep { b2: f64, sign: f64 },
    Series(TrigSeries),
}

impl GPrimeForm {
    pub(crate) fn eval(&self, k: f64) -> f64 {
        match self {
            GPrimeForm::Constant(c) => *c,
            GPrimeForm::Coined { abs_a, phase, sign } => {
                let tau = abs_a * (k + phase).cos();
                sign * abs_a * (k + phase).sin() / (1.0 - tau * tau).sqrt()
            }
            GPrimeForm::ThreeStep { b2, sign } => {
                let s2 = k.sin() * k.sin();
                sign * (1.0 + 8.0 * b2 - 12.0 * b2 * s2) / threestep_beta(*b2, k).sqrt()
            }
            GPrimeForm::Series(series) => series.eval_real(k),
        }
    }
}

fn threestep_beta(b2: f64, k: f64) -> f64 {
    let c2 = k.cos() * k.cos();
    1.0 + (8.0 * b2 - 16.0 * b2 * b2) * c2 + 16.0 * b2 * b2 * c2 * c2
}

/// One dispersion branch: `lambda(k)`, its derivative, `g' = m + theta'`,
/// the winding number and the zeros of the dispersion derivative.
#[derive(Debug, Clone)]
pub struct Band {
    grid: MomentumGrid,
    lambda: Vec<Complex64>,
    lambda_prime: Vec<Complex64>,
    g: Vec<f64>,
    g_prime: Vec<f64>,
    theta: Vec<f64>,
    theta_prime: Vec<f64>,
    winding: i64,
    zeros: Vec<DerivativeZero>,
    form: GPrimeForm,
}

impl Band {
    pub fn grid(&self) -> MomentumGrid {
        self.grid
    }

    pub fn lambda(&self) -> &[Complex64] {
        &self.lambda
    }

    pub fn lambda_prime(&self) -> &[Complex64] {
        &self.lambda_prime
    }

    /// Samples of the unwrapped phase `g(k) = m k + theta(k)`, pinned to the
    /// principal argument at `k = 0`.
    pub fn g(&self) -> &[f64] {
        &self.g
    }

    pub fn g_prime(&self) -> &[f64] {
        &self.g_prime
    }

    pub fn theta(&self) -> &[f64] {
        &self.theta
    }

    pub fn theta_prime(&self) -> &[f64] {
        &self.theta_prime
    }

    pub fn winding(&self) -> i64 {
        self.winding
    }

    pub fn zeros(&self) -> &[DerivativeZero] {
        &self.zeros
    }

    /// Evaluates `g'` off the grid, preferring the model's closed form.
    pub fn g_prime_at(&self, k: f64) -> f64 {
        self.form.eval(k)
    }

    /// Evaluates `g` off the grid via `m k + theta(k)` with `theta`
    /// interpolated trigonometrically.
    pub fn g_at(&self, k: f64) -> f64 {
        let theta = TrigSeries::from_real_samples(&self.theta);
        self.winding as f64 * k + theta.eval_real(k)
    }

    /// Trigonometric interpolant of the periodic phase part.
    pub fn theta_series(&self) -> TrigSeries {
        TrigSeries::from_real_samples(&self.theta)
    }

    pub(crate) fn g_prime_form(&self) -> &GPrimeForm {
        &self.form
    }

    pub fn max_abs_g_prime(&self) -> f64 {
        self.g_prime.iter().map(|g| g.abs()).fold(0.0, f64::max)
    }

    /// True when the branch is a constant (the `a = 0` coin case).
    pub fn is_constant(&self) -> bool {
        self.winding == 0 && self.max_abs_g_prime() < 1e-12
    }

    /// `(1/2 pi i) * quadrature of lambda'/lambda`; equals the winding
    /// number for any sampled branch.
    pub fn winding_integral(&self) -> f64 {
        let sum: Complex64 = self
            .lambda_prime
            .iter()
            .zip(&self.lambda)
            .map(|(lp, l)| lp / l)
            .sum();
        (sum / Complex64::i()).re / self.grid.n() as f64
    }

    /// Builds a band from unimodular samples. The winding number comes from
    /// unwrapping the phase, `lambda'` from spectral differentiation.
    pub fn from_samples(grid: MomentumGrid, samples: Vec<Complex64>) -> Result<Self> {
        if samples.len() != grid.n() {
            return Err(QwError::GridMismatch);
        }
        let defect = samples
            .iter()
            .map(|s| (s.norm() - 1.0).abs())
            .fold(0.0f64, f64::max);
        if defect > UNIMODULAR_TOL {
            return Err(QwError::NotUnimodular { defect });
        }
        let (g, winding) = unwrap_phase(&samples)?;
        let lambda_prime = crate::spectral::spectral_derivative_samples(&samples);
        let g_prime: Vec<f64> = samples
            .iter()
            .zip(&lambda_prime)
            .map(|(l, lp)| (l.conj() * lp).im / l.norm_sqr())
            .collect();
        let form = GPrimeForm::Series(TrigSeries::from_real_samples(&g_prime));
        finish_band(grid, samples, lambda_prime, g, g_prime, winding, form)
    }

    /// The branch of a pure shift symbol `e^{i m k}`; `g' = m` exactly.
    pub fn pure_shift(grid: MomentumGrid, m: i64) -> Self {
        let lambda: Vec<Complex64> = grid
            .points()
            .map(|k| Complex64::from_polar(1.0, m as f64 * k))
            .collect();
        let g_prime = vec![m as f64; grid.n()];
        closed_form_band(grid, lambda, g_prime, m, GPrimeForm::Constant(m as f64))
            .expect("pure shift band is well formed")
    }
}

/// Unwraps sampled phases around the circle. Returns the `g` samples pinned
/// to the principal argument at `k = 0` and the integer winding number.
fn unwrap_phase(samples: &[Complex64]) -> Result<(Vec<f64>, i64)> {
    let n = samples.len();
    let mut g = Vec::with_capacity(n);
    g.push(samples[0].arg());
    let mut total = 0.0;
    for j in 0..n {
        let next = samples[(j + 1) % n];
        let step = (next / samples[j]).arg();
        if step.abs() >= PI * (1.0 - 1e-9) {
            return Err(QwError::PhaseStepTooLarge { step });
        }
        total += step;
        if j + 1 < n {
            g.push(g[j] + step);
        }
    }
    let winding = (total / TWO_PI).round();
    let residual = (total / TWO_PI - winding).abs();
    if residual > WINDING_RESIDUAL_TOL {
        return Err(QwError::WindingNotInteger { residual });
    }
    Ok((g, winding as i64))
}

fn closed_form_band(
    grid: MomentumGrid,
    lambda: Vec<Complex64>,
    g_prime: Vec<f64>,
    winding: i64,
    form: GPrimeForm,
) -> Result<Band> {
    let lambda_prime: Vec<Complex64> = lambda
        .iter()
        .zip(&g_prime)
        .map(|(l, gp)| Complex64::i() * *gp * l)
        .collect();
    let (g, unwrapped) = unwrap_phase(&lambda)?;
    assert_eq!(
        unwrapped, winding,
        "closed-form winding disagrees with unwrapped phase"
    );
    finish_band(grid, lambda, lambda_prime, g, g_prime, winding, form)
}

fn finish_band(
    grid: MomentumGrid,
    lambda: Vec<Complex64>,
    lambda_prime: Vec<Complex64>,
    g: Vec<f64>,
    g_prime: Vec<f64>,
    winding: i64,
    form: GPrimeForm,
) -> Result<Band> {
    let theta: Vec<f64> = g
        .iter()
        .enumerate()
        .map(|(j, gj)| gj - winding as f64 * grid.k(j))
        .collect();
    let theta_prime: Vec<f64> = g_prime.iter().map(|gp| gp - winding as f64).collect();
    let zeros = detect_zeros(grid, &g_prime, &form)?;
    Ok(Band {
        grid,
        lambda,
        lambda_prime,
        g,
        g_prime,
        theta,
        theta_prime,
        winding,
        zeros,
        form,
    })
}

/// Dispersion branches of the coined walk, labelled by the sign convention
/// `lambda_j = e^{i delta/2} (tau + i (-1)^{j-1} sqrt(1 - tau^2))` with
/// `tau(k) = |a| cos(k + alpha - delta/2)` for `0 < |a| < 1`; pure phases
/// `e^{i(k+alpha)}`, `e^{i(-k+delta-alpha)}` for `|a| = 1`; constants for
/// `a = 0`.
pub fn coined_bands(coin: &CoinParams, grid: MomentumGrid) -> (Band, Band) {
    let delta = coin.delta;
    let alpha = coin.alpha;
    let abs_a = coin.abs_a;

    if coin.degenerate_alpha {
        // a = 0: two constant eigenvalues, no dispersion.
        let l1 = Complex64::from_polar(1.0, (PI + delta) / 2.0);
        let l2 = Complex64::from_polar(1.0, (-PI + delta) / 2.0);
        let make = |l: Complex64| {
            closed_form_band(
                grid,
                vec![l; grid.n()],
                vec![0.0; grid.n()],
                0,
                GPrimeForm::Constant(0.0),
            )
            .expect("constant band is well formed")
        };
        return (make(l1), make(l2));
    }

    if abs_a >= 1.0 - 1e-12 {
        let l1: Vec<Complex64> = grid
            .points()
            .map(|k| Complex64::from_polar(1.0, k + alpha))
            .collect();
        let l2: Vec<Complex64> = grid
            .points()
            .map(|k| Complex64::from_polar(1.0, -k + delta - alpha))
            .collect();
        let b1 = closed_form_band(grid, l1, vec![1.0; grid.n()], 1, GPrimeForm::Constant(1.0))
            .expect("|a| = 1 band is well formed");
        let b2 = closed_form_band(
            grid,
            l2,
            vec![-1.0; grid.n()],
            -1,
            GPrimeForm::Constant(-1.0),
        )
        .expect("|a| = 1 band is well formed");
        return (b1, b2);
    }

    let phase = alpha - delta / 2.0;
    let half_delta = Complex64::from_polar(1.0, delta / 2.0);
    let make = |sign: f64| {
        let lambda: Vec<Complex64> = grid
            .points()
            .map(|k| {
                let tau = abs_a * (k + phase).cos();
                half_delta * Complex64::new(tau, sign * (1.0 - tau * tau).sqrt())
            })
            .collect();
        let g_prime: Vec<f64> = grid
            .points()
            .map(|k| {
                let tau = abs_a * (k + phase).cos();
                sign * abs_a * (k + phase).sin() / (1.0 - tau * tau).sqrt()
            })
            .collect();
        closed_form_band(
            grid,
            lambda,
            g_prime,
            0,
            GPrimeForm::Coined {
                abs_a,
                phase,
                sign,
            },
        )
        .expect("coined band is well formed")
    };
    (make(1.0), make(-1.0))
}

/// Dispersion branches of the three-step walk for `0 <= b^2 < 1`:
/// `lambda_1(k) = cos k (1 - 4 b^2 sin^2 k) + i sin k sqrt(beta(k))`,
/// `lambda_2 = conj(lambda_1)`, windings `(1, -1)`.
pub fn threestep_bands(b: f64, grid: MomentumGrid) -> Result<(Band, Band)> {
    let b2 = b * b;
    if b2 >= 1.0 {
        return Err(QwError::InvalidParameter(format!(
            "three-step dispersion requires b^2 < 1, got b^2 = {b2}"
        )));
    }
    let alpha_k: Vec<f64> = grid
        .points()
        .map(|k| k.cos() * (1.0 - 4.0 * b2 * k.sin() * k.sin()))
        .collect();
    let lambda1: Vec<Complex64> = grid
        .points()
        .zip(&alpha_k)
        .map(|(k, &al)| Complex64::new(al, k.sin() * threestep_beta(b2, k).sqrt()))
        .collect();
    let g_prime1: Vec<f64> = grid
        .points()
        .map(|k| {
            (1.0 + 8.0 * b2 - 12.0 * b2 * k.sin() * k.sin()) / threestep_beta(b2, k).sqrt()
        })
        .collect();
    let lambda2: Vec<Complex64> = lambda1.iter().map(|l| l.conj()).collect();
    let g_prime2: Vec<f64> = g_prime1.iter().map(|g| -g).collect();
    let band1 = closed_form_band(
        grid,
        lambda1,
        g_prime1,
        1,
        GPrimeForm::ThreeStep { b2, sign: 1.0 },
    )?;
    let band2 = closed_form_band(
        grid,
        lambda2,
        g_prime2,
        -1,
        GPrimeForm::ThreeStep { b2, sign: -1.0 },
    )?;
    Ok((band1, band2))
}

/// Locates the distinct zeros of `g'` in `[0, 2 pi)`.
///
/// Sign changes are bracketed on the grid and refined by bisection plus a
/// secant polish to `|g'| < 1e-12`. Tangential (even-multiplicity) zeros are
/// detected as local minima of `|g'|` below `1e-6 * max |g'|` with no
/// adjacent sign change, refined by a local quadratic fit. Each zero point
/// is reported once regardless of multiplicity.
pub fn find_derivative_zeros(band: &Band) -> Result<Vec<DerivativeZero>> {
    detect_zeros(band.grid, &band.g_prime, &band.form)
}

fn detect_zeros(
    grid: MomentumGrid,
    g_prime: &[f64],
    form: &GPrimeForm,
) -> Result<Vec<DerivativeZero>> {
    let n = grid.n();
    let h = grid.spacing();
    let max_g = g_prime.iter().map(|g| g.abs()).fold(0.0f64, f64::max);
    if max_g < 1e-12 {
        // Constant branch: lambda' vanishes identically, no isolated zeros.
        return Ok(Vec::new());
    }

    let mut zeros: Vec<DerivativeZero> = Vec::new();

    for j in 0..n {
        if g_prime[j] == 0.0 {
            // Zero landing exactly on a sample; neither segment product can
            // flag it, so classify it from the neighbouring signs.
            let jm = (j + n - 1) % n;
            let jp = (j + 1) % n;
            let kind = if g_prime[jm] * g_prime[jp] < 0.0 {
                ZeroKind::SignChange
            } else {
                ZeroKind::Tangential
            };
            zeros.push(DerivativeZero {
                location: grid.k(j),
                kind,
            });
            continue;
        }
        let jn = (j + 1) % n;
        if g_prime[j] * g_prime[jn] < 0.0 {
            let location = refine_sign_change(form, grid.k(j), grid.k(j) + h);
            zeros.push(DerivativeZero {
                location: location.rem_euclid(TWO_PI),
                kind: ZeroKind::SignChange,
            });
        }
    }

    for j in 0..n {
        let jm = (j + n - 1) % n;
        let jp = (j + 1) % n;
        let (sm, s0, sp) = (g_prime[jm], g_prime[j], g_prime[jp]);
        let local_min = s0.abs() <= sm.abs() && s0.abs() <= sp.abs();
        let small = s0.abs() < TANGENTIAL_REL_TOL * max_g;
        let no_adjacent_flip = sm * sp > 0.0 && s0 * sm >= 0.0 && s0 * sp >= 0.0;
        if local_min && small && no_adjacent_flip {
            // Quadratic vertex through the three samples around k_j.
            let curv = sp - 2.0 * s0 + sm;
            let slope = (sp - sm) / 2.0;
            let offset = if curv.abs() > 0.0 {
                (-slope / curv).clamp(-1.0, 1.0)
            } else {
                0.0
            };
            zeros.push(DerivativeZero {
                location: (grid.k(j) + offset * h).rem_euclid(TWO_PI),
                kind: ZeroKind::Tangential,
            });
        }
    }

    zeros.sort_by(|a, b| a.location.total_cmp(&b.location));
    // Collapse duplicates found by both detectors at the same point.
    zeros.dedup_by(|a, b| circle_distance(a.location, b.location) < 1e-9);

    for i in 0..zeros.len() {
        let next = zeros[(i + 1) % zeros.len()];
        if zeros.len() > 1 {
            let d = circle_distance(zeros[i].location, next.location);
            if d < 4.0 * h {
                return Err(QwError::GridTooCoarse {
                    first: zeros[i].location,
                    second: next.location,
                });
            }
        }
    }
    Ok(zeros)
}

fn refine_sign_change(form: &GPrimeForm, mut lo: f64, mut hi: f64) -> f64 {
    let mut flo = form.eval(lo);
    for _ in 0..80 {
        let mid = 0.5 * (lo + hi);
        let fmid = form.eval(mid);
        if fmid == 0.0 {
            return mid;
        }
        if flo * fmid < 0.0 {
            hi = mid;
        } else {
            lo = mid;
            flo = fmid;
        }
        if hi - lo < 1e-15 {
            break;
        }
    }
    // Secant polish.
    let mut x0 = lo;
    let mut x1 = hi;
    let mut f0 = form.eval(x0);
    let mut f1 = form.eval(x1);
    for _ in 0..8 {
        if f1.abs() < ZERO_REFINE_TOL || (f1 - f0).abs() == 0.0 {
            break;
        }
        let x2 = x1 - f1 * (x1 - x0) / (f1 - f0);
        x0 = x1;
        f0 = f1;
        x1 = x2;
        f1 = form.eval(x1);
    }
    if f1.abs() <= f0.abs() {
        x1
    } else {
        x0
    }
}

/// Sampled eigenvector frame `W(k) = (v_1(k), v_2(k))` of a 2x2 symbol.
#[derive(Debug, Clone)]
pub struct Frame {
    grid: MomentumGrid,
    w: Vec<Mat2>,
}

impl Frame {
    pub fn grid(&self) -> MomentumGrid {
        self.grid
    }

    pub fn at(&self, j: usize) -> &Mat2 {
        &self.w[j]
    }

    pub fn samples(&self) -> &[Mat2] {
        &self.w
    }

    /// `W(k_j) v`.
    pub fn apply_at(&self, j: usize, v: &Vec2) -> Vec2 {
        mat2::mul_vec(&self.w[j], v)
    }

    /// `W(k_j)^{-1} v = W(k_j)* v`.
    pub fn apply_inverse_at(&self, j: usize, v: &Vec2) -> Vec2 {
        mat2::mul_vec(&mat2::adjoint(&self.w[j]), v)
    }
}

/// Gauge-fixed eigenvector frame of the coined walk.
pub fn coined_eigenframe(coin: &CoinParams, grid: MomentumGrid) -> Result<Frame> {
    let (b1, b2) = coined_bands(coin, grid);
    let symbol = coined_symbol(coin, grid);
    eigenframe_from_symbol(grid, &symbol, b1.lambda(), b2.lambda())
}

/// Gauge-fixed eigenvector frame of the three-step walk.
pub fn threestep_eigenframe(b: f64, grid: MomentumGrid) -> Result<Frame> {
    let (b1, b2) = threestep_bands(b, grid)?;
    let symbol = threestep_symbol(b, grid);
    eigenframe_from_symbol(grid, &symbol, b1.lambda(), b2.lambda())
}

/// Builds the frame from the sampled symbol and the two branch eigenvalue
/// arrays. Column `j` is a unit eigenvector for branch `j`, gauge fixed so
/// its largest-modulus component is real and non-negative.
///
/// At samples where the symbol is a scalar multiple of the identity (exact
/// band crossings), any basis diagonalizes; those samples are filled from
/// the nearest resolved neighbour to keep the frame continuous.
pub fn eigenframe_from_symbol(
    grid: MomentumGrid,
    symbol: &[Mat2],
    lambda1: &[Complex64],
    lambda2: &[Complex64],
) -> Result<Frame> {
    let n = grid.n();
    let resolved: Vec<Option<Mat2>> = (0..n)
        .into_par_iter()
        .map(|j| {
            let u = &symbol[j];
            let (l1, l2) = (lambda1[j], lambda2[j]);
            if (l1 - l2).norm() >= DEGENERACY_TOL {
                let v1 = eigenvector(u, l1);
                let v2 = eigenvector(u, l2);
                Some([[v1[0], v2[0]], [v1[1], v2[1]]])
            } else {
                None
            }
        })
        .collect();

    // A degenerate sample must be scalar; otherwise the branch data are
    // inconsistent with the symbol.
    for (j, slot) in resolved.iter().enumerate() {
        if slot.is_none() {
            let u = &symbol[j];
            let l = lambda1[j];
            let scalar_defect = [u[0][0] - l, u[1][1] - l, u[0][1], u[1][0]]
                .iter()
                .map(|c| c.norm())
                .fold(0.0f64, f64::max);
            if scalar_defect > DEGENERACY_TOL {
                return Err(QwError::DegenerateEigenvalue {
                    k: grid.k(j),
                    gap: (lambda1[j] - lambda2[j]).norm(),
                });
            }
        }
    }

    let mut w = Vec::with_capacity(n);
    for j in 0..n {
        match resolved[j] {
            Some(m) => w.push(m),
            None => {
                let mut filled = mat2::identity();
                for step in 1..n {
                    let left = resolved[(j + n - step) % n];
                    let right = resolved[(j + step) % n];
                    if let Some(m) = left.or(right) {
                        filled = m;
                        break;
                    }
                }
                w.push(filled);
            }
        }
    }
    Ok(Frame { grid, w })
}

/// Unit eigenvector of a 2x2 matrix for eigenvalue `l`, using whichever row
/// gives the better-conditioned candidate; gauge fixed afterwards.
fn eigenvector(u: &Mat2, l: Complex64) -> Vec2 {
    let cand1 = [u[0][1], l - u[0][0]];
    let cand2 = [l - u[1][1], u[1][0]];
    let v = if mat2::norm_vec(&cand1) >= mat2::norm_vec(&cand2) {
        cand1
    } else {
        cand2
    };
    let norm = mat2::norm_vec(&v);
    let mut v = [v[0] / norm, v[1] / norm];
    let pick = if v[0].norm() >= v[1].norm() { 0 } else { 1 };
    let phase = v[pick] / v[pick].norm();
    v = [v[0] * phase.conj(), v[1] * phase.conj()];
    v
}
