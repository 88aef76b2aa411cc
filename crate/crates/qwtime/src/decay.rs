//! Transition-amplitude time series and verification of the decay bounds
//! that a strong time operator imposes on the evolution.
//!
//! Every bound checked here is a theorem. On states inside the operator
//! domain a violation beyond the stated slack indicates a bug in the
//! toolkit, so the checks double as self-tests of the operator machinery.

use num_complex::Complex64;

use crate::dispersion::Band;
use crate::error::{QwError, Result};
use crate::models::MomentumWalk;
use crate::spectral::{inner, Field, Representation, SpinorField};
use crate::timeop::TimeKernel;

/// Slack added to every theorem bound before flagging a violation.
pub const BOUND_SLACK: f64 = 1e-10;

/// One time sample of a transition-amplitude check.
#[derive(Debug, Clone, Copy)]
pub struct DecayRecord {
    pub t: i64,
    pub amplitude: Complex64,
    /// The theorem's right-hand side at this `t`. Survival checks bound
    /// `|amplitude|^2`, transition checks bound `|amplitude|`.
    pub bound: f64,
    pub satisfied: bool,
}

/// `<phi, lambda^t psi>` within one band for `t = 0..=t_max`.
pub fn band_amplitude_series(
    band: &Band,
    phi: &Field,
    psi: &Field,
    t_max: i64,
) -> Result<Vec<Complex64>> {
    if phi.grid() != band.grid() || psi.grid() != band.grid() {
        return Err(QwError::GridMismatch);
    }
    if phi.rep() != Representation::Momentum || psi.rep() != Representation::Momentum {
        return Err(QwError::RepresentationMismatch {
            expected: "momentum",
            got: "position",
        });
    }
    let n = band.grid().n();
    let weights: Vec<Complex64> = phi
        .values()
        .iter()
        .zip(psi.values())
        .map(|(p, q)| p.conj() * q)
        .collect();
    let g = band.g();
    let mut series = Vec::with_capacity(t_max as usize + 1);
    for t in 0..=t_max {
        let mut acc = Complex64::new(0.0, 0.0);
        for j in 0..n {
            acc += weights[j] * Complex64::from_polar(1.0, t as f64 * g[j]);
        }
        series.push(acc / n as f64);
    }
    Ok(series)
}

/// `<phi, U^t psi>` for the full walk via momentum powering,
/// `t = 0..=t_max`.
pub fn walk_amplitude_series(
    walk: &MomentumWalk,
    phi: &SpinorField,
    psi: &SpinorField,
    t_max: i64,
) -> Result<Vec<Complex64>> {
    let phi_m = phi.to_momentum()?;
    let psi_m = psi.to_momentum()?;
    let mut series = Vec::with_capacity(t_max as usize + 1);
    for t in 0..=t_max {
        let evolved = walk.power_apply(&psi_m, t)?;
        series.push(phi_m.inner(&evolved)?);
    }
    Ok(series)
}

/// Survival-probability bound `|<psi, U^t psi>|^2 <= 4 (Delta T)^2 / t^2`
/// for a unit vector in the operator domain, checked at every
/// `t = 1..=t_max`.
pub fn survival_bound_check(band: &Band, psi: &Field, t_max: i64) -> Result<Vec<DecayRecord>> {
    let norm = psi.norm();
    if (norm - 1.0).abs() > 1e-10 {
        return Err(QwError::NotNormalized { norm });
    }
    let kernel = TimeKernel::from_band(band);
    let delta_t = kernel.uncertainty(psi)?;
    let series = band_amplitude_series(band, psi, psi, t_max)?;
    let mut records = Vec::with_capacity(t_max as usize);
    for t in 1..=t_max {
        let amplitude = series[t as usize];
        let bound = 4.0 * delta_t * delta_t / (t * t) as f64;
        records.push(DecayRecord {
            t,
            amplitude,
            bound,
            satisfied: amplitude.norm_sqr() <= bound + BOUND_SLACK,
        });
    }
    Ok(records)
}

/// Transition bound
/// `|<phi, U^t psi>| <= (||(T+S) phi|| ||psi|| + ||phi|| ||(T+S) psi||) / |t|`
/// for a real scalar `S` (the simplest operator commuting with `U`).
pub fn transition_bound_check(
    band: &Band,
    phi: &Field,
    psi: &Field,
    s: f64,
    t_max: i64,
) -> Result<Vec<DecayRecord>> {
    let kernel = TimeKernel::from_band(band);
    let shifted_norm = |f: &Field| -> Result<f64> {
        let tf = kernel.apply(f)?;
        let vals: Vec<Complex64> = tf
            .values()
            .iter()
            .zip(f.values())
            .map(|(t, v)| t + s * v)
            .collect();
        Ok(Field::new(f.grid(), Representation::Momentum, vals)?.norm())
    };
    let numerator = shifted_norm(phi)? * psi.norm() + phi.norm() * shifted_norm(psi)?;
    let series = band_amplitude_series(band, phi, psi, t_max)?;
    let mut records = Vec::with_capacity(t_max as usize);
    for t in 1..=t_max {
        let amplitude = series[t as usize];
        let bound = numerator / t as f64;
        records.push(DecayRecord {
            t,
            amplitude,
            bound,
            satisfied: amplitude.norm() <= bound + BOUND_SLACK,
        });
    }
    Ok(records)
}

/// Outcome of the higher-order decay check `|<psi, U^t psi>| <= C_n / t^n`.
#[derive(Debug, Clone)]
pub struct HigherOrderReport {
    pub order: u32,
    /// `sup over t in [1, t_max] of t^n |<psi, U^t psi>|`.
    pub sup: f64,
    /// The same supremum over the first half window `[1, t_max/2]`.
    pub sup_half: f64,
    /// Explicit constant from the induction proof with `S = 0`.
    pub theorem_constant: f64,
    /// The supremum does not grow between the half and full windows.
    pub stable: bool,
    pub bounded: bool,
}

/// Computes `sup_t t^n |<psi, U^t psi>|` for `n = 1, 2, 3` and compares it
/// against the explicit constant of the iterated commutation bound. The
/// state must stay admissible under `n` applications of `T`.
pub fn higher_order_check(
    band: &Band,
    psi: &Field,
    order: u32,
    t_max: i64,
) -> Result<HigherOrderReport> {
    if !(1..=3).contains(&order) {
        return Err(QwError::InvalidParameter(format!(
            "higher-order check supports n = 1, 2, 3; got {order}"
        )));
    }
    let norm = psi.norm();
    if (norm - 1.0).abs() > 1e-10 {
        return Err(QwError::NotNormalized { norm });
    }
    let kernel = TimeKernel::from_band(band);
    // Powers T^j psi for j = 0..=order; admissibility is re-checked on
    // every application.
    let mut powers = vec![psi.clone()];
    for _ in 0..order {
        let next = kernel.apply(powers.last().unwrap())?;
        powers.push(next);
    }
    let theorem_constant = iterated_constant(&powers, order as usize)?;
    let series = band_amplitude_series(band, psi, psi, t_max)?;
    let weighted = |t: i64| (t as f64).powi(order as i32) * series[t as usize].norm();
    let mut sup = 0.0f64;
    let mut sup_half = 0.0f64;
    for t in 1..=t_max {
        let w = weighted(t);
        sup = sup.max(w);
        if t <= t_max / 2 {
            sup_half = sup_half.max(w);
        }
    }
    Ok(HigherOrderReport {
        order,
        sup,
        sup_half,
        theorem_constant,
        stable: (sup - sup_half).abs() <= 0.1 * sup,
        bounded: sup <= theorem_constant + BOUND_SLACK,
    })
}

/// Explicit constant `C_m(phi, psi)` of the iterated bound with `S = 0`,
/// specialized to `phi = psi` and evaluated from the precomputed powers
/// `T^j psi`: `C_1(phi, psi) = ||T phi|| ||psi|| + ||phi|| ||T psi||`,
/// `C_m(phi, psi) = ||T^m phi|| ||psi|| + ||phi|| ||T^m psi||
///                  + sum_{j=1}^{m-1} binom(m, j) C_{m-j}(phi, T^j psi)`.
fn iterated_constant(powers: &[Field], order: usize) -> Result<f64> {
    fn binom(n: usize, k: usize) -> f64 {
        let mut acc = 1.0;
        for i in 0..k {
            acc = acc * (n - i) as f64 / (i + 1) as f64;
        }
        acc
    }
    // c[m][j] = C_m(psi, T^j psi); built bottom-up in m.
    let max_j = powers.len() - 1;
    let norms: Vec<f64> = powers.iter().map(Field::norm).collect();
    let mut c = vec![vec![0.0f64; max_j + 1]; order + 1];
    for m in 1..=order {
        for j in 0..=(max_j - m) {
            // C_m(psi, T^j psi) needs ||T^m psi|| and ||T^{m+j} psi||.
            let mut value = norms[m] * norms[j] + norms[0] * norms[m + j];
            for i in 1..m {
                value += binom(m, i) * c[m - i][j + i];
            }
            c[m][j] = value;
        }
    }
    Ok(c[order][0])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dispersion::{coined_bands, threestep_bands, CoinParams};
    use crate::models::{dtqw_step, MomentumWalk};
    use crate::spectral::{gauss_bump, Field, MomentumGrid, Representation};

    fn hadamard_state(grid: MomentumGrid) -> Field {
        gauss_bump(grid, 1.03, 0.042).normalized()
    }

    #[test]
    fn amplitude_series_basics() {
        let grid = MomentumGrid::new(512).unwrap();
        let (b1, _) = coined_bands(&CoinParams::hadamard(), grid);
        let psi = hadamard_state(grid);
        let series = band_amplitude_series(&b1, &psi, &psi, 10).unwrap();
        // t = 0 with phi = psi gives exactly the squared norm.
        assert!((series[0] - Complex64::new(1.0, 0.0)).norm() < 1e-12);
        // Cauchy-Schwarz at every t.
        for amp in &series {
            assert!(amp.norm() <= 1.0 + 1e-10);
        }
    }

    #[test]
    fn walk_series_matches_position_stepping() {
        let grid = MomentumGrid::new(1024).unwrap();
        let coin = CoinParams::hadamard();
        let walk = MomentumWalk::coined(&coin, grid).unwrap();
        let psi = SpinorField::new(
            Field::delta_at_site(grid, 0).unwrap(),
            Field::zeros(grid, Representation::Position),
        )
        .unwrap();
        let series = walk_amplitude_series(&walk, &psi, &psi, 60).unwrap();
        let mut stepped = psi.clone();
        for t in 1..=60usize {
            stepped = dtqw_step(&stepped, &coin).unwrap();
            let direct = psi.inner(&stepped).unwrap();
            assert!(
                (series[t] - direct).norm() < 1e-9,
                "t = {t}: {:?} vs {:?}",
                series[t],
                direct
            );
        }
    }

    #[test]
    fn toy_survival_is_zero_after_one_step() {
        // <delta_0, L^t delta_0> = 0 for t >= 1: pure shift orthogonality.
        let grid = MomentumGrid::new(64).unwrap();
        let toy = crate::models::toy_pair(64).unwrap();
        let psi = Field::delta_at_site(grid, 0).unwrap();
        let mut evolved = psi.clone();
        for _ in 1..=5 {
            evolved = toy.shift(&evolved).unwrap();
            assert!(inner(&psi, &evolved).unwrap().norm() < 1e-15);
        }
    }

    #[test]
    fn survival_bound_holds_for_hadamard() {
        let grid = MomentumGrid::new(2048).unwrap();
        let (b1, _) = coined_bands(&CoinParams::hadamard(), grid);
        let psi = hadamard_state(grid);
        let records = survival_bound_check(&b1, &psi, 200).unwrap();
        assert_eq!(records.len(), 200);
        for r in &records {
            assert!(r.satisfied, "t = {}: |amp|^2 = {:.3e} > {:.3e}", r.t, r.amplitude.norm_sqr(), r.bound);
        }
        // Trivial satisfaction at t = 1 when Delta T >= 1/2.
        assert!(records[0].bound >= 1.0);
    }

    #[test]
    fn survival_bound_holds_for_threestep() {
        let grid = MomentumGrid::new(2048).unwrap();
        let (t1, _) = threestep_bands(0.5f64.sqrt(), grid).unwrap();
        let psi = gauss_bump(grid, std::f64::consts::PI, 0.14).normalized();
        let records = survival_bound_check(&t1, &psi, 200).unwrap();
        for r in &records {
            assert!(r.satisfied, "t = {}", r.t);
        }
    }

    #[test]
    fn survival_requires_unit_norm() {
        let grid = MomentumGrid::new(512).unwrap();
        let (b1, _) = coined_bands(&CoinParams::hadamard(), grid);
        let psi = hadamard_state(grid).scaled(Complex64::new(0.5, 0.0));
        assert!(matches!(
            survival_bound_check(&b1, &psi, 10),
            Err(QwError::NotNormalized { .. })
        ));
    }

    #[test]
    fn transition_bound_reduces_to_survival() {
        let grid = MomentumGrid::new(1024).unwrap();
        let (b1, _) = coined_bands(&CoinParams::hadamard(), grid);
        let psi = hadamard_state(grid);
        let kernel = TimeKernel::from_band(&b1);
        let mean = inner(&psi, &kernel.apply(&psi).unwrap()).unwrap().re;
        let transition = transition_bound_check(&b1, &psi, &psi, -mean, 50).unwrap();
        let survival = survival_bound_check(&b1, &psi, 50).unwrap();
        // With S = -<psi, T psi> and phi = psi the transition bound is
        // 2 Delta T / t, the square root of the survival bound.
        for (tr, sv) in transition.iter().zip(&survival) {
            assert!((tr.bound - sv.bound.sqrt()).abs() < 1e-10);
        }
    }

    #[test]
    fn transition_bound_holds_for_distinct_states() {
        let grid = MomentumGrid::new(1024).unwrap();
        let (b1, _) = coined_bands(&CoinParams::hadamard(), grid);
        let phi = gauss_bump(grid, 0.95, 0.04).normalized();
        let psi = gauss_bump(grid, 1.10, 0.04).normalized();
        let records = transition_bound_check(&b1, &phi, &psi, 0.0, 200).unwrap();
        for r in &records {
            assert!(r.satisfied, "t = {}", r.t);
        }
        // The bound scales exactly as 1/|t|.
        assert_eq!(records[1].bound, records[3].bound * 2.0);
    }

    #[test]
    fn higher_order_check_on_hadamard() {
        let grid = MomentumGrid::new(2048).unwrap();
        let (b1, _) = coined_bands(&CoinParams::hadamard(), grid);
        let psi = hadamard_state(grid);
        // n = 1 is the plain transition bound.
        let first = higher_order_check(&b1, &psi, 1, 200).unwrap();
        assert!(first.bounded, "sup {} vs C_1 {}", first.sup, first.theorem_constant);
        let second = higher_order_check(&b1, &psi, 2, 200).unwrap();
        assert!(second.bounded, "sup {} vs C_2 {}", second.sup, second.theorem_constant);
        assert!(second.stable);
        assert!(second.sup.is_finite());
        // Faster decay than first order: the weighted amplitude ratio
        // between t = 200 and t = 100 beats 1/4 with 50% headroom.
        let series = band_amplitude_series(&b1, &psi, &psi, 200).unwrap();
        let ratio = series[200].norm() / series[100].norm();
        assert!(ratio < 1.5 / 4.0, "ratio {ratio}");
        assert!(matches!(
            higher_order_check(&b1, &psi, 4, 10),
            Err(QwError::InvalidParameter(..))
        ));
    }

    #[test]
    fn survival_tail_consistent_with_no_eigenvalues() {
        // For walks admitting a strong time operator the survival
        // amplitude must die out: max over t in [100, 200] stays below
        // 4 Delta T / 100.
        let grid = MomentumGrid::new(2048).unwrap();
        let (b1, _) = coined_bands(&CoinParams::hadamard(), grid);
        let psi = hadamard_state(grid);
        let kernel = TimeKernel::from_band(&b1);
        let delta_t = kernel.uncertainty(&psi).unwrap();
        let series = band_amplitude_series(&b1, &psi, &psi, 200).unwrap();
        let tail_max = (100..=200).map(|t| series[t].norm()).fold(0.0f64, f64::max);
        assert!(tail_max < 4.0 * delta_t / 100.0);
    }
}
