//! Reference implementations used to check the engine: brute-force control
//! enumeration, closed forms, a direct binomial sum and a Picard solver.

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::solver::{backward_sweep, GBSDESolution};
use crate::sublinear::{GConfig, Lattice, TerminalSpec};
use crate::yosida::{Driver, GeneratorSpec, Regularized};

/// Default ceiling on the number of enumerated strategies.
pub const DEFAULT_ENUMERATION_CAP: f64 = 2e7;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OracleReport {
    pub oracle: String,
    pub instance: String,
    pub oracle_value: f64,
    pub engine_value: f64,
    /// `|oracle_value − engine_value|`.
    pub gap: f64,
    pub tolerance: f64,
    pub passed: bool,
}

impl OracleReport {
    pub fn new(oracle: impl Into<String>, instance: impl Into<String>, oracle_value: f64, engine_value: f64, tolerance: f64) -> Self {
        let gap = (oracle_value - engine_value).abs();
        OracleReport {
            oracle: oracle.into(),
            instance: instance.into(),
            oracle_value,
            engine_value,
            gap,
            tolerance,
            passed: gap <= tolerance,
        }
    }
}

/// Exact discrete sublinear expectation by enumerating every adapted
/// control on the non-recombining tree.
///
/// A strategy assigns a volatility to each of the `2^N − 1` partial shock
/// histories, so there are `m^(2^N − 1)` of them. Each is scored by its plain
/// binomial expectation and the maximum is returned.
pub fn brute_force_g_expectation(terminal: &TerminalSpec, horizon: f64, steps: usize, vol_set: &[f64], cap: f64) -> Result<f64> {
    let m = vol_set.len();
    if m == 0 {
        return Err(Error::invalid("vol_set", "must not be empty"));
    }
    if !(horizon >= 0.0) {
        return Err(Error::invalid("horizon", "must be non-negative"));
    }
    if steps > 5 {
        return Err(Error::invalid("steps", format!("brute force is limited to N <= 5, got {steps}")));
    }
    let histories = (1usize << steps) - 1;
    let required = (m as f64).powi(histories as i32);
    if required > cap {
        return Err(Error::EnumerationCap { required, cap });
    }
    let strategies = m.pow(histories as u32);
    let d = if steps == 0 { 0.0 } else { (horizon / steps as f64).sqrt() };

    // Histories are numbered heap-style: root 0, children of h are 2h+1
    // (down) and 2h+2 (up).
    let score = |code: usize| -> f64 {
        let mut choice = [0usize; 31];
        let mut c = code;
        for slot in choice.iter_mut().take(histories) {
            *slot = c % m;
            c /= m;
        }
        fn expect(terminal: &TerminalSpec, choice: &[usize], vols: &[f64], d: f64, h: usize, x: f64, remaining: usize) -> f64 {
            if remaining == 0 {
                return terminal.eval(x);
            }
            let step = vols[choice[h]] * d;
            0.5 * (expect(terminal, choice, vols, d, 2 * h + 2, x + step, remaining - 1)
                + expect(terminal, choice, vols, d, 2 * h + 1, x - step, remaining - 1))
        }
        expect(terminal, &choice, vol_set, d, 0, 0.0, steps)
    };
    Ok((0..strategies).into_par_iter().map(score).reduce(|| f64::NEG_INFINITY, f64::max))
}

/// `Ê[B_T²] = σ̄²T` for `sign = +1` and `Ê[−B_T²] = −σ̲²T` for `sign = −1`.
pub fn quadratic_closed_form(g: &GConfig, horizon: f64, sign: i8) -> f64 {
    if sign >= 0 {
        g.sigma_hi * g.sigma_hi * horizon
    } else {
        -(g.sigma_lo * g.sigma_lo) * horizon
    }
}

/// Classical binomial expectation `Σ_j C(N,j) 2^{−N} φ((2j − N)σ√dt)`,
/// weights formed in log space.
pub fn binomial_expectation(terminal: &TerminalSpec, horizon: f64, steps: usize, sigma: f64) -> f64 {
    let n = steps;
    let d = if n == 0 { 0.0 } else { sigma * (horizon / n as f64).sqrt() };
    let ln2n = n as f64 * std::f64::consts::LN_2;
    let mut log_c = 0.0_f64;
    let mut total = 0.0;
    for j in 0..=n {
        if j > 0 {
            log_c += ((n - j + 1) as f64).ln() - (j as f64).ln();
        }
        let x = (2.0 * j as f64 - n as f64) * d;
        total += (log_c - ln2n).exp() * terminal.eval(x);
    }
    total
}

/// Backward solve where each implicit step is found by the fixed-point
/// iteration `y ← S + dt·f(t, y, Z)` instead of root finding. Needs
/// `dt·lipschitz_y(t_i) < 1` at every step.
pub fn picard_lipschitz_solve(
    driver: &dyn Driver,
    lipschitz_y: &(dyn Fn(f64) -> f64 + Sync),
    terminal: Vec<f64>,
    lattice: &Lattice,
    tol: f64,
) -> Result<GBSDESolution> {
    if !(tol > 0.0) {
        return Err(Error::invalid("tol", format!("must be positive, got {tol}")));
    }
    let dt = lattice.dt();
    for i in 0..lattice.steps() {
        let product = dt * lipschitz_y(lattice.t(i));
        if !(product < 1.0) {
            return Err(Error::ContractionViolation { product });
        }
    }
    const MAX_ITERATIONS: usize = 10_000;
    backward_sweep(terminal, lattice, |t, s, z| {
        let mut y = s;
        for _ in 0..MAX_ITERATIONS {
            let next = s + dt * driver.eval(t, y, z)?;
            let residual = (next - y).abs();
            y = next;
            if residual <= tol {
                return Ok(y);
            }
        }
        let residual = (s + dt * driver.eval(t, y, z)? - y).abs();
        Err(Error::ToleranceFailure {
            tol,
            residual,
            iterations: MAX_ITERATIONS,
        })
    })
}

/// [`picard_lipschitz_solve`] on the regularized generator `f^α`, whose
/// `y`-Lipschitz constant is `2/α + u_t`.
pub fn picard_regularized_solve(
    spec: &GeneratorSpec,
    alpha: f64,
    terminal: Vec<f64>,
    lattice: &Lattice,
    tol_root: f64,
    tol_picard: f64,
) -> Result<GBSDESolution> {
    let reg = Regularized::new(spec, alpha, tol_root)?;
    let lip = |t: f64| reg.lipschitz_y(t);
    picard_lipschitz_solve(&reg, &lip, terminal, lattice, tol_picard)
}
