//! Discrete sublinear (G-) expectation on a recombining lattice.
//!
//! The canonical process moves by `±σ√dt` per step with `σ` chosen
//! adversarially from a finite volatility set inside `[σ_lo, σ_hi]`. The
//! one-step operator is
//!
//! ```text
//! E_i[v](x) = max_σ ½ [ v(x + σ√dt) + v(x − σ√dt) ]
//! ```
//!
//! evaluated with linear interpolation between grid nodes and a clamped
//! boundary. The grid spacing is `σ_hi √dt / refinement`, so children of the
//! largest volatility always land on nodes.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Upper bound on the number of stored reals a lattice solve may allocate.
pub const DEFAULT_MEMORY_CAP: u64 = 50_000_000;

/// Volatility bounds of the G-function.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GConfig {
    pub sigma_lo: f64,
    pub sigma_hi: f64,
}

impl GConfig {
    pub fn new(sigma_lo: f64, sigma_hi: f64) -> Result<Self> {
        let g = GConfig { sigma_lo, sigma_hi };
        g.validate()?;
        Ok(g)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.sigma_lo > 0.0 && self.sigma_lo.is_finite()) {
            return Err(Error::invalid("sigma_lo", format!("must be positive and finite, got {}", self.sigma_lo)));
        }
        if !self.sigma_hi.is_finite() {
            return Err(Error::invalid("sigma_hi", "must be finite"));
        }
        if self.sigma_lo > self.sigma_hi {
            return Err(Error::invalid(
                "sigma_lo",
                format!("sigma_lo = {} exceeds sigma_hi = {}", self.sigma_lo, self.sigma_hi),
            ));
        }
        Ok(())
    }

    pub fn is_degenerate(&self) -> bool {
        self.sigma_lo == self.sigma_hi
    }
}

/// `G(a) = ½(σ_hi² a⁺ − σ_lo² a⁻)`.
pub fn g_coefficient(a: f64, g: &GConfig) -> f64 {
    0.5 * (g.sigma_hi * g.sigma_hi * a.max(0.0) - g.sigma_lo * g.sigma_lo * (-a).max(0.0))
}

/// Parameters accepted by [`Lattice::build`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LatticeParams {
    pub horizon: f64,
    pub steps: usize,
    pub g: GConfig,
    pub m_vol: usize,
    pub truncation_factor: f64,
    /// Grid nodes per `σ_hi √dt`. `1` puts the spacing at `σ_hi √dt`.
    pub refinement: usize,
    pub memory_cap: u64,
}

impl LatticeParams {
    pub fn new(horizon: f64, steps: usize, g: GConfig, m_vol: usize, truncation_factor: f64) -> Self {
        LatticeParams {
            horizon,
            steps,
            g,
            m_vol,
            truncation_factor,
            refinement: 1,
            memory_cap: DEFAULT_MEMORY_CAP,
        }
    }

    pub fn refinement(mut self, refinement: usize) -> Self {
        self.refinement = refinement;
        self
    }

    pub fn memory_cap(mut self, cap: u64) -> Self {
        self.memory_cap = cap;
        self
    }
}

/// Time grid, truncated spatial grid and admissible volatility set.
#[derive(Debug, Clone, PartialEq)]
pub struct Lattice {
    horizon: f64,
    steps: usize,
    dt: f64,
    sqrt_dt: f64,
    spacing: f64,
    half_width: usize,
    refinement: usize,
    truncation_factor: f64,
    g: GConfig,
    vol_set: Vec<f64>,
    /// Child offset of each volatility in grid units, `refinement·σ/σ_hi`.
    offsets: Vec<f64>,
}

impl Lattice {
    pub fn build(params: LatticeParams) -> Result<Lattice> {
        let LatticeParams {
            horizon,
            steps,
            g,
            m_vol,
            truncation_factor,
            refinement,
            memory_cap,
        } = params;
        g.validate()?;
        if !(horizon > 0.0 && horizon.is_finite()) {
            return Err(Error::invalid("horizon", format!("must be positive, got {horizon}")));
        }
        if steps == 0 {
            return Err(Error::invalid("steps", "need at least one time step"));
        }
        if m_vol < 2 {
            return Err(Error::invalid("m_vol", format!("need at least 2 volatility points, got {m_vol}")));
        }
        if !(truncation_factor >= 1.0 && truncation_factor.is_finite()) {
            return Err(Error::invalid(
                "truncation_factor",
                format!("must be at least 1, got {truncation_factor}"),
            ));
        }
        if refinement == 0 {
            return Err(Error::invalid("refinement", "must be at least 1"));
        }

        let dt = horizon / steps as f64;
        let sqrt_dt = dt.sqrt();
        let spacing = g.sigma_hi * sqrt_dt / refinement as f64;
        // J·spacing >= factor·σ_hi·√T  <=>  J >= factor·refinement·√N
        let needed = truncation_factor * refinement as f64 * (steps as f64).sqrt();
        let mut half_width = (needed * (1.0 - 1e-12)).ceil().max(1.0);
        while half_width * spacing < truncation_factor * g.sigma_hi * horizon.sqrt() * (1.0 - 1e-12) {
            half_width += 1.0;
        }
        let nodes = 2.0 * half_width + 1.0;
        let required = nodes * (steps as f64 + 1.0) * (m_vol as f64 + 3.0);
        if !required.is_finite() || required > memory_cap as f64 {
            return Err(Error::LatticeTooLarge {
                required: required.min(u64::MAX as f64) as u64,
                cap: memory_cap,
            });
        }

        let vol_set = if g.is_degenerate() {
            vec![g.sigma_hi]
        } else {
            let mut v: Vec<f64> = (0..m_vol)
                .map(|k| g.sigma_lo + (g.sigma_hi - g.sigma_lo) * k as f64 / (m_vol - 1) as f64)
                .collect();
            v[0] = g.sigma_lo;
            v[m_vol - 1] = g.sigma_hi;
            v
        };
        let offsets = vol_set.iter().map(|&s| refinement as f64 * (s / g.sigma_hi)).collect();

        Ok(Lattice {
            horizon,
            steps,
            dt,
            sqrt_dt,
            spacing,
            half_width: half_width as usize,
            refinement,
            truncation_factor,
            g,
            vol_set,
            offsets,
        })
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }
    pub fn steps(&self) -> usize {
        self.steps
    }
    pub fn dt(&self) -> f64 {
        self.dt
    }
    pub fn sqrt_dt(&self) -> f64 {
        self.sqrt_dt
    }
    pub fn spacing(&self) -> f64 {
        self.spacing
    }
    /// `J`: nodes run over `j ∈ [−J, J]`.
    pub fn half_width(&self) -> usize {
        self.half_width
    }
    pub fn refinement(&self) -> usize {
        self.refinement
    }
    pub fn truncation_factor(&self) -> f64 {
        self.truncation_factor
    }
    pub fn g(&self) -> &GConfig {
        &self.g
    }
    pub fn vol_set(&self) -> &[f64] {
        &self.vol_set
    }
    /// Number of spatial nodes, `2J + 1`.
    pub fn nodes(&self) -> usize {
        2 * self.half_width + 1
    }
    /// Time of slice `i`.
    pub fn t(&self, i: usize) -> f64 {
        if i == self.steps {
            self.horizon
        } else {
            i as f64 * self.dt
        }
    }
    /// Coordinate of storage index `k` (node `j = k − J`).
    pub fn x(&self, k: usize) -> f64 {
        self.node(k) as f64 * self.spacing
    }
    /// Signed node label `j` of storage index `k`.
    pub fn node(&self, k: usize) -> i64 {
        k as i64 - self.half_width as i64
    }
    /// Storage index of the node at the origin.
    pub fn center(&self) -> usize {
        self.half_width
    }
    pub fn coordinates(&self) -> Vec<f64> {
        (0..self.nodes()).map(|k| self.x(k)).collect()
    }
    /// Position of coordinate `x` in storage-index units.
    pub fn position(&self, x: f64) -> f64 {
        x / self.spacing + self.half_width as f64
    }
    pub(crate) fn offsets(&self) -> &[f64] {
        &self.offsets
    }
    /// Index of `sigma` in the volatility set, if admissible.
    pub fn vol_index(&self, sigma: f64) -> Option<usize> {
        self.vol_set.iter().position(|&s| s == sigma)
    }
}

/// Real values on every lattice node, one slice per time step.
#[derive(Debug, Clone, PartialEq)]
pub struct ValueField {
    slices: Vec<Vec<f64>>,
}

impl ValueField {
    pub fn from_slices(slices: Vec<Vec<f64>>) -> Self {
        ValueField { slices }
    }
    pub fn slice(&self, i: usize) -> &[f64] {
        &self.slices[i]
    }
    pub fn slices(&self) -> &[Vec<f64>] {
        &self.slices
    }
    pub fn len(&self) -> usize {
        self.slices.len()
    }
    pub fn is_empty(&self) -> bool {
        self.slices.is_empty()
    }
    /// Value at slice 0, origin node.
    pub fn root(&self, lattice: &Lattice) -> f64 {
        self.slices[0][lattice.center()]
    }
    pub fn max_abs(&self) -> f64 {
        self.slices.iter().flat_map(|s| s.iter()).fold(0.0_f64, |m, v| m.max(v.abs()))
    }
    /// `max |self − other|` over the common slices.
    pub fn max_abs_diff(&self, other: &ValueField) -> f64 {
        self.slices
            .iter()
            .zip(&other.slices)
            .flat_map(|(a, b)| a.iter().zip(b).map(|(x, y)| (x - y).abs()))
            .fold(0.0_f64, f64::max)
    }

    /// CSV export, columns `t,x,value`, slice-major then node-ascending.
    pub fn write_csv<W: std::io::Write>(&self, lattice: &Lattice, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["t", "x", "value"])?;
        for (i, slice) in self.slices.iter().enumerate() {
            let t = lattice.t(i).to_string();
            for (k, v) in slice.iter().enumerate() {
                w.write_record([t.as_str(), &lattice.x(k).to_string(), &v.to_string()])?;
            }
        }
        w.flush().map_err(|e| Error::io("<csv>", e))?;
        Ok(())
    }
}

/// Terminal payoff `ξ = φ(B_T)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum TerminalSpec {
    /// `x²`
    Quadratic,
    /// `−x²`
    NegQuadratic,
    /// `x`
    Identity,
    /// `max(x − K, 0)`
    Call { strike: f64 },
    /// `c`
    Constant { value: f64 },
}

impl TerminalSpec {
    pub fn eval(&self, x: f64) -> f64 {
        match *self {
            TerminalSpec::Quadratic => x * x,
            TerminalSpec::NegQuadratic => -x * x,
            TerminalSpec::Identity => x,
            TerminalSpec::Call { strike } => (x - strike).max(0.0),
            TerminalSpec::Constant { value } => value,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            TerminalSpec::Quadratic => "quadratic",
            TerminalSpec::NegQuadratic => "neg_quadratic",
            TerminalSpec::Identity => "identity",
            TerminalSpec::Call { .. } => "call",
            TerminalSpec::Constant { .. } => "constant",
        }
    }

    /// Samples the payoff on the grid, rejecting non-finite values.
    pub fn sample(&self, lattice: &Lattice) -> Result<Vec<f64>> {
        sample_payoff(|x| self.eval(x), lattice)
    }
}

/// Samples an arbitrary payoff on the grid, rejecting non-finite values.
pub fn sample_payoff(payoff: impl Fn(f64) -> f64, lattice: &Lattice) -> Result<Vec<f64>> {
    let values: Vec<f64> = (0..lattice.nodes()).map(|k| payoff(lattice.x(k))).collect();
    check_finite(&values, lattice)?;
    Ok(values)
}

pub(crate) fn check_finite(values: &[f64], lattice: &Lattice) -> Result<()> {
    match values.iter().position(|v| !v.is_finite()) {
        Some(k) => Err(Error::NonFinitePayoff {
            node: lattice.node(k),
            x: lattice.x(k),
            value: values[k],
        }),
        None => Ok(()),
    }
}

/// Linear interpolation at fractional storage position `pos`, clamped to the
/// grid ends.
#[inline]
pub(crate) fn interpolate_position(slice: &[f64], pos: f64) -> f64 {
    let last = slice.len() - 1;
    if pos <= 0.0 {
        return slice[0];
    }
    if pos >= last as f64 {
        return slice[last];
    }
    let k = pos.floor();
    let w = pos - k;
    let k = k as usize;
    if w == 0.0 {
        slice[k]
    } else {
        (1.0 - w) * slice[k] + w * slice[k + 1]
    }
}

/// Piecewise-linear interpolation of a slice at coordinate `x`, clamped to
/// the boundary values outside the grid.
pub fn interpolate(slice: &[f64], x: f64, lattice: &Lattice) -> f64 {
    interpolate_position(slice, lattice.position(x))
}

/// Max over the volatility set of `average(k)`; ties go to the larger
/// volatility. Returns the value and the index of the maximiser.
#[inline]
pub(crate) fn sup_over_controls(count: usize, mut average: impl FnMut(usize) -> f64) -> (f64, usize) {
    let mut best = f64::NEG_INFINITY;
    let mut arg = 0;
    // Ascending volatility order, `>=` hands ties to the later (larger) one.
    for k in 0..count {
        let v = average(k);
        if v >= best {
            best = v;
            arg = k;
        }
    }
    (best, arg)
}

/// `½[v(p + off) + v(p − off)]` at fractional position `pos`.
#[inline]
pub(crate) fn branch_average(next: &[f64], pos: f64, offset: f64) -> f64 {
    0.5 * (interpolate_position(next, pos + offset) + interpolate_position(next, pos - offset))
}

/// One-step adversarial expectation at position `pos`: `(value, index of σ*)`.
#[inline]
pub(crate) fn one_step_sup_position(next: &[f64], pos: f64, lattice: &Lattice) -> (f64, usize) {
    let offsets = lattice.offsets();
    sup_over_controls(offsets.len(), |k| branch_average(next, pos, offsets[k]))
}

/// `max_σ ½[v(x + σ√dt) + v(x − σ√dt)]` and the maximising `σ`.
pub fn one_step_sup(next_slice: &[f64], x: f64, lattice: &Lattice) -> (f64, f64) {
    let (value, k) = one_step_sup_position(next_slice, lattice.position(x), lattice);
    (value, lattice.vol_set()[k])
}

/// One backward step of the sublinear expectation over a whole slice.
pub(crate) fn sup_slice(next: &[f64], lattice: &Lattice) -> Vec<f64> {
    (0..lattice.nodes())
        .into_par_iter()
        .map(|k| one_step_sup_position(next, k as f64, lattice).0)
        .collect()
}

/// Conditional G-expectation `Ê_{t_i}[ξ]` at every node.
pub fn conditional_g_expectation(terminal: &TerminalSpec, lattice: &Lattice) -> Result<ValueField> {
    conditional_g_expectation_sampled(terminal.sample(lattice)?, lattice)
}

/// [`conditional_g_expectation`] for a payoff already sampled on the grid.
pub fn conditional_g_expectation_sampled(terminal: Vec<f64>, lattice: &Lattice) -> Result<ValueField> {
    if terminal.len() != lattice.nodes() {
        return Err(Error::invalid(
            "terminal",
            format!("expected {} grid values, got {}", lattice.nodes(), terminal.len()),
        ));
    }
    check_finite(&terminal, lattice)?;
    let n = lattice.steps();
    let mut slices = vec![Vec::new(); n + 1];
    slices[n] = terminal;
    for i in (0..n).rev() {
        slices[i] = sup_slice(&slices[i + 1], lattice);
    }
    Ok(ValueField { slices })
}

/// `Ê[Σ_i c_i(X_{t_i}) dt + terminal(X_T)]` by dynamic programming: the
/// running cost is added at each node before taking the one-step sup.
/// `running[i]` holds the cost of slice `i` for `i < N`.
pub fn g_expectation_with_running_cost(terminal: Vec<f64>, running: &[Vec<f64>], lattice: &Lattice) -> Result<ValueField> {
    let n = lattice.steps();
    if running.len() < n {
        return Err(Error::invalid("running", format!("need {n} cost slices, got {}", running.len())));
    }
    check_finite(&terminal, lattice)?;
    let dt = lattice.dt();
    let mut slices = vec![Vec::new(); n + 1];
    slices[n] = terminal;
    for i in (0..n).rev() {
        let sup = sup_slice(&slices[i + 1], lattice);
        slices[i] = sup.iter().zip(&running[i]).map(|(s, c)| s + c * dt).collect();
    }
    Ok(ValueField { slices })
}

/// Forward occupation probabilities of the state started at the origin and
/// driven by the per-node volatility indices `controls[i][k]`. Children off
/// the grid are split onto the two neighbouring nodes with the linear
/// interpolation weights (the adjoint of [`interpolate`]), so
/// `Σ_k p_i(k) v(k) = E[v(X_{t_i})]` for the interpolated field.
pub fn occupation_measure(controls: &[Vec<usize>], lattice: &Lattice) -> Vec<Vec<f64>> {
    let nodes = lattice.nodes();
    let last = nodes - 1;
    let offsets = lattice.offsets();
    let mut out = Vec::with_capacity(lattice.steps() + 1);
    let mut p = vec![0.0; nodes];
    p[lattice.center()] = 1.0;
    for control in controls.iter().take(lattice.steps()) {
        let mut next = vec![0.0; nodes];
        for (k, &mass) in p.iter().enumerate() {
            if mass == 0.0 {
                continue;
            }
            let off = offsets[control[k]];
            for pos in [k as f64 + off, k as f64 - off] {
                let pos = pos.clamp(0.0, last as f64);
                let lo = pos.floor() as usize;
                let w = pos - lo as f64;
                next[lo] += 0.5 * mass * (1.0 - w);
                if w > 0.0 {
                    next[lo + 1] += 0.5 * mass * w;
                }
            }
        }
        out.push(p);
        p = next;
    }
    out.push(p);
    out
}

/// Discrete sublinear expectation on the exact, non-recombining tree: every
/// child state `x ± σ√dt` is evaluated exactly, with no grid and no
/// interpolation. Cost grows like `(2·|vol_set|)^N`.
pub fn exact_tree_g_expectation(payoff: impl Fn(f64) -> f64, horizon: f64, steps: usize, vol_set: &[f64]) -> Result<f64> {
    if vol_set.is_empty() {
        return Err(Error::invalid("vol_set", "must not be empty"));
    }
    if !(horizon >= 0.0) {
        return Err(Error::invalid("horizon", "must be non-negative"));
    }
    let leaves = (2.0 * vol_set.len() as f64).powi(steps as i32);
    if leaves > 1e8 {
        return Err(Error::EnumerationCap { required: leaves, cap: 1e8 });
    }
    let mut sorted = vol_set.to_vec();
    sorted.sort_by(f64::total_cmp);
    let sqrt_dt = if steps == 0 { 0.0 } else { (horizon / steps as f64).sqrt() };

    fn value(payoff: &dyn Fn(f64) -> f64, x: f64, remaining: usize, vols: &[f64], sqrt_dt: f64) -> f64 {
        if remaining == 0 {
            return payoff(x);
        }
        sup_over_controls(vols.len(), |k| {
            let d = vols[k] * sqrt_dt;
            0.5 * (value(payoff, x + d, remaining - 1, vols, sqrt_dt) + value(payoff, x - d, remaining - 1, vols, sqrt_dt))
        })
        .0
    }
    Ok(value(&payoff, 0.0, steps, &sorted, sqrt_dt))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn lattice(t: f64, n: usize, lo: f64, hi: f64, m: usize, factor: f64) -> Lattice {
        Lattice::build(LatticeParams::new(t, n, GConfig::new(lo, hi).unwrap(), m, factor)).unwrap()
    }

    #[test]
    fn g_coefficient_examples() {
        let g = GConfig::new(0.5, 1.0).unwrap();
        assert_eq!(g_coefficient(0.0, &g), 0.0);
        assert_eq!(g_coefficient(2.0, &g), 1.0);
        assert_eq!(g_coefficient(-2.0, &g), -0.25);
    }

    #[test]
    fn gconfig_rejects_inverted_bounds() {
        assert!(GConfig::new(1.0, 0.5).is_err());
        assert!(GConfig::new(0.0, 0.5).is_err());
        assert!(GConfig::new(0.5, f64::INFINITY).is_err());
    }

    #[test]
    fn lattice_geometry() {
        let lat = lattice(1.0, 4, 0.5, 1.0, 5, 4.0);
        assert_eq!(lat.dt(), 0.25);
        assert_eq!(lat.spacing(), 0.5);
        assert_eq!(lat.half_width(), 8);
        assert!((lat.dt() * lat.steps() as f64 - lat.horizon()).abs() <= f64::EPSILON);
        assert_eq!(lat.vol_set(), &[0.5, 0.625, 0.75, 0.875, 1.0]);
    }

    #[test]
    fn lattice_vol_set_endpoints_and_degenerate() {
        let lat = lattice(1.0, 4, 0.5, 1.0, 2, 4.0);
        assert_eq!(lat.vol_set(), &[0.5, 1.0]);
        let lat = lattice(1.0, 4, 1.0, 1.0, 7, 4.0);
        assert_eq!(lat.vol_set(), &[1.0]);
    }

    #[test]
    fn lattice_covers_truncation_domain() {
        for (n, factor, r) in [(7, 3.3, 1), (200, 5.0, 1), (50, 5.0, 3), (1, 1.0, 1)] {
            let lat = Lattice::build(LatticeParams::new(2.0, n, GConfig::new(0.3, 0.9).unwrap(), 3, factor).refinement(r)).unwrap();
            let reach = lat.half_width() as f64 * lat.spacing();
            assert!(reach >= factor * 0.9 * 2.0_f64.sqrt() * (1.0 - 1e-12));
            // minimal: one node fewer would not cover
            assert!((lat.half_width() as f64 - 1.0) * lat.spacing() < factor * 0.9 * 2.0_f64.sqrt());
        }
    }

    #[test]
    fn lattice_rejects_bad_params() {
        let g = GConfig::new(0.5, 1.0).unwrap();
        assert!(Lattice::build(LatticeParams::new(0.0, 4, g, 3, 4.0)).is_err());
        assert!(Lattice::build(LatticeParams::new(1.0, 0, g, 3, 4.0)).is_err());
        assert!(Lattice::build(LatticeParams::new(1.0, 4, g, 1, 4.0)).is_err());
        assert!(Lattice::build(LatticeParams::new(1.0, 4, g, 3, 0.5)).is_err());
        let err = Lattice::build(LatticeParams::new(1.0, 100_000, g, 5, 5.0)).unwrap_err();
        assert!(matches!(err, Error::LatticeTooLarge { .. }));
        let err = Lattice::build(LatticeParams::new(1.0, 100, g, 5, 5.0).memory_cap(1000)).unwrap_err();
        assert!(matches!(err, Error::LatticeTooLarge { .. }));
    }

    #[test]
    fn interpolation_rules() {
        let lat = lattice(1.0, 4, 0.5, 1.0, 2, 4.0);
        let slice: Vec<f64> = (0..lat.nodes()).map(|k| 3.0 * lat.node(k) as f64 - 1.0).collect();
        for k in 0..lat.nodes() {
            assert_eq!(interpolate(&slice, lat.x(k), &lat), slice[k]);
        }
        let mid = 0.5 * (lat.x(3) + lat.x(4));
        assert_eq!(interpolate(&slice, mid, &lat), 0.5 * (slice[3] + slice[4]));
        assert_eq!(interpolate(&slice, 1e6, &lat), slice[lat.nodes() - 1]);
        assert_eq!(interpolate(&slice, -1e6, &lat), slice[0]);
    }

    #[test]
    fn one_step_sup_examples() {
        // dt = 1 requires T = N = 1; a wide grid keeps children inside.
        let lat = lattice(1.0, 1, 0.5, 1.0, 2, 8.0);
        let sq: Vec<f64> = lat.coordinates().iter().map(|x| x * x).collect();
        assert_eq!(one_step_sup(&sq, 0.0, &lat), (1.0, 1.0));

        let neg: Vec<f64> = sq.iter().map(|v| -v).collect();
        // σ = 0.5 children sit half-way between nodes, where the chord of
        // −x² lies at −0.5 rather than −0.25.
        let lat2 = Lattice::build(LatticeParams::new(1.0, 1, GConfig::new(0.5, 1.0).unwrap(), 2, 8.0).refinement(2)).unwrap();
        let neg2: Vec<f64> = lat2.coordinates().iter().map(|x| -x * x).collect();
        assert_eq!(one_step_sup(&neg2, 0.0, &lat2), (-0.25, 0.5));
        let (v, s) = one_step_sup(&neg, 0.0, &lat);
        assert_eq!((v, s), (-0.5, 0.5));

        let lin: Vec<f64> = lat.coordinates();
        for k in [3, 8, 12] {
            let x = lat.x(k);
            assert_eq!(one_step_sup(&lin, x, &lat), (x, 1.0));
        }
    }

    #[test]
    fn one_step_sup_dominates_every_candidate() {
        let lat = lattice(1.0, 10, 0.2, 1.0, 6, 4.0);
        let v: Vec<f64> = lat.coordinates().iter().map(|x| (3.0 * x).sin() + 0.1 * x * x).collect();
        for k in 0..lat.nodes() {
            let x = lat.x(k);
            let (best, _) = one_step_sup(&v, x, &lat);
            for &s in lat.vol_set() {
                let d = s * lat.sqrt_dt();
                let cand = 0.5 * (interpolate(&v, x + d, &lat) + interpolate(&v, x - d, &lat));
                assert!(best >= cand - 1e-12, "{best} < {cand}");
            }
        }
    }

    #[test]
    fn quadratic_root_is_sigma_hi_squared() {
        let lat = lattice(1.0, 50, 0.5, 1.0, 5, 8.0);
        let y = conditional_g_expectation(&TerminalSpec::Quadratic, &lat).unwrap();
        assert!((y.root(&lat) - 1.0).abs() < 1e-12, "{}", y.root(&lat));
    }

    #[test]
    fn concave_quadratic_needs_on_grid_lower_children() {
        let g = GConfig::new(0.5, 1.0).unwrap();
        // Spacing σ_hi√dt: the σ_lo children fall between nodes and the
        // interpolation chord doubles the effective variance.
        let coarse = Lattice::build(LatticeParams::new(1.0, 50, g, 5, 8.0)).unwrap();
        let y = conditional_g_expectation(&TerminalSpec::NegQuadratic, &coarse).unwrap();
        assert!((y.root(&coarse) + 0.5).abs() < 1e-9, "{}", y.root(&coarse));
        let fine = Lattice::build(LatticeParams::new(1.0, 50, g, 5, 8.0).refinement(2)).unwrap();
        let y = conditional_g_expectation(&TerminalSpec::NegQuadratic, &fine).unwrap();
        assert!((y.root(&fine) + 0.25).abs() < 1e-12, "{}", y.root(&fine));
    }

    #[test]
    fn identity_and_constant_payoffs() {
        // Half-width beyond N nodes keeps the clamped boundary out of reach.
        let lat = lattice(1.0, 30, 0.5, 1.0, 4, 6.0);
        let y = conditional_g_expectation(&TerminalSpec::Identity, &lat).unwrap();
        assert!(y.root(&lat).abs() < 1e-12, "{}", y.root(&lat));
        let y = conditional_g_expectation(&TerminalSpec::Constant { value: 2.75 }, &lat).unwrap();
        assert!(y.slices().iter().flatten().all(|&v| v == 2.75));
    }

    #[test]
    fn non_finite_payoff_names_the_node() {
        let lat = lattice(1.0, 4, 0.5, 1.0, 2, 4.0);
        let values = sample_payoff(|x| if x == 1.0 { f64::NAN } else { x }, &lat).unwrap_err();
        match values {
            Error::NonFinitePayoff { node, x, .. } => {
                assert_eq!(node, 2);
                assert_eq!(x, 1.0);
            }
            other => panic!("unexpected {other:?}"),
        }
        let mut sampled = TerminalSpec::Identity.sample(&lat).unwrap();
        sampled[0] = f64::INFINITY;
        assert!(matches!(
            conditional_g_expectation_sampled(sampled, &lat),
            Err(Error::NonFinitePayoff { node: -8, .. })
        ));
    }

    #[test]
    fn occupation_measure_is_a_probability() {
        let lat = lattice(1.0, 20, 0.3, 1.0, 4, 3.0);
        let controls: Vec<Vec<usize>> = (0..lat.steps()).map(|i| (0..lat.nodes()).map(|k| (i + k) % 4).collect()).collect();
        let p = occupation_measure(&controls, &lat);
        assert_eq!(p.len(), lat.steps() + 1);
        for slice in &p {
            let total: f64 = slice.iter().sum();
            assert!((total - 1.0).abs() < 1e-12);
            assert!(slice.iter().all(|&q| q >= 0.0));
        }
    }

    #[test]
    fn running_cost_of_one_accumulates_time() {
        let lat = lattice(0.8, 8, 0.5, 1.0, 3, 4.0);
        let ones = vec![vec![1.0; lat.nodes()]; lat.steps()];
        let v = g_expectation_with_running_cost(vec![0.0; lat.nodes()], &ones, &lat).unwrap();
        assert!((v.root(&lat) - 0.8).abs() < 1e-12);
    }

    #[test]
    fn exact_tree_matches_closed_forms() {
        let v = exact_tree_g_expectation(|x| x * x, 1.0, 1, &[0.5, 1.0]).unwrap();
        assert_eq!(v, 1.0);
        let v = exact_tree_g_expectation(|x| -x * x, 1.0, 3, &[0.5, 1.0]).unwrap();
        assert!((v + 0.25).abs() < 1e-15);
        let v = exact_tree_g_expectation(|x| x, 1.0, 4, &[0.5, 0.7, 1.0]).unwrap();
        assert!(v.abs() < 1e-15);
    }

    #[test]
    fn csv_layout() {
        let lat = lattice(1.0, 1, 1.0, 1.0, 2, 1.0);
        let y = conditional_g_expectation(&TerminalSpec::Identity, &lat).unwrap();
        let mut buf = Vec::new();
        y.write_csv(&lat, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text, "t,x,value\n0,-1,-0.5\n0,0,0\n0,1,0.5\n1,-1,-1\n1,0,0\n1,1,1\n");
    }
}
