//! Backward lattice solver for `(Y, Z, K)`.
//!
//! Each step takes the adversarial one-step expectation `S` of the next
//! slice, reads `Z` off the central difference at the maximising volatility,
//! and then solves `y − dt·f(t, y, Z) = S` for `y`. The K-increment of a
//! volatility `σ` is the shortfall of its branch average against `S`.

use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::rootfind::{solve_increasing, RootOptions};
use crate::sublinear::{branch_average, check_finite, interpolate_position, sup_over_controls, Lattice, TerminalSpec, ValueField};
use crate::yosida::{Driver, GeneratorSpec, Regularized};

/// Unique `y` with `y − dt·f(t, y, z) = S`.
///
/// Requires `dt·u_t < 1`, which makes the map increasing with slope at least
/// `1 − dt·u_t`. On violation `min_steps` is the number of equal substeps
/// this interval would need.
pub fn implicit_step(s: f64, t: f64, z: f64, driver: &dyn Driver, dt: f64, tol: f64) -> Result<f64> {
    let product = dt * driver.rate(t);
    if !(product < 1.0) {
        return Err(Error::StepConditionViolation {
            t,
            product,
            min_steps: product.floor() as usize + 1,
        });
    }
    if !(tol > 0.0) {
        return Err(Error::invalid("tol", format!("must be positive, got {tol}")));
    }
    if dt == 0.0 {
        return Ok(s);
    }
    let radius = (dt * driver.eval(t, s, z)?.abs()).max(1.0);
    let root = solve_increasing(|y| Ok(y - dt * driver.eval(t, y, z)?), s, s, radius, RootOptions::with_tol(tol))?;
    Ok(root.x)
}

/// Central difference `[v(x+σ√dt) − v(x−σ√dt)] / (2σ√dt)` of the
/// interpolated next slice.
pub fn extract_z(next_slice: &[f64], x: f64, sigma_star: f64, lattice: &Lattice) -> f64 {
    let h = sigma_star * lattice.sqrt_dt();
    central_difference(next_slice, lattice.position(x), offset(sigma_star, lattice), h)
}

/// Child offset in grid units; admissible volatilities reuse the lattice's
/// stored offsets so results match the one-step sup bit for bit.
fn offset(sigma: f64, lattice: &Lattice) -> f64 {
    match lattice.vol_index(sigma) {
        Some(m) => lattice.offsets()[m],
        None => sigma * lattice.sqrt_dt() / lattice.spacing(),
    }
}

#[inline]
fn central_difference(next: &[f64], pos: f64, off: f64, h: f64) -> f64 {
    if h == 0.0 {
        return 0.0;
    }
    (interpolate_position(next, pos + off) - interpolate_position(next, pos - off)) / (2.0 * h)
}

/// `ΔK(σ) = ½[v(x+σ√dt) + v(x−σ√dt)] − S`, with `S` the node's one-step
/// sup value.
pub fn k_increment(next_slice: &[f64], x: f64, sigma: f64, s: f64, lattice: &Lattice) -> f64 {
    branch_average(next_slice, lattice.position(x), offset(sigma, lattice)) - s
}

/// Smallest number of steps `N` on `[0, horizon]` with
/// `(T/N)·u(t_i) < 1` at every `t_i = iT/N, i < N`.
pub fn min_steps_for_rate(rate: impl Fn(f64) -> f64, horizon: f64, start: usize) -> usize {
    let ok = |n: usize| {
        let dt = horizon / n as f64;
        (0..n).all(|i| dt * rate(i as f64 * dt) < 1.0)
    };
    let mut hi = start.max(1);
    while !ok(hi) {
        if hi >= 1 << 26 {
            return hi;
        }
        hi *= 2;
    }
    let mut lo = 1;
    if ok(lo) {
        return lo;
    }
    while hi - lo > 1 {
        let mid = lo + (hi - lo) / 2;
        if ok(mid) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    hi
}

/// `(Y, Z, K)` on a lattice.
#[derive(Debug, Clone, PartialEq)]
pub struct GBSDESolution {
    pub lattice: Lattice,
    /// Slices `0..=N`.
    pub y: ValueField,
    /// Slices `0..N`.
    pub z: ValueField,
    /// Maximising volatility, slices `0..N`.
    pub sigma_star: ValueField,
    /// `ΔK(i, k, σ_m)` flattened as `[i][k][m]`.
    k_increments: Vec<f64>,
}

impl GBSDESolution {
    pub fn root(&self) -> f64 {
        self.y.root(&self.lattice)
    }

    /// `ΔK` at slice `i`, node index `k`, volatility index `m`.
    pub fn k_increment(&self, i: usize, k: usize, m: usize) -> f64 {
        let per_slice = self.lattice.nodes() * self.lattice.vol_set().len();
        self.k_increments[i * per_slice + k * self.lattice.vol_set().len() + m]
    }

    pub fn k_increments(&self) -> &[f64] {
        &self.k_increments
    }

    /// Largest stored `ΔK`.
    pub fn max_k_increment(&self) -> f64 {
        self.k_increments.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    /// `ΔK(σ*)` at every node, in slice-major order.
    pub fn k_at_maximizer(&self) -> impl Iterator<Item = f64> + '_ {
        let lat = &self.lattice;
        (0..lat.steps()).flat_map(move |i| {
            (0..lat.nodes()).map(move |k| {
                let m = lat.vol_index(self.sigma_star.slice(i)[k]).expect("maximiser is admissible");
                self.k_increment(i, k, m)
            })
        })
    }

    pub fn write_y_csv<W: std::io::Write>(&self, out: W) -> Result<()> {
        self.y.write_csv(&self.lattice, out)
    }

    pub fn write_z_csv<W: std::io::Write>(&self, out: W) -> Result<()> {
        self.z.write_csv(&self.lattice, out)
    }

    /// Columns `t,x,sigma`.
    pub fn write_sigma_star_csv<W: std::io::Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["t", "x", "sigma"])?;
        for (i, slice) in self.sigma_star.slices().iter().enumerate() {
            let t = self.lattice.t(i).to_string();
            for (k, s) in slice.iter().enumerate() {
                w.write_record([t.as_str(), &self.lattice.x(k).to_string(), &s.to_string()])?;
            }
        }
        w.flush().map_err(|e| Error::io("<csv>", e))?;
        Ok(())
    }

    /// Columns `t,x,sigma,delta_k`.
    pub fn write_k_csv<W: std::io::Write>(&self, out: W) -> Result<()> {
        let lat = &self.lattice;
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["t", "x", "sigma", "delta_k"])?;
        for i in 0..lat.steps() {
            let t = lat.t(i).to_string();
            for k in 0..lat.nodes() {
                let x = lat.x(k).to_string();
                for (m, s) in lat.vol_set().iter().enumerate() {
                    w.write_record([t.as_str(), &x, &s.to_string(), &self.k_increment(i, k, m).to_string()])?;
                }
            }
        }
        w.flush().map_err(|e| Error::io("<csv>", e))?;
        Ok(())
    }

    /// Writes `Y.csv`, `Z.csv`, `sigma_star.csv` and `K.csv` into `dir`.
    pub fn write_csv_dir(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let open = |name: &str| {
            let path = dir.join(name);
            std::fs::File::create(&path).map(std::io::BufWriter::new).map_err(|e| Error::io(&path, e))
        };
        self.write_y_csv(open("Y.csv")?)?;
        self.write_z_csv(open("Z.csv")?)?;
        self.write_sigma_star_csv(open("sigma_star.csv")?)?;
        self.write_k_csv(open("K.csv")?)?;
        Ok(())
    }
}

struct NodeOut {
    y: f64,
    z: f64,
    sigma: f64,
    dk: Vec<f64>,
}

/// Generic backward sweep. `step(t, S, Z)` turns the one-step sup value into
/// `Y` at the node.
pub(crate) fn backward_sweep<F>(terminal: Vec<f64>, lattice: &Lattice, step: F) -> Result<GBSDESolution>
where
    F: Fn(f64, f64, f64) -> Result<f64> + Sync,
{
    if terminal.len() != lattice.nodes() {
        return Err(Error::invalid(
            "terminal",
            format!("expected {} grid values, got {}", lattice.nodes(), terminal.len()),
        ));
    }
    check_finite(&terminal, lattice)?;
    let n = lattice.steps();
    let nodes = lattice.nodes();
    let vols = lattice.vol_set();
    let offsets = lattice.offsets();

    let mut y = vec![Vec::new(); n + 1];
    let mut z = vec![Vec::new(); n];
    let mut sigma_star = vec![Vec::new(); n];
    let mut k_increments = vec![0.0; n * nodes * vols.len()];
    y[n] = terminal;

    for i in (0..n).rev() {
        let t = lattice.t(i);
        let next = &y[i + 1];
        let out: Vec<Result<NodeOut>> = (0..nodes)
            .into_par_iter()
            .map(|k| {
                let pos = k as f64;
                let averages: Vec<f64> = offsets.iter().map(|&off| branch_average(next, pos, off)).collect();
                let (s, m) = sup_over_controls(averages.len(), |j| averages[j]);
                let sigma = vols[m];
                let zk = central_difference(next, pos, offsets[m], sigma * lattice.sqrt_dt());
                let yk = step(t, s, zk).map_err(|e| e.at_node(i, lattice.node(k)))?;
                Ok(NodeOut {
                    y: yk,
                    z: zk,
                    sigma,
                    dk: averages.iter().map(|a| a - s).collect(),
                })
            })
            .collect();
        let mut yi = Vec::with_capacity(nodes);
        let mut zi = Vec::with_capacity(nodes);
        let mut si = Vec::with_capacity(nodes);
        let base = i * nodes * vols.len();
        for (k, node) in out.into_iter().enumerate() {
            let node = node?;
            yi.push(node.y);
            zi.push(node.z);
            si.push(node.sigma);
            k_increments[base + k * vols.len()..base + (k + 1) * vols.len()].copy_from_slice(&node.dk);
        }
        y[i] = yi;
        z[i] = zi;
        sigma_star[i] = si;
    }

    Ok(GBSDESolution {
        lattice: lattice.clone(),
        y: ValueField::from_slices(y),
        z: ValueField::from_slices(z),
        sigma_star: ValueField::from_slices(sigma_star),
        k_increments,
    })
}

fn check_step_condition(driver: &dyn Driver, lattice: &Lattice) -> Result<()> {
    let dt = lattice.dt();
    for i in 0..lattice.steps() {
        let t = lattice.t(i);
        let product = dt * driver.rate(t);
        if !(product < 1.0) {
            let min_steps = min_steps_for_rate(|s| driver.rate(s), lattice.horizon(), lattice.steps());
            return Err(Error::StepConditionViolation { t, product, min_steps });
        }
    }
    Ok(())
}

/// Full backward solve with any [`Driver`] and a sampled terminal payoff.
pub fn solve_with_driver(driver: &dyn Driver, terminal: Vec<f64>, lattice: &Lattice, tol: f64) -> Result<GBSDESolution> {
    check_step_condition(driver, lattice)?;
    let dt = lattice.dt();
    backward_sweep(terminal, lattice, |t, s, z| implicit_step(s, t, z, driver, dt, tol))
}

/// Solves with the generator itself (`alpha = None`) or its regularization
/// `f^α`.
pub fn solve(spec: &GeneratorSpec, terminal: &TerminalSpec, lattice: &Lattice, alpha: Option<f64>, tol: f64) -> Result<GBSDESolution> {
    solve_sampled(spec, terminal.sample(lattice)?, lattice, alpha, tol)
}

/// [`solve`] for a payoff already sampled on the grid.
pub fn solve_sampled(spec: &GeneratorSpec, terminal: Vec<f64>, lattice: &Lattice, alpha: Option<f64>, tol: f64) -> Result<GBSDESolution> {
    match alpha {
        None => solve_with_driver(spec, terminal, lattice, tol),
        Some(a) => {
            let reg = Regularized::new(spec, a, tol)?;
            solve_with_driver(&reg, terminal, lattice, tol)
        }
    }
}

/// Volatility choice along a simulated path.
#[derive(Debug, Clone, PartialEq)]
pub enum Control {
    /// The maximiser at each visited state.
    WorstCase,
    /// One admissible volatility per step.
    Sequence(Vec<f64>),
    /// Uniform draw from the volatility set at each step.
    Random { seed: u64 },
}

/// Source of the `±1` shocks.
#[derive(Debug, Clone, PartialEq)]
pub enum Shocks {
    Seeded(u64),
    Given(Vec<i8>),
}

/// One forward path. `sigma`, `shocks` and `z` have one entry per step, the
/// rest one entry per time point.
#[derive(Debug, Clone, PartialEq)]
pub struct PathRecord {
    pub times: Vec<f64>,
    pub states: Vec<f64>,
    pub sigma: Vec<f64>,
    pub shocks: Vec<i8>,
    pub y: Vec<f64>,
    pub z: Vec<f64>,
    pub k_cum: Vec<f64>,
}

impl PathRecord {
    pub fn k_terminal(&self) -> f64 {
        *self.k_cum.last().unwrap_or(&0.0)
    }

    /// Columns `step,t,x,sigma,shock,Y,Z,K_cum`; the last row leaves the
    /// per-step columns empty.
    pub fn write_csv<W: std::io::Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["step", "t", "x", "sigma", "shock", "Y", "Z", "K_cum"])?;
        for i in 0..self.times.len() {
            let per_step = |v: Option<String>| v.unwrap_or_default();
            w.write_record([
                i.to_string(),
                self.times[i].to_string(),
                self.states[i].to_string(),
                per_step(self.sigma.get(i).map(f64::to_string)),
                per_step(self.shocks.get(i).map(i8::to_string)),
                self.y[i].to_string(),
                per_step(self.z.get(i).map(f64::to_string)),
                self.k_cum[i].to_string(),
            ])?;
        }
        w.flush().map_err(|e| Error::io("<csv>", e))?;
        Ok(())
    }
}

/// Walks forward from the origin under `control`. At every visited state
/// (on or off the grid) the one-step sup, `Z` and `ΔK` are recomputed from
/// the next `Y` slice, so the worst-case control accumulates exactly zero.
pub fn simulate_path(solution: &GBSDESolution, control: &Control, shocks: &Shocks) -> Result<PathRecord> {
    let lat = &solution.lattice;
    let n = lat.steps();
    let vols = lat.vol_set();
    if let Control::Sequence(seq) = control {
        if seq.len() != n {
            return Err(Error::ControlLength { expected: n, got: seq.len() });
        }
        if let Some(&sigma) = seq.iter().find(|s| lat.vol_index(**s).is_none()) {
            return Err(Error::InadmissibleControl { sigma });
        }
    }
    if let Shocks::Given(given) = shocks {
        if given.len() != n {
            return Err(Error::ControlLength {
                expected: n,
                got: given.len(),
            });
        }
        if given.iter().any(|s| *s != 1 && *s != -1) {
            return Err(Error::invalid("shocks", "every shock must be +1 or -1"));
        }
    }
    let mut shock_rng = match shocks {
        Shocks::Seeded(seed) => Some(ChaCha8Rng::seed_from_u64(*seed)),
        Shocks::Given(_) => None,
    };
    let mut control_rng = match control {
        Control::Random { seed } => Some(ChaCha8Rng::seed_from_u64(*seed)),
        _ => None,
    };
    let offsets = lat.offsets();

    let mut rec = PathRecord {
        times: Vec::with_capacity(n + 1),
        states: Vec::with_capacity(n + 1),
        sigma: Vec::with_capacity(n),
        shocks: Vec::with_capacity(n),
        y: Vec::with_capacity(n + 1),
        z: Vec::with_capacity(n),
        k_cum: Vec::with_capacity(n + 1),
    };
    let mut x = 0.0;
    let mut k_cum = 0.0;
    for i in 0..n {
        let pos = lat.position(x);
        let next = solution.y.slice(i + 1);
        let averages: Vec<f64> = offsets.iter().map(|&off| branch_average(next, pos, off)).collect();
        let (s, m_star) = sup_over_controls(averages.len(), |j| averages[j]);
        let m = match control {
            Control::WorstCase => m_star,
            Control::Sequence(seq) => lat.vol_index(seq[i]).expect("checked above"),
            Control::Random { .. } => control_rng.as_mut().expect("seeded").gen_range(0..vols.len()),
        };
        let shock: i8 = match (shocks, shock_rng.as_mut()) {
            (Shocks::Given(g), _) => g[i],
            (_, Some(rng)) => {
                if rng.gen::<bool>() {
                    1
                } else {
                    -1
                }
            }
            _ => unreachable!(),
        };
        rec.times.push(lat.t(i));
        rec.states.push(x);
        rec.y.push(interpolate_position(solution.y.slice(i), pos));
        rec.z.push(central_difference(next, pos, offsets[m_star], vols[m_star] * lat.sqrt_dt()));
        rec.sigma.push(vols[m]);
        rec.shocks.push(shock);
        rec.k_cum.push(k_cum);
        k_cum += averages[m] - s;
        x += f64::from(shock) * vols[m] * lat.sqrt_dt();
    }
    rec.times.push(lat.t(n));
    rec.states.push(x);
    rec.y.push(interpolate_position(solution.y.slice(n), lat.position(x)));
    rec.k_cum.push(k_cum);
    Ok(rec)
}
