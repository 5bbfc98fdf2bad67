//! Orbits of the line field `ker α ∩ ker β` on a torus bundle.
//!
//! The field is the coefficient cross product `α × β`, normalized to unit
//! length and oriented by continuity from a seed convention (positive `dz`
//! component, else positive `dx`). Since the cross product only vanishes
//! where the kernels coincide, a flip of its orientation along an orbit
//! means the orbit went through such a point, and is reported as an error.
//!
//! Points live in the fundamental domain `[0, 1)³`. Leaving through
//! `z = 1` lands at `z = 0` with `(x, y) ↦ A⁻¹(x, y)`; leaving through
//! `z = 0` lands at `z = 1` with `(x, y) ↦ A(x, y)`.

use serde::{Deserialize, Serialize};

use crate::chart::{cross, dot, norm, Point, Vector};
use crate::error::{Error, Result};
use crate::monodromy::Monodromy;
use crate::propeller::BiContactCandidate;

pub const DEFAULT_MARGIN_FLOOR: f64 = 1e-6;

/// Offset of the finite-difference return-map Jacobian.
pub const JACOBIAN_OFFSET: f64 = 1e-6;

fn normalize(v: Vector) -> Vector {
    let n = norm(v);
    [v[0] / n, v[1] / n, v[2] / n]
}

/// The seed orientation: positive `dz` component if there is one, else
/// positive `dx`, else positive `dy`.
fn seeded(v: Vector) -> Vector {
    let key = if v[2] != 0.0 {
        v[2]
    } else if v[0] != 0.0 {
        v[0]
    } else {
        v[1]
    };
    if key < 0.0 {
        [-v[0], -v[1], -v[2]]
    } else {
        v
    }
}

/// Unit generator of `ker α ∩ ker β` at `p` and the transversality margin
/// there, without orientation.
fn raw_direction(c: &BiContactCandidate, p: Point, floor: f64) -> Result<(Vector, f64)> {
    let (a, b) = (c.alpha.eval(p), c.beta.eval(p));
    let x = cross(a, b);
    let margin = norm(x) / (norm(a) * norm(b));
    if !(margin >= floor) {
        return Err(Error::DegeneratePlane { point: p, margin, floor, time: f64::NAN });
    }
    Ok((normalize(x), margin))
}

/// The unit line field at `p` with the seed orientation.
pub fn vector_field(c: &BiContactCandidate, p: Point, floor: f64) -> Result<Vector> {
    Ok(seeded(raw_direction(c, p, floor)?.0))
}

/// The unit line field at `p`, oriented to agree with `reference`.
pub fn vector_field_oriented(c: &BiContactCandidate, p: Point, floor: f64, reference: Vector) -> Result<Vector> {
    let (v, _) = raw_direction(c, p, floor)?;
    Ok(if dot(v, reference) < 0.0 { [-v[0], -v[1], -v[2]] } else { v })
}

/// `sign·(α × β)/|α × β|`, required to agree with `reference`. The cross
/// product is continuous and nonzero wherever the kernels are transverse,
/// so disagreement means a zero of it lies between `reference` and `p`.
fn signed_field(c: &BiContactCandidate, p: Point, floor: f64, sign: f64, reference: Vector) -> Result<Vector> {
    let (v, margin) = raw_direction(c, p, floor)?;
    let v = [sign * v[0], sign * v[1], sign * v[2]];
    let d = dot(v, reference);
    if d > 0.0 {
        Ok(v)
    } else {
        Err(Error::DegeneratePlane { point: p, margin: margin.min(d.abs()), floor, time: f64::NAN })
    }
}

/// One classical Runge–Kutta step of `x′ = f(x)`.
pub fn rk4_step<F>(f: &F, p: Point, h: f64) -> Result<Point>
where
    F: Fn(Point) -> Result<Vector>,
{
    let add = |p: Point, k: Vector, s: f64| [p[0] + s * k[0], p[1] + s * k[1], p[2] + s * k[2]];
    let k1 = f(p)?;
    let k2 = f(add(p, k1, 0.5 * h))?;
    let k3 = f(add(p, k2, 0.5 * h))?;
    let k4 = f(add(p, k3, h))?;
    Ok([
        p[0] + h / 6.0 * (k1[0] + 2.0 * k2[0] + 2.0 * k3[0] + k4[0]),
        p[1] + h / 6.0 * (k1[1] + 2.0 * k2[1] + 2.0 * k3[1] + k4[1]),
        p[2] + h / 6.0 * (k1[2] + 2.0 * k2[2] + 2.0 * k3[2] + k4[2]),
    ])
}

/// Step length `h* ∈ (0, h]` at which `step(h*)` reaches height `level`.
pub fn locate_crossing<S>(step: S, h: f64, z0: f64, level: f64) -> Result<f64>
where
    S: Fn(f64) -> Result<Point>,
{
    let g = |s: f64| -> Result<f64> { Ok(step(s)?[2] - level) };
    let (mut lo, mut hi) = (0.0, h);
    let (mut glo, mut ghi) = (z0 - level, g(h)?);
    // Regula falsi with the Illinois modification, falling back to halving.
    let mut side = 0i8;
    for _ in 0..200 {
        if ghi == 0.0 {
            return Ok(hi);
        }
        let mut s = (lo * ghi - hi * glo) / (ghi - glo);
        if !(s > lo && s < hi) {
            s = 0.5 * (lo + hi);
        }
        let gs = g(s)?;
        if gs.abs() < 1e-15 || hi - lo < 1e-16 {
            return Ok(s);
        }
        if (gs < 0.0) == (glo < 0.0) {
            lo = s;
            glo = gs;
            if side == -1 {
                ghi *= 0.5;
            }
            side = -1;
        } else {
            hi = s;
            ghi = gs;
            if side == 1 {
                glo *= 0.5;
            }
            side = 1;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Which way an orbit crossed the gluing torus.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Crossing {
    Up,
    Down,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GluingEvent {
    pub time: f64,
    pub crossing: Crossing,
    /// Point on the torus being left, `z = 1` or `z = 0`.
    pub before: Point,
    /// The same point in the fundamental domain after the gluing.
    pub after: Point,
}

/// Position, orientation and crossing log of an orbit.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FlowState {
    pub time: f64,
    pub position: Point,
    pub direction: Vector,
    pub events: Vec<GluingEvent>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    /// `(time, position)` after every step, starting with the initial point.
    pub samples: Vec<(f64, Point)>,
    pub state: FlowState,
}

fn wrap_unit(x: f64) -> f64 {
    let y = x.rem_euclid(1.0);
    if y >= 1.0 {
        0.0
    } else {
        y
    }
}

fn apply(m: &Monodromy, v: [f64; 2]) -> [f64; 2] {
    m.act(v)
}

fn transform_direction(m: &Monodromy, d: Vector) -> Vector {
    let h = apply(m, [d[0], d[1]]);
    normalize([h[0], h[1], d[2]])
}

/// Integration settings.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FlowConfig {
    pub step: f64,
    pub margin_floor: f64,
}

impl FlowConfig {
    pub fn new(step: f64) -> Self {
        Self { step, margin_floor: DEFAULT_MARGIN_FLOOR }
    }
}

/// Sequential integrator for one orbit.
pub struct Integrator<'a> {
    candidate: &'a BiContactCandidate,
    config: FlowConfig,
    inverse: Monodromy,
    /// `±1`, the seed orientation relative to `α × β`.
    sign: f64,
    pub state: FlowState,
    /// Stop inside [`Integrator::advance`] once this many crossings are logged.
    pub stop_after: Option<usize>,
}

impl<'a> Integrator<'a> {
    pub fn new(candidate: &'a BiContactCandidate, start: Point, config: FlowConfig) -> Result<Self> {
        if !(config.step > 0.0 && config.step.is_finite()) {
            return Err(Error::param("step", format!("must be positive, got {}", config.step)));
        }
        let start = [wrap_unit(start[0]), wrap_unit(start[1]), start[2]];
        if !(0.0..1.0).contains(&start[2]) {
            return Err(Error::param("start", "z must lie in [0, 1)"));
        }
        let (raw, _) = raw_direction(candidate, start, config.margin_floor).map_err(|e| with_time(e, 0.0))?;
        let direction = seeded(raw);
        let sign = if direction == raw { 1.0 } else { -1.0 };
        Ok(Self {
            candidate,
            config,
            inverse: candidate.monodromy.inverse(),
            sign,
            state: FlowState { time: 0.0, position: start, direction, events: Vec::new() },
            stop_after: None,
        })
    }

    fn field(&self, reference: Vector) -> impl Fn(Point) -> Result<Vector> + 'a {
        let (c, floor, sign) = (self.candidate, self.config.margin_floor, self.sign);
        move |p| signed_field(c, p, floor, sign, reference)
    }

    /// Advance by exactly `h`, handling any number of gluing crossings.
    pub fn advance(&mut self, h: f64) -> Result<()> {
        let mut remaining = h;
        let mut guard = 0;
        while remaining > 0.0 {
            guard += 1;
            if guard > 1000 {
                return Err(Error::param("step", "too many gluing crossings in one step"));
            }
            let (p, t, dir) = (self.state.position, self.state.time, self.state.direction);
            let f = self.field(dir);
            let trial = rk4_step(&f, p, remaining).map_err(|e| with_time(e, t))?;
            if (0.0..1.0).contains(&trial[2]) {
                let d = signed_field(self.candidate, trial, self.config.margin_floor, self.sign, dir)
                    .map_err(|e| with_time(e, t + remaining))?;
                self.state.position = [wrap_unit(trial[0]), wrap_unit(trial[1]), trial[2]];
                self.state.direction = d;
                self.state.time = t + remaining;
                return Ok(());
            }
            let (level, crossing) = if trial[2] >= 1.0 { (1.0, Crossing::Up) } else { (0.0, Crossing::Down) };
            let hs = locate_crossing(|s| rk4_step(&f, p, s), remaining, p[2], level)
                .map_err(|e| with_time(e, t))?;
            let hit = rk4_step(&f, p, hs).map_err(|e| with_time(e, t))?;
            let before = [hit[0], hit[1], level];
            let d_before = signed_field(self.candidate, before, self.config.margin_floor, self.sign, dir)
                .map_err(|e| with_time(e, t + hs))?;
            let (m, z) = match crossing {
                Crossing::Up => (self.inverse, 0.0),
                Crossing::Down => (self.candidate.monodromy, 1.0),
            };
            let xy = apply(&m, [hit[0], hit[1]]);
            let mut after = [wrap_unit(xy[0]), wrap_unit(xy[1]), z];
            let d_after = transform_direction(&m, d_before);
            // Land just inside the domain when coming down onto z = 1.
            if crossing == Crossing::Down {
                after[2] = 1.0 - f64::EPSILON;
            }
            self.state.events.push(GluingEvent { time: t + hs, crossing, before, after });
            self.state.position = after;
            self.state.direction = d_after;
            self.state.time = t + hs;
            remaining -= hs;
            if self.stop_after.is_some_and(|n| self.state.events.len() >= n) {
                break;
            }
        }
        Ok(())
    }
}

fn with_time(e: Error, time: f64) -> Error {
    match e {
        Error::DegeneratePlane { point, margin, floor, .. } => Error::DegeneratePlane { point, margin, floor, time },
        other => other,
    }
}

/// Integrate for `duration` with fixed step `step` (the last step is
/// shortened to land on `duration`).
pub fn integrate_orbit(c: &BiContactCandidate, start: Point, duration: f64, config: FlowConfig) -> Result<Trajectory> {
    let mut it = Integrator::new(c, start, config)?;
    let mut samples = vec![(0.0, it.state.position)];
    let n = (duration / config.step).ceil().max(0.0) as usize;
    for k in 0..n {
        let target = ((k + 1) as f64 * config.step).min(duration);
        let h = target - it.state.time;
        if h > 0.0 {
            it.advance(h)?;
        }
        samples.push((it.state.time, it.state.position));
    }
    Ok(Trajectory { samples, state: it.state })
}

/// Integrate until the orbit has crossed the gluing torus `returns` times,
/// stopping at the last crossing.
pub fn integrate_returns(
    c: &BiContactCandidate,
    start: Point,
    returns: usize,
    config: FlowConfig,
    max_time: f64,
) -> Result<Trajectory> {
    let mut it = Integrator::new(c, start, config)?;
    it.stop_after = Some(returns);
    let mut samples = vec![(0.0, it.state.position)];
    while it.state.events.len() < returns {
        if it.state.time > max_time {
            return Err(Error::NoReturn { max_time });
        }
        it.advance(config.step)?;
        samples.push((it.state.time, it.state.position));
    }
    Ok(Trajectory { samples, state: it.state })
}

/// Torus-aware difference `b − a` of two `(x, y)` positions.
fn torus_delta(a: [f64; 2], b: [f64; 2]) -> [f64; 2] {
    let d = |x: f64| x - x.round();
    [d(b[0] - a[0]), d(b[1] - a[1])]
}

/// Largest fixed step whose Richardson error estimate over `duration`
/// is below `target`, halving from `initial`.
pub fn choose_step(c: &BiContactCandidate, start: Point, duration: f64, target: f64, initial: f64) -> Result<f64> {
    let endpoint = |h: f64| -> Result<Point> {
        Ok(integrate_orbit(c, start, duration, FlowConfig::new(h))?.state.position)
    };
    let mut h = initial;
    let mut coarse = endpoint(h)?;
    for _ in 0..14 {
        let fine = endpoint(0.5 * h)?;
        let dxy = torus_delta([coarse[0], coarse[1]], [fine[0], fine[1]]);
        let dz = fine[2] - coarse[2];
        let dz = dz - dz.round();
        let est = (dxy[0].hypot(dxy[1]).hypot(dz)) / 15.0;
        if est < target {
            return Ok(h);
        }
        h *= 0.5;
        coarse = fine;
    }
    Ok(h)
}

/// Growth of the ratio between the most expanded and most contracted
/// directions of the linearized return maps.
///
/// With `L_n = log(σ_max/σ_min)` of the `n`-fold product, the plain
/// average `L_n/n` carries an `O(1/n)` bias from the angle between the
/// invariant directions (2.3% for `[[5,9],[1,2]]` after 10 returns). The
/// headline estimate discards the first half of the orbit as a transient:
/// `(L_n − L_⌊n/2⌋)/(n − ⌊n/2⌋)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SplittingEstimate {
    pub returns: usize,
    /// Flow time of the last return.
    pub horizon: f64,
    /// Estimate after each return; the last entry is the headline value.
    pub per_return: Vec<f64>,
    /// `L_n/n` after each return.
    pub naive: Vec<f64>,
    /// `L_n` after each return.
    pub log_ratio: Vec<f64>,
    pub step: f64,
    /// `"monodromy"` for suspensions, `"finite-difference"` otherwise.
    pub method: String,
}

impl SplittingEstimate {
    pub fn estimate(&self) -> f64 {
        *self.per_return.last().unwrap_or(&0.0)
    }

    /// Estimate per unit flow time.
    pub fn per_time(&self) -> f64 {
        if self.horizon > 0.0 {
            self.estimate() * self.returns as f64 / self.horizon
        } else {
            0.0
        }
    }
}

/// A product of 2×2 matrices kept as `exp(log_scale)·m` with `m` of unit
/// Frobenius norm, with `log|det|` tracked separately so that the smallest
/// singular value never has to be computed by subtraction.
struct ScaledProduct {
    m: [[f64; 2]; 2],
    log_scale: f64,
    log_det: f64,
}

impl ScaledProduct {
    fn identity() -> Self {
        Self { m: [[1.0, 0.0], [0.0, 1.0]], log_scale: 0.0, log_det: 0.0 }
    }

    fn push(&mut self, j: [[f64; 2]; 2]) {
        let m = self.m;
        let p = [
            [j[0][0] * m[0][0] + j[0][1] * m[1][0], j[0][0] * m[0][1] + j[0][1] * m[1][1]],
            [j[1][0] * m[0][0] + j[1][1] * m[1][0], j[1][0] * m[0][1] + j[1][1] * m[1][1]],
        ];
        let f = (p[0][0].powi(2) + p[0][1].powi(2) + p[1][0].powi(2) + p[1][1].powi(2)).sqrt();
        self.m = [[p[0][0] / f, p[0][1] / f], [p[1][0] / f, p[1][1] / f]];
        self.log_scale += f.ln();
        self.log_det += (j[0][0] * j[1][1] - j[0][1] * j[1][0]).abs().ln();
    }

    /// `log(σ_max/σ_min) = 2 log σ_max − log|det|`.
    fn log_ratio(&self) -> f64 {
        let m = self.m;
        let frob2 = m[0][0].powi(2) + m[0][1].powi(2) + m[1][0].powi(2) + m[1][1].powi(2);
        let det = m[0][0] * m[1][1] - m[0][1] * m[1][0];
        let disc = (frob2 * frob2 - 4.0 * det * det).max(0.0);
        let smax2 = 0.5 * (frob2 + disc.sqrt());
        (smax2.ln() + 2.0 * self.log_scale) - self.log_det
    }
}

/// Jacobian of the first-return map to the fibre `z = 0` at `(x, y)`, by
/// central differences of nearby orbits.
fn return_jacobian(c: &BiContactCandidate, xy: [f64; 2], config: FlowConfig, max_time: f64) -> Result<[[f64; 2]; 2]> {
    let land = |x: f64, y: f64| -> Result<[f64; 2]> {
        let tr = integrate_returns(c, [x, y, 0.0], 1, config, max_time)?;
        let ev = tr.state.events[0];
        Ok([ev.after[0], ev.after[1]])
    };
    let d = JACOBIAN_OFFSET;
    let base = land(xy[0], xy[1])?;
    let mut j = [[0.0; 2]; 2];
    for k in 0..2 {
        let (mut plus, mut minus) = (xy, xy);
        plus[k] += d;
        minus[k] -= d;
        let (p, m) = (land(plus[0], plus[1])?, land(minus[0], minus[1])?);
        let dp = torus_delta(base, p);
        let dm = torus_delta(base, m);
        j[0][k] = (dp[0] - dm[0]) / (2.0 * d);
        j[1][k] = (dp[1] - dm[1]) / (2.0 * d);
    }
    Ok(j)
}

/// Per-return splitting estimate along the orbit of `start`.
pub fn splitting_ratio(
    c: &BiContactCandidate,
    start: Point,
    returns: usize,
    config: FlowConfig,
    max_time: f64,
) -> Result<SplittingEstimate> {
    let tr = integrate_returns(c, start, returns, config, max_time)?;
    let events = &tr.state.events;
    let mut product = ScaledProduct::identity();
    let mut log_ratio: Vec<f64> = Vec::with_capacity(returns);
    let method;
    if c.suspension {
        method = "monodromy";
        for ev in events.iter().take(returns) {
            let m = match ev.crossing {
                Crossing::Up => c.monodromy.inverse(),
                Crossing::Down => c.monodromy,
            };
            product.push(m.as_f64());
            log_ratio.push(product.log_ratio());
        }
    } else {
        method = "finite-difference";
        // Returns are counted on z = 0; start from the first landing there.
        let mut xy = [start[0], start[1]];
        if start[2] != 0.0 {
            let first = integrate_returns(c, start, 1, config, max_time)?;
            let ev = first.state.events[0];
            xy = [ev.after[0], ev.after[1]];
        }
        for _ in 1..=returns {
            let j = return_jacobian(c, xy, config, max_time)?;
            product.push(j);
            log_ratio.push(product.log_ratio());
            let next = integrate_returns(c, [xy[0], xy[1], 0.0], 1, config, max_time)?;
            let ev = next.state.events[0];
            xy = [ev.after[0], ev.after[1]];
        }
    }
    let at = |k: usize| if k == 0 { 0.0 } else { log_ratio[k - 1] };
    let per_return = (1..=log_ratio.len()).map(|n| (at(n) - at(n / 2)) / (n - n / 2) as f64).collect();
    let naive = log_ratio.iter().enumerate().map(|(k, l)| l / (k + 1) as f64).collect();
    Ok(SplittingEstimate {
        returns,
        horizon: events.get(returns.saturating_sub(1)).map_or(tr.state.time, |e| e.time),
        per_return,
        naive,
        log_ratio,
        step: config.step,
        method: method.to_string(),
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct OrbitSample {
    pub t: f64,
    pub x: f64,
    pub y: f64,
    pub z: f64,
    pub margin: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MarginProfile {
    pub samples: Vec<OrbitSample>,
    pub min_margin: f64,
    pub min_time: f64,
}

/// Transversality margin sampled after every step of the orbit.
pub fn orbit_margin_profile(c: &BiContactCandidate, start: Point, duration: f64, config: FlowConfig) -> Result<MarginProfile> {
    let tr = integrate_orbit(c, start, duration, config)?;
    let mut samples = Vec::with_capacity(tr.samples.len());
    let (mut min_margin, mut min_time) = (f64::INFINITY, 0.0);
    for &(t, p) in &tr.samples {
        let margin = c.transversality_margin(p)?;
        if margin < min_margin {
            min_margin = margin;
            min_time = t;
        }
        samples.push(OrbitSample { t, x: p[0], y: p[1], z: p[2], margin });
    }
    Ok(MarginProfile { samples, min_margin, min_time })
}
