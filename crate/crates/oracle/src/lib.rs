//! Reference integrators used only by tests.
//!
//! Nothing here shares code with `nvpump-core`: the right-hand side is
//! written out as explicit level-to-level flows instead of going through a
//! generator matrix, and time stepping is a plain fixed-step RK4. The point
//! is to have a second, slow, obviously-correct route to every number the
//! matrix-exponential engine produces.

/// Transition rates in ns⁻¹, `kij` = rate from level i to level j.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Rates {
    pub k13: f64,
    pub k24: f64,
    pub k31: f64,
    pub k42: f64,
    pub k32: f64,
    pub k41: f64,
    pub k35: f64,
    pub k45: f64,
    pub k56: f64,
    pub k61: f64,
    pub k62: f64,
}

impl Rates {
    /// Room-temperature literature values.
    #[allow(clippy::approx_constant)]
    pub const TABLE: Rates = Rates {
        k13: 0.628,
        k24: 0.628,
        k31: 0.4396,
        k42: 0.4396,
        k32: 0.0,
        k41: 0.0,
        k35: 0.0314,
        k45: 0.1884,
        k56: 6.28,
        k61: 0.020724,
        k62: 0.013816,
    };
}

pub type State = [f64; 6];

pub const THERMAL: State = [1.0 / 3.0, 2.0 / 3.0, 0.0, 0.0, 0.0, 0.0];

/// dP/dt written flow by flow. Levels are 0-based here (level 1 is `p[0]`).
pub fn rhs(r: &Rates, laser_on: bool, p: &State) -> State {
    let mut d = [0.0; 6];
    let mut flow = |from: usize, to: usize, k: f64| {
        let f = k * p[from];
        d[from] -= f;
        d[to] += f;
    };
    if laser_on {
        flow(0, 2, r.k13);
        flow(1, 3, r.k24);
    }
    flow(2, 0, r.k31);
    flow(2, 1, r.k32);
    flow(2, 4, r.k35);
    flow(3, 1, r.k42);
    flow(3, 0, r.k41);
    flow(3, 4, r.k45);
    flow(4, 5, r.k56);
    flow(5, 0, r.k61);
    flow(5, 1, r.k62);
    d
}

fn axpy(a: f64, x: &State, y: &State) -> State {
    let mut out = *y;
    for i in 0..6 {
        out[i] += a * x[i];
    }
    out
}

fn rk4_step(r: &Rates, on: bool, p: &State, h: f64) -> State {
    let k1 = rhs(r, on, p);
    let k2 = rhs(r, on, &axpy(0.5 * h, &k1, p));
    let k3 = rhs(r, on, &axpy(0.5 * h, &k2, p));
    let k4 = rhs(r, on, &axpy(h, &k3, p));
    let mut out = *p;
    for i in 0..6 {
        out[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
    }
    out
}

/// Integrates for `duration` ns with step `h`; the last step is shortened so
/// the end time is hit exactly.
pub fn rk4(r: &Rates, laser_on: bool, p0: &State, duration: f64, h: f64) -> State {
    let mut p = *p0;
    let full = (duration / h).floor() as u64;
    for _ in 0..full {
        p = rk4_step(r, laser_on, &p, h);
    }
    let rest = duration - full as f64 * h;
    if rest > 1e-15 {
        p = rk4_step(r, laser_on, &p, rest);
    }
    p
}

/// States every `sample_every` RK4 steps, starting with `p0` at t = 0. The
/// final state at `duration` is always the last entry.
pub fn rk4_samples(
    r: &Rates,
    laser_on: bool,
    p0: &State,
    duration: f64,
    h: f64,
    sample_every: u64,
) -> Vec<(f64, State)> {
    let mut out = vec![(0.0, *p0)];
    let mut p = *p0;
    let full = (duration / h).floor() as u64;
    for step in 1..=full {
        p = rk4_step(r, laser_on, &p, h);
        if step % sample_every == 0 {
            out.push((step as f64 * h, p));
        }
    }
    let rest = duration - full as f64 * h;
    if rest > 1e-15 {
        p = rk4_step(r, laser_on, &p, rest);
        out.push((duration, p));
    } else if !full.is_multiple_of(sample_every) {
        out.push((duration, p));
    }
    out
}

/// Column-major 6×6 map obtained by integrating each basis vector.
pub type Map = [[f64; 6]; 6];

pub fn rk4_map(r: &Rates, laser_on: bool, duration: f64, h: f64) -> Map {
    let mut cols = [[0.0; 6]; 6];
    for (j, col) in cols.iter_mut().enumerate() {
        let mut e = [0.0; 6];
        e[j] = 1.0;
        *col = rk4(r, laser_on, &e, duration, h);
    }
    cols
}

/// `b` after `a`.
pub fn compose(b: &Map, a: &Map) -> Map {
    let mut out = [[0.0; 6]; 6];
    for (j, col) in out.iter_mut().enumerate() {
        *col = apply(b, &a[j]);
    }
    out
}

pub fn apply(m: &Map, p: &State) -> State {
    let mut out = [0.0; 6];
    for (j, col) in m.iter().enumerate() {
        for i in 0..6 {
            out[i] += col[i] * p[j];
        }
    }
    out
}

/// One pulse of `ts` followed by a dark wait of `tw`.
pub fn rk4_loop_map(r: &Rates, ts: f64, tw: f64, h: f64) -> Map {
    let on = rk4_map(r, true, ts, h);
    let off = rk4_map(r, false, tw, h);
    compose(&off, &on)
}

/// Composite trapezoid rule over (t, y) samples with arbitrary spacing.
pub fn trapezoid(samples: &[(f64, f64)]) -> f64 {
    samples
        .windows(2)
        .map(|w| 0.5 * (w[1].0 - w[0].0) * (w[0].1 + w[1].1))
        .sum()
}

pub fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}
