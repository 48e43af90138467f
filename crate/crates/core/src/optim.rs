//! Grid scans and derivative-free maximization of the tripartite GHZ values
//! `L±(θ, φ, ψ)`.

use std::f64::consts::{PI, TAU};
use std::io::Write;

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::ineq::{tripartite_ghz_unchecked, MAX_VIOLATION, THETA_0, TIGHT_BOUND};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Branch {
    Plus,
    Minus,
}

impl Branch {
    pub fn value(self, theta: f64, phi: f64, psi: f64) -> f64 {
        let (lp, lm) = tripartite_ghz_unchecked(theta, phi, psi);
        match self {
            Branch::Plus => lp,
            Branch::Minus => lm,
        }
    }

    /// Pair angle of the maximum: `π − 2θ₀` (plus) or `2θ₀` (minus).
    pub fn optimal_theta(self) -> f64 {
        match self {
            Branch::Plus => PI - 2.0 * THETA_0,
            Branch::Minus => 2.0 * THETA_0,
        }
    }
}

/// `steps` evenly spaced points covering `[lo, hi]` inclusive.
pub fn linspace(lo: f64, hi: f64, steps: usize) -> Vec<f64> {
    let h = (hi - lo) / (steps - 1) as f64;
    (0..steps)
        .map(|j| if j + 1 == steps { hi } else { lo + h * j as f64 })
        .collect()
}

/// `L±` on a Cartesian `(θ, φ, ψ)` grid, stored θ-major.
#[derive(Debug, Clone, PartialEq)]
pub struct ScanGrid {
    pub thetas: Vec<f64>,
    pub phis: Vec<f64>,
    pub psis: Vec<f64>,
    pub l_plus: Vec<f64>,
    pub l_minus: Vec<f64>,
}

/// Header comment line of the CSV format.
pub const CSV_VERSION_LINE: &str = "# leggett-lab scan v1";
pub const CSV_HEADER: &str = "theta,phi,psi,L_plus,L_minus,margin_plus,margin_minus";

/// Default grid: θ ∈ [0, π] and φ, ψ ∈ [0, 2π].
pub const DEFAULT_STEPS: [usize; 3] = [181, 90, 90];

pub fn grid_scan(theta_steps: usize, phi_steps: usize, psi_steps: usize) -> Result<ScanGrid> {
    for (name, steps) in [("theta steps", theta_steps), ("phi steps", phi_steps), ("psi steps", psi_steps)] {
        if steps < 2 {
            return Err(Error::Capacity {
                what: name,
                value: steps,
                min: 2,
                max: usize::MAX,
            });
        }
    }
    Ok(scan_values(
        linspace(0.0, PI, theta_steps),
        linspace(0.0, TAU, phi_steps),
        linspace(0.0, TAU, psi_steps),
    ))
}

/// Scan over explicit axis values.
pub fn scan_values(thetas: Vec<f64>, phis: Vec<f64>, psis: Vec<f64>) -> ScanGrid {
    let rows: Vec<(Vec<f64>, Vec<f64>)> = thetas
        .par_iter()
        .map(|&t| {
            let mut lp = Vec::with_capacity(phis.len() * psis.len());
            let mut lm = Vec::with_capacity(phis.len() * psis.len());
            for &p in &phis {
                for &q in &psis {
                    let (a, b) = tripartite_ghz_unchecked(t, p, q);
                    lp.push(a);
                    lm.push(b);
                }
            }
            (lp, lm)
        })
        .collect();
    let (l_plus, l_minus) = rows.into_iter().fold((Vec::new(), Vec::new()), |(mut a, mut b), (lp, lm)| {
        a.extend(lp);
        b.extend(lm);
        (a, b)
    });
    ScanGrid {
        thetas,
        phis,
        psis,
        l_plus,
        l_minus,
    }
}

impl ScanGrid {
    pub fn len(&self) -> usize {
        self.l_plus.len()
    }

    pub fn is_empty(&self) -> bool {
        self.l_plus.is_empty()
    }

    pub fn index(&self, t: usize, p: usize, q: usize) -> usize {
        (t * self.phis.len() + p) * self.psis.len() + q
    }

    /// `(θ, φ, ψ)` of a flat index.
    pub fn point(&self, idx: usize) -> [f64; 3] {
        let q = idx % self.psis.len();
        let p = idx / self.psis.len() % self.phis.len();
        let t = idx / (self.psis.len() * self.phis.len());
        [self.thetas[t], self.phis[p], self.psis[q]]
    }

    pub fn values(&self, branch: Branch) -> &[f64] {
        match branch {
            Branch::Plus => &self.l_plus,
            Branch::Minus => &self.l_minus,
        }
    }

    /// Largest value in θ row `t`.
    pub fn row_max(&self, branch: Branch, t: usize) -> f64 {
        let row = self.phis.len() * self.psis.len();
        self.values(branch)[t * row..(t + 1) * row]
            .iter()
            .copied()
            .fold(f64::NEG_INFINITY, f64::max)
    }

    /// Index and value of the largest entry; the first index wins ties.
    pub fn argmax(&self, branch: Branch) -> (usize, f64) {
        self.values(branch)
            .iter()
            .enumerate()
            .fold((0, f64::NEG_INFINITY), |best, (i, &v)| if v > best.1 { (i, v) } else { best })
    }

    /// Indices of the `count` best cells, ties broken by index.
    pub fn best_cells(&self, branch: Branch, count: usize) -> Vec<usize> {
        let values = self.values(branch);
        let mut idx: Vec<usize> = (0..values.len()).collect();
        idx.sort_by(|&a, &b| values[b].total_cmp(&values[a]).then(a.cmp(&b)));
        idx.truncate(count);
        idx
    }

    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "{CSV_VERSION_LINE}")?;
        writeln!(out, "{CSV_HEADER}")?;
        for i in 0..self.len() {
            let [t, p, q] = self.point(i);
            let (a, b) = (self.l_plus[i], self.l_minus[i]);
            writeln!(out, "{t},{p},{q},{a},{b},{},{}", a - TIGHT_BOUND, b - TIGHT_BOUND)?;
        }
        Ok(())
    }
}

/// `ψ` on the maximizing locus for a given `φ` (at the optimal θ).
pub fn optimal_locus(branch: Branch, phi: f64) -> Result<f64> {
    if !(0.0..=TAU).contains(&phi) {
        return Err(Error::AngleRange {
            name: "phi",
            value: phi,
            min: 0.0,
            max: TAU,
        });
    }
    Ok(match branch {
        Branch::Plus if phi <= PI + 2.0 * THETA_0 => PI + 2.0 * THETA_0 - phi,
        Branch::Plus => 3.0 * PI + 2.0 * THETA_0 - phi,
        Branch::Minus if phi <= TAU - 2.0 * THETA_0 => TAU - 2.0 * THETA_0 - phi,
        Branch::Minus => 4.0 * PI - 2.0 * THETA_0 - phi,
    })
}

/// Distance between two angles on the circle.
pub fn circular_distance(a: f64, b: f64) -> f64 {
    let d = (a - b).rem_euclid(TAU);
    d.min(TAU - d)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OptimizeOptions {
    /// Convergence threshold on the simplex value spread.
    pub tolerance: f64,
    pub max_iterations: usize,
    /// Coordinates `(θ, φ, ψ)` held fixed.
    pub fixed: [Option<f64>; 3],
    /// Number of best grid cells used as starts.
    pub grid_starts: usize,
    pub grid_steps: [usize; 3],
    /// Additional explicit starts.
    pub starts: Vec<[f64; 3]>,
}

impl Default for OptimizeOptions {
    fn default() -> Self {
        OptimizeOptions {
            tolerance: 1e-9,
            max_iterations: 500,
            fixed: [None; 3],
            grid_starts: 8,
            grid_steps: DEFAULT_STEPS,
            starts: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OptimumReport {
    pub branch: Branch,
    pub theta: f64,
    pub phi: f64,
    pub psi: f64,
    pub value: f64,
    /// Circular distance of `ψ*` from `optimal_locus(branch, φ*)`.
    pub locus_residual: f64,
    pub converged: bool,
    pub starts: usize,
    pub iterations: usize,
}

impl OptimumReport {
    pub fn warning(&self) -> Option<&'static str> {
        (!self.converged).then_some("maximum iterations reached before convergence")
    }

    pub fn deviation_from_max(&self) -> f64 {
        (self.value - MAX_VIOLATION).abs()
    }
}

/// Keeps `θ` in `[0, π]` and wraps the azimuthal angles into `[0, 2π)`.
fn to_domain(x: [f64; 3]) -> [f64; 3] {
    [x[0].clamp(0.0, PI), x[1].rem_euclid(TAU), x[2].rem_euclid(TAU)]
}

struct Objective {
    branch: Branch,
    fixed: [Option<f64>; 3],
    free: Vec<usize>,
}

impl Objective {
    fn embed(&self, y: &[f64]) -> [f64; 3] {
        let mut x = [0.0; 3];
        let mut it = y.iter();
        for (c, slot) in x.iter_mut().enumerate() {
            *slot = match self.fixed[c] {
                Some(v) => v,
                None => *it.next().expect("one free value per free coordinate"),
            };
        }
        to_domain(x)
    }

    fn project(&self, x: [f64; 3]) -> Vec<f64> {
        self.free.iter().map(|&c| x[c]).collect()
    }

    fn value(&self, y: &[f64]) -> f64 {
        let [t, p, q] = self.embed(y);
        self.branch.value(t, p, q)
    }
}

struct LocalResult {
    point: Vec<f64>,
    value: f64,
    iterations: usize,
    converged: bool,
}

/// Nelder–Mead ascent followed by a shrinking compass search.
fn local_maximize(obj: &Objective, start: Vec<f64>, options: &OptimizeOptions) -> LocalResult {
    let d = start.len();
    if d == 0 {
        return LocalResult {
            value: obj.value(&start),
            point: start,
            iterations: 0,
            converged: true,
        };
    }
    let f = |y: &[f64]| -obj.value(y);
    let mut simplex: Vec<(Vec<f64>, f64)> = vec![(start.clone(), f(&start))];
    for c in 0..d {
        let mut y = start.clone();
        y[c] += 0.05;
        let v = f(&y);
        simplex.push((y, v));
    }
    let mut iterations = 0;
    let mut converged = false;
    while iterations < options.max_iterations {
        simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
        let spread = simplex[d].1 - simplex[0].1;
        let size = simplex[1..]
            .iter()
            .map(|(y, _)| y.iter().zip(&simplex[0].0).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max))
            .fold(0.0, f64::max);
        if spread <= options.tolerance * 1e-3 && size <= 1e-9 {
            converged = true;
            break;
        }
        iterations += 1;
        let centroid: Vec<f64> = (0..d)
            .map(|c| simplex[..d].iter().map(|(y, _)| y[c]).sum::<f64>() / d as f64)
            .collect();
        let toward = |t: f64| -> Vec<f64> {
            centroid
                .iter()
                .zip(&simplex[d].0)
                .map(|(c, w)| c + t * (w - c))
                .collect()
        };
        let reflected = toward(-1.0);
        let fr = f(&reflected);
        if fr < simplex[0].1 {
            let expanded = toward(-2.0);
            let fe = f(&expanded);
            simplex[d] = if fe < fr { (expanded, fe) } else { (reflected, fr) };
        } else if fr < simplex[d - 1].1 {
            simplex[d] = (reflected, fr);
        } else {
            let contracted = if fr < simplex[d].1 { toward(-0.5) } else { toward(0.5) };
            let fc = f(&contracted);
            if fc < fr.min(simplex[d].1) {
                simplex[d] = (contracted, fc);
            } else {
                let best = simplex[0].0.clone();
                for (y, v) in simplex[1..].iter_mut() {
                    for (a, b) in y.iter_mut().zip(&best) {
                        *a = b + 0.5 * (*a - b);
                    }
                    *v = f(y);
                }
            }
        }
    }
    simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
    let (mut best, mut fbest) = simplex.swap_remove(0);

    // compass polish along coordinate axes and pair diagonals
    let mut dirs: Vec<Vec<f64>> = Vec::new();
    for a in 0..d {
        let mut e = vec![0.0; d];
        e[a] = 1.0;
        dirs.push(e);
        for b in a + 1..d {
            for sign in [1.0, -1.0] {
                let mut e = vec![0.0; d];
                e[a] = std::f64::consts::FRAC_1_SQRT_2;
                e[b] = sign * std::f64::consts::FRAC_1_SQRT_2;
                dirs.push(e);
            }
        }
    }
    let mut step = 1e-3;
    while step > 1e-13 {
        let mut improved = false;
        for e in &dirs {
            for sign in [1.0, -1.0] {
                let y: Vec<f64> = best.iter().zip(e).map(|(b, v)| b + sign * step * v).collect();
                let v = f(&y);
                if v < fbest {
                    best = y;
                    fbest = v;
                    improved = true;
                }
            }
        }
        if !improved {
            step *= 0.5;
        }
    }
    LocalResult {
        point: best,
        value: -fbest,
        iterations,
        converged,
    }
}

/// Multi-start maximization of `L±` over the free coordinates.
pub fn maximize_violation(branch: Branch, options: &OptimizeOptions) -> Result<OptimumReport> {
    if options.tolerance.is_nan() || options.tolerance <= 0.0 {
        return Err(Error::Invalid(format!("tolerance must be positive, got {}", options.tolerance)));
    }
    if let Some(t) = options.fixed[0] {
        if !(0.0..=PI).contains(&t) {
            return Err(Error::AngleRange {
                name: "theta",
                value: t,
                min: 0.0,
                max: PI,
            });
        }
    }
    let obj = Objective {
        branch,
        fixed: options.fixed,
        free: (0..3).filter(|&c| options.fixed[c].is_none()).collect(),
    };

    let mut starts: Vec<Vec<f64>> = options.starts.iter().map(|&s| obj.project(to_domain(s))).collect();
    if options.grid_starts > 0 {
        let axis = |c: usize, lo: f64, hi: f64| match options.fixed[c] {
            Some(v) => vec![v],
            None => linspace(lo, hi, options.grid_steps[c].max(2)),
        };
        let grid = scan_values(axis(0, 0.0, PI), axis(1, 0.0, TAU), axis(2, 0.0, TAU));
        starts.extend(
            grid.best_cells(branch, options.grid_starts)
                .into_iter()
                .map(|i| obj.project(grid.point(i))),
        );
    }
    if starts.is_empty() {
        return Err(Error::Invalid("no starting points".into()));
    }

    let results: Vec<LocalResult> = starts
        .par_iter()
        .map(|s| local_maximize(&obj, s.clone(), options))
        .collect();
    let iterations = results.iter().map(|r| r.iterations).sum();
    let converged = results.iter().all(|r| r.converged);
    let best = results
        .into_iter()
        .reduce(|a, b| if b.value > a.value { b } else { a })
        .expect("at least one start");
    let [theta, phi, psi] = obj.embed(&best.point);
    Ok(OptimumReport {
        branch,
        theta,
        phi,
        psi,
        value: best.value,
        locus_residual: circular_distance(psi, optimal_locus(branch, phi)?),
        converged,
        starts: starts.len(),
        iterations,
    })
}
