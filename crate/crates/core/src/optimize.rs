//! Derivative-free minimization: box-constrained Nelder-Mead with
//! quasi-random multi-start and an exhaustive coarse-grid floor.

use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

/// Settings shared by every multi-start search in the crate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SearchConfig {
    /// Total number of Nelder-Mead starts (named starts first, then quasi-random box points).
    pub restarts: usize,
    /// Evaluation budget per start.
    pub max_evals: usize,
    /// Simplex diameter at which a start is considered converged.
    pub tolerance: f64,
    /// Points per axis of the coarse grid; 0 disables the grid.
    pub grid_points: usize,
    pub seed: u64,
}

impl Default for SearchConfig {
    fn default() -> Self {
        SearchConfig {
            restarts: 16,
            max_evals: 2000,
            tolerance: 1e-6,
            grid_points: 8,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Bounds<const N: usize> {
    pub lower: [f64; N],
    pub upper: [f64; N],
}

impl<const N: usize> Bounds<N> {
    pub fn uniform(lower: f64, upper: f64) -> Self {
        Bounds {
            lower: [lower; N],
            upper: [upper; N],
        }
    }

    #[inline]
    pub fn project(&self, x: &mut [f64; N]) {
        for i in 0..N {
            x[i] = x[i].max(self.lower[i]).min(self.upper[i]);
        }
    }

    pub fn contains(&self, x: &[f64; N]) -> bool {
        (0..N).all(|i| x[i] >= self.lower[i] && x[i] <= self.upper[i])
    }

    /// Map a point of the unit cube onto the box.
    pub fn from_unit(&self, u: &[f64; N]) -> [f64; N] {
        core::array::from_fn(|i| self.lower[i] + u[i] * (self.upper[i] - self.lower[i]))
    }

    pub fn center(&self) -> [f64; N] {
        self.from_unit(&[0.5; N])
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Minimum<const N: usize> {
    pub x: [f64; N],
    pub value: f64,
    pub evals: usize,
    pub converged: bool,
}

#[inline]
fn finite_or_inf(v: f64) -> f64 {
    if v.is_finite() {
        v
    } else {
        f64::INFINITY
    }
}

/// Nelder-Mead minimization with every trial point projected into `bounds`.
pub fn nelder_mead<const N: usize, F>(
    f: &mut F,
    start: [f64; N],
    step: f64,
    bounds: &Bounds<N>,
    tolerance: f64,
    max_evals: usize,
) -> Minimum<N>
where
    F: FnMut(&[f64; N]) -> f64,
{
    let mut evals = 0usize;
    let mut eval = |x: &[f64; N], evals: &mut usize| {
        *evals += 1;
        finite_or_inf(f(x))
    };

    let mut x0 = start;
    bounds.project(&mut x0);
    let mut simplex: Vec<([f64; N], f64)> = Vec::with_capacity(N + 1);
    let v0 = eval(&x0, &mut evals);
    simplex.push((x0, v0));
    for i in 0..N {
        let mut x = x0;
        x[i] += step;
        bounds.project(&mut x);
        if (x[i] - x0[i]).abs() < 0.5 * step {
            x[i] = x0[i] - step;
            bounds.project(&mut x);
        }
        let v = eval(&x, &mut evals);
        simplex.push((x, v));
    }

    let mut converged = false;
    loop {
        simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
        let best = simplex[0].0;
        let diameter = simplex[1..]
            .iter()
            .map(|(x, _)| {
                (0..N)
                    .map(|i| (x[i] - best[i]) * (x[i] - best[i]))
                    .sum::<f64>()
                    .sqrt()
            })
            .fold(0.0, f64::max);
        if diameter < tolerance {
            converged = true;
            break;
        }
        if evals >= max_evals {
            break;
        }

        let worst = simplex[N];
        let mut centroid = [0.0; N];
        for (x, _) in &simplex[..N] {
            for i in 0..N {
                centroid[i] += x[i] / N as f64;
            }
        }
        let along = |t: f64| {
            let mut p: [f64; N] = core::array::from_fn(|i| centroid[i] + t * (worst.0[i] - centroid[i]));
            bounds.project(&mut p);
            p
        };

        let xr = along(-1.0);
        let vr = eval(&xr, &mut evals);
        if vr < simplex[0].1 {
            let xe = along(-2.0);
            let ve = eval(&xe, &mut evals);
            simplex[N] = if ve < vr { (xe, ve) } else { (xr, vr) };
            continue;
        }
        if vr < simplex[N - 1].1 {
            simplex[N] = (xr, vr);
            continue;
        }
        let (xc, vc, accept) = if vr < worst.1 {
            let xc = along(-0.5);
            let vc = eval(&xc, &mut evals);
            (xc, vc, vc <= vr)
        } else {
            let xc = along(0.5);
            let vc = eval(&xc, &mut evals);
            (xc, vc, vc < worst.1)
        };
        if accept {
            simplex[N] = (xc, vc);
            continue;
        }
        // shrink toward the best vertex
        for j in 1..=N {
            let x: [f64; N] = core::array::from_fn(|i| best[i] + 0.5 * (simplex[j].0[i] - best[i]));
            let v = eval(&x, &mut evals);
            simplex[j] = (x, v);
        }
    }

    let (x, value) = simplex[0];
    Minimum {
        x,
        value,
        evals,
        converged,
    }
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed for stream `index` derived from `seed`.
pub fn derive_seed(seed: u64, index: u64) -> u64 {
    seed ^ splitmix64(index)
}

const PRIMES: [u64; 8] = [2, 3, 5, 7, 11, 13, 17, 19];

fn radical_inverse(mut i: u64, base: u64) -> f64 {
    let inv = 1.0 / base as f64;
    let mut f = inv;
    let mut r = 0.0;
    while i > 0 {
        r += (i % base) as f64 * f;
        i /= base;
        f *= inv;
    }
    r
}

/// Rotated Halton points in the unit cube; the rotation is fixed by `seed`.
pub fn quasi_random_unit<const N: usize>(count: usize, seed: u64) -> Vec<[f64; N]> {
    assert!(N <= PRIMES.len(), "Halton sequence supports up to 8 dimensions");
    let shift: [f64; N] =
        core::array::from_fn(|d| (splitmix64(seed ^ (d as u64 + 1)) >> 11) as f64 / (1u64 << 53) as f64);
    (1..=count as u64)
        .map(|i| {
            core::array::from_fn(|d| {
                let v = radical_inverse(i, PRIMES[d]) + shift[d];
                v - v.floor()
            })
        })
        .collect()
}

/// Cell centers of a regular `per_axis^N` grid over the box.
pub fn grid_points<const N: usize>(bounds: &Bounds<N>, per_axis: usize) -> impl Iterator<Item = [f64; N]> + '_ {
    let total = per_axis.pow(N as u32);
    (0..total).map(move |mut idx| {
        let mut u = [0.0; N];
        for slot in u.iter_mut() {
            *slot = ((idx % per_axis) as f64 + 0.5) / per_axis as f64;
            idx /= per_axis;
        }
        bounds.from_unit(&u)
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MultiStartMinimum<const N: usize> {
    pub x: [f64; N],
    pub value: f64,
    pub starts: usize,
    /// Whether the winning start reached the simplex tolerance.
    pub converged: bool,
}

/// Minimize `f` over `bounds`.
///
/// Runs Nelder-Mead from each of `named_starts`, then from quasi-random box
/// points until `config.restarts` starts have been used, then once more from
/// the best coarse-grid point. The returned value is never worse than the
/// best grid point. Ties keep the first point found.
pub fn multi_start_minimize<const N: usize, F>(
    f: &mut F,
    bounds: &Bounds<N>,
    named_starts: &[[f64; N]],
    config: &SearchConfig,
) -> MultiStartMinimum<N>
where
    F: FnMut(&[f64; N]) -> f64,
{
    let mut best = MultiStartMinimum {
        x: bounds.center(),
        value: f64::INFINITY,
        starts: 0,
        converged: false,
    };

    let mut grid_best: Option<([f64; N], f64)> = None;
    if config.grid_points > 0 {
        for x in grid_points(bounds, config.grid_points) {
            let v = finite_or_inf(f(&x));
            if grid_best.map_or(true, |(_, bv)| v < bv) {
                grid_best = Some((x, v));
            }
        }
    }

    let n_random = config.restarts.saturating_sub(named_starts.len());
    let random = quasi_random_unit::<N>(n_random, config.seed);
    let mut starts: Vec<[f64; N]> = named_starts
        .iter()
        .copied()
        .take(config.restarts.max(named_starts.len()))
        .collect();
    starts.extend(random.iter().map(|u| bounds.from_unit(u)));
    if let Some((x, _)) = grid_best {
        starts.push(x);
    }

    let step = (0..N)
        .map(|i| bounds.upper[i] - bounds.lower[i])
        .fold(f64::INFINITY, f64::min)
        * 0.1;
    for start in starts {
        let m = nelder_mead(f, start, step, bounds, config.tolerance, config.max_evals);
        best.starts += 1;
        if m.value < best.value {
            best.x = m.x;
            best.value = m.value;
            best.converged = m.converged;
        }
    }
    if let Some((x, v)) = grid_best {
        if v < best.value {
            best.x = x;
            best.value = v;
            best.converged = false;
        }
    }
    best
}
