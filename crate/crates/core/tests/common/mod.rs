#![allow(dead_code)]

use bt_ident::pairdata::ComparisonData;
use nalgebra::{DMatrix, DVector};
use rand::Rng;

/// Random counts plus a directed cycle `0 → 1 → … → n−1 → 0`, so the win
/// graph is always strongly connected.
pub fn random_connected<R: Rng>(rng: &mut R, n: usize, max_count: u64, density: f64) -> ComparisonData {
    let mut wins = vec![vec![0u64; n]; n];
    for (i, row) in wins.iter_mut().enumerate() {
        for (j, w) in row.iter_mut().enumerate() {
            if i != j && rng.random::<f64>() < density {
                *w = rng.random_range(1..=max_count);
            }
        }
    }
    for i in 0..n {
        let j = (i + 1) % n;
        if wins[i][j] == 0 {
            wins[i][j] = rng.random_range(1..=max_count);
        }
    }
    ComparisonData::from_unlabelled(wins).unwrap()
}

/// Random counts with no connectivity guarantee (at least one comparison).
pub fn random_sparse<R: Rng>(rng: &mut R, n: usize, density: f64) -> ComparisonData {
    let mut wins = vec![vec![0u64; n]; n];
    for (i, row) in wins.iter_mut().enumerate() {
        for (j, w) in row.iter_mut().enumerate() {
            if i != j && rng.random::<f64>() < density {
                *w = rng.random_range(1..=3);
            }
        }
    }
    wins[0][1] += 1;
    ComparisonData::from_unlabelled(wins).unwrap()
}

/// `α` with entries in `[−1, 2)` and `|1ᵀα| ≥ 0.5`.
pub fn random_alpha<R: Rng>(rng: &mut R, n: usize) -> DVector<f64> {
    loop {
        let a: DVector<f64> = DVector::from_fn(n, |_, _| rng.random_range(-1.0..2.0));
        if a.sum().abs() >= 0.5 {
            return a;
        }
    }
}

pub fn random_beta<R: Rng>(rng: &mut R, n: usize, scale: f64) -> DVector<f64> {
    DVector::from_fn(n, |_, _| rng.random_range(-scale..scale))
}

/// Nonempty proper subsets `S` (bitmasks) such that nobody outside `S` ever
/// beat anybody inside: the partitions violating the connectivity condition.
pub fn violating_bipartitions(data: &ComparisonData) -> Vec<u32> {
    let n = data.n();
    (1u32..(1 << n) - 1)
        .filter(|&mask| {
            let inside = |v: usize| mask & (1 << v) != 0;
            !(0..n).any(|a| !inside(a) && (0..n).any(|b| inside(b) && data.wins(a, b) > 0))
        })
        .collect()
}

/// Central finite-difference gradient of `f`.
pub fn fd_gradient(f: impl Fn(&DVector<f64>) -> f64, x: &DVector<f64>, h: f64) -> DVector<f64> {
    DVector::from_fn(x.len(), |k, _| {
        let mut up = x.clone();
        let mut down = x.clone();
        up[k] += h;
        down[k] -= h;
        (f(&up) - f(&down)) / (2.0 * h)
    })
}

/// Central finite-difference Jacobian of a vector field `g`.
pub fn fd_jacobian(g: impl Fn(&DVector<f64>) -> DVector<f64>, x: &DVector<f64>, h: f64) -> DMatrix<f64> {
    let n = x.len();
    let mut out = DMatrix::zeros(n, n);
    for k in 0..n {
        let mut up = x.clone();
        let mut down = x.clone();
        up[k] += h;
        down[k] -= h;
        let col = (g(&up) - g(&down)) / (2.0 * h);
        out.set_column(k, &col);
    }
    out
}

pub fn rel_err(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    (a - b).amax() / b.amax().max(1.0)
}

pub fn rel_err_vec(a: &DVector<f64>, b: &DVector<f64>) -> f64 {
    (a - b).amax() / b.amax().max(1.0)
}

/// Independent oracle for the 3-object sum-constrained MLE: coarse grid over
/// `(β₁, β₂)` with `β₃ = −β₁ − β₂`, a step-1e-3 grid around the best cell,
/// then compass search down to 1e-9.
pub fn grid_oracle_three(data: &ComparisonData) -> DVector<f64> {
    let ll = |b1: f64, b2: f64| -> f64 {
        let b = [b1, b2, -b1 - b2];
        let mut s = 0.0;
        for i in 0..3 {
            for j in 0..3 {
                if i != j {
                    let p = 1.0 / (1.0 + (-(b[i] - b[j])).exp());
                    s += data.wins(i, j) as f64 * p.ln();
                }
            }
        }
        s
    };
    let search = |center: (f64, f64), half: f64, step: f64| -> (f64, f64) {
        let steps = (2.0 * half / step).round() as i64;
        let mut best = (f64::NEG_INFINITY, center);
        for a in 0..=steps {
            for b in 0..=steps {
                let p = (center.0 - half + a as f64 * step, center.1 - half + b as f64 * step);
                let v = ll(p.0, p.1);
                if v > best.0 {
                    best = (v, p);
                }
            }
        }
        best.1
    };
    let coarse = search((0.0, 0.0), 5.0, 0.02);
    let mut p = search(coarse, 0.03, 1e-3);
    let mut step = 1e-3;
    let mut best = ll(p.0, p.1);
    while step > 1e-9 {
        let mut moved = false;
        for (da, db) in [(1.0, 0.0), (-1.0, 0.0), (0.0, 1.0), (0.0, -1.0)] {
            let q = (p.0 + da * step, p.1 + db * step);
            let v = ll(q.0, q.1);
            if v > best {
                best = v;
                p = q;
                moved = true;
            }
        }
        if !moved {
            step *= 0.5;
        }
    }
    DVector::from_vec(vec![p.0, p.1, -p.0 - p.1])
}
