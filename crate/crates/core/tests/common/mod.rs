//! Direct-from-definition reference implementations on plain nested vectors.
#![allow(dead_code, clippy::needless_range_loop)]

use covshrink::rng::SimRng;
use rand::Rng;
use rand_distr::StandardNormal;

pub type Mat = Vec<Vec<f64>>;

pub fn omega(x: f64, tau: f64) -> f64 {
    if 2.0 * x <= tau {
        1.0
    } else if x <= tau {
        2.0 * (1.0 - x / tau)
    } else {
        0.0
    }
}

pub fn taper(s: &Mat, tau: f64) -> Mat {
    let d = s.len();
    (0..d)
        .map(|i| (0..d).map(|j| s[i][j] * omega(i.abs_diff(j) as f64, tau)).collect())
        .collect()
}

pub fn toeplitz(s: &Mat, tau: f64) -> Mat {
    let d = s.len();
    let mean_on = |m: usize| {
        let mut tot = 0.0;
        let mut cnt = 0.0;
        for i in 0..d {
            for j in 0..d {
                if i.abs_diff(j) == m {
                    tot += s[i][j];
                    cnt += 1.0;
                }
            }
        }
        tot / cnt
    };
    (0..d)
        .map(|i| {
            (0..d)
                .map(|j| {
                    let m = i.abs_diff(j);
                    mean_on(m) * omega(m as f64, tau)
                })
                .collect()
        })
        .collect()
}

pub fn combine(w: [f64; 3], a: &Mat, b: &Mat, c: &Mat) -> Mat {
    let d = a.len();
    (0..d)
        .map(|i| (0..d).map(|j| w[0] * a[i][j] + w[1] * b[i][j] + w[2] * c[i][j]).collect())
        .collect()
}

pub fn quad(v: &[f64], m: &Mat) -> f64 {
    let mut acc = 0.0;
    for i in 0..v.len() {
        for j in 0..v.len() {
            acc += v[i] * m[i][j] * v[j];
        }
    }
    acc
}

/// `(1/n) Σ_{t<k} xₜxₜᵀ`.
pub fn partial_cov(rows: &Mat, k: usize) -> Mat {
    let n = rows.len() as f64;
    let d = rows[0].len();
    let mut s = vec![vec![0.0; d]; d];
    for r in &rows[..k] {
        for i in 0..d {
            for j in 0..d {
                s[i][j] += r[i] * r[j] / n;
            }
        }
    }
    s
}

/// `√n maxₖ |vᵀ(Ŝʷ_k − (k/n)Ŝʷ_n)v|` by recomputing every partial estimator.
pub fn cusum_brute(rows: &Mat, v: &[f64], w: [f64; 3], tau_dag: f64, tau_dia: f64) -> f64 {
    let n = rows.len();
    let shrunk = |k| {
        let s = partial_cov(rows, k);
        combine(w, &s, &taper(&s, tau_dag), &toeplitz(&s, tau_dia))
    };
    let full = quad(v, &shrunk(n));
    let mut best: f64 = 0.0;
    for k in 1..=n {
        let val = quad(v, &shrunk(k)) - k as f64 / n as f64 * full;
        best = best.max(val.abs());
    }
    (n as f64).sqrt() * best
}

pub fn frob_sq_scaled(a: &Mat, b: &Mat) -> f64 {
    let d = a.len();
    let mut acc = 0.0;
    for i in 0..d {
        for j in 0..d {
            acc += (a[i][j] - b[i][j]).powi(2);
        }
    }
    acc / d as f64
}

/// Objective of the shrinkage QP written out in full.
pub fn objective(mse: f64, ed: f64, ez: f64, dc: f64, w2: f64, w3: f64) -> f64 {
    let w1 = 1.0 - w2 - w3;
    w1 * w1 * mse + w2 * w2 * ed + w3 * w3 * ez + 2.0 * w2 * w3 * dc
}

/// Minimum of the objective over a `step`-spaced lattice on the simplex.
pub fn grid_min(mse: f64, ed: f64, ez: f64, dc: f64, step: f64) -> f64 {
    let k = (1.0 / step).round() as usize;
    let mut best = f64::INFINITY;
    for a in 0..=k {
        for b in 0..=(k - a) {
            let w2 = a as f64 / k as f64;
            let w3 = b as f64 / k as f64;
            best = best.min(objective(mse, ed, ez, dc, w2, w3));
        }
    }
    best
}

/// Lower Cholesky factor of an SPD matrix.
pub fn cholesky(a: &Mat) -> Mat {
    let d = a.len();
    let mut l = vec![vec![0.0; d]; d];
    for i in 0..d {
        for j in 0..=i {
            let s: f64 = (0..j).map(|k| l[i][k] * l[j][k]).sum();
            if i == j {
                let p = a[i][i] - s;
                assert!(p > 0.0, "matrix not positive definite");
                l[i][i] = p.sqrt();
            } else {
                l[i][j] = (a[i][j] - s) / l[j][j];
            }
        }
    }
    l
}

/// `n` iid rows `L z` with `z ~ N(0, I)`.
pub fn gaussian_rows(n: usize, chol: &Mat, rng: &mut SimRng) -> Mat {
    let d = chol.len();
    (0..n)
        .map(|_| {
            let z: Vec<f64> = (0..d).map(|_| rng.sample(StandardNormal)).collect();
            (0..d).map(|i| (0..=i).map(|k| chol[i][k] * z[k]).sum()).collect()
        })
        .collect()
}

pub fn median(mut xs: Vec<f64>) -> f64 {
    xs.sort_by(f64::total_cmp);
    let m = xs.len() / 2;
    if xs.len() % 2 == 1 {
        xs[m]
    } else {
        0.5 * (xs[m - 1] + xs[m])
    }
}

pub fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Mean and standard error from non-overlapping batch means.
pub fn batch_mean_se(xs: &[f64], batches: usize) -> (f64, f64) {
    let len = xs.len() / batches;
    let means: Vec<f64> = (0..batches).map(|b| mean(&xs[b * len..(b + 1) * len])).collect();
    let m = mean(&means);
    let var = means.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (batches as f64 - 1.0);
    (m, (var / batches as f64).sqrt())
}

pub fn relative_close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * a.abs().max(b.abs()).max(f64::MIN_POSITIVE)
}
