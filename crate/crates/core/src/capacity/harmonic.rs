//! Direct solve of the five-point discrete Laplace system (the s = 2 case),
//! independent of the nonlinear minimizer.

use crate::error::{Error, Result};
use crate::geometry::Condenser;

/// Capacity for s = 2 from a banded Cholesky factorization of the
/// five-point system; energy h^{N−2} Σ_edges (f_i − f_j)².
pub fn harmonic_capacity(c: &Condenser) -> Result<f64> {
    let lat = c.lattice();
    let free = c.free_nodes();
    let n = free.len();
    let values: Vec<f64> = c.k_mask().iter().map(|&k| if k { 1.0 } else { 0.0 }).collect();
    if c.k_count() == 0 {
        return Ok(0.0);
    }
    let mut slot = vec![usize::MAX; lat.len()];
    for (k, &node) in free.iter().enumerate() {
        slot[node] = k;
    }
    let bw = lat.shape()[0];
    let width = bw + 1;
    // Lower band storage: band[i * width + (i - j)] holds A[i][j] for j <= i.
    let mut band = vec![0.0; n * width];
    let mut rhs = vec![0.0; n];
    for (i, &node) in free.iter().enumerate() {
        band[i * width] = (2 * lat.dim()) as f64;
        for nb in lat.axis_neighbors(node) {
            let nb = nb.ok_or_else(|| Error::InvalidCondenser("free node on the lattice edge".into()))?;
            match slot[nb] {
                usize::MAX => rhs[i] += values[nb],
                j if j < i => {
                    if i - j > bw {
                        return Err(Error::InvalidCondenser("bandwidth exceeded".into()));
                    }
                    band[i * width + (i - j)] = -1.0;
                }
                _ => {}
            }
        }
    }
    cholesky_banded(&mut band, n, bw)?;
    let x = solve_banded(&band, n, bw, rhs);
    let mut f = values;
    for (k, &node) in free.iter().enumerate() {
        f[node] = x[k];
    }
    let mut sum = 0.0;
    for i in 0..lat.len() {
        for nb in lat.axis_neighbors(i).flatten().filter(|&nb| nb > i) {
            let d = f[i] - f[nb];
            sum += d * d;
        }
    }
    Ok(sum * lat.h().powi(lat.dim() as i32 - 2))
}

fn cholesky_banded(a: &mut [f64], n: usize, bw: usize) -> Result<()> {
    let width = bw + 1;
    for i in 0..n {
        let j0 = i.saturating_sub(bw);
        for j in j0..=i {
            let mut s = a[i * width + (i - j)];
            let k0 = j0.max(j.saturating_sub(bw));
            for k in k0..j {
                s -= a[i * width + (i - k)] * a[j * width + (j - k)];
            }
            if j == i {
                if !(s > 0.0) {
                    return Err(Error::InvalidCondenser("five-point system not positive definite".into()));
                }
                a[i * width] = s.sqrt();
            } else {
                a[i * width + (i - j)] = s / a[j * width];
            }
        }
    }
    Ok(())
}

fn solve_banded(l: &[f64], n: usize, bw: usize, mut b: Vec<f64>) -> Vec<f64> {
    let width = bw + 1;
    for i in 0..n {
        let mut s = b[i];
        for k in i.saturating_sub(bw)..i {
            s -= l[i * width + (i - k)] * b[k];
        }
        b[i] = s / l[i * width];
    }
    for i in (0..n).rev() {
        let mut s = b[i];
        for k in i + 1..n.min(i + bw + 1) {
            s -= l[k * width + (k - i)] * b[k];
        }
        b[i] = s / l[i * width];
    }
    b
}
