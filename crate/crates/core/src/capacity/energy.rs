//! Discrete regularized s-Dirichlet energy on a condenser lattice and its
//! minimizers.
//!
//! Each 2-D cell is split along both diagonals; the four resulting P1
//! triangles (weight h²/4 each) have gradients pairing one horizontal cell
//! edge with one vertical cell edge. For s = 2 the sum collapses to the
//! five-point edge energy Σ (f_i − f_j)². In 1-D a cell is a single edge.

use crate::geometry::{Condenser, Lattice};

const FIXED: usize = usize::MAX;

/// Edge pairs (x-edge, y-edge) per triangle, as cell-corner slots
/// [c00, c10, c01, c11].
const TRIANGLES_2D: [((usize, usize), (usize, usize)); 4] =
    [((0, 1), (0, 2)), ((0, 1), (1, 3)), ((2, 3), (0, 2)), ((2, 3), (1, 3))];

pub(crate) struct Problem {
    dim: usize,
    h: f64,
    s: f64,
    eps2: f64,
    eps_s: f64,
    weight: f64,
    /// Corner node indices of every cell touching a free node.
    cells: Vec<[usize; 4]>,
    pub(crate) free: Vec<usize>,
    slot: Vec<usize>,
    /// Cells incident to each free node (indices into `cells`).
    incident: Vec<Vec<usize>>,
}

/// Triangle state cached for Hessian products: (x, y, Φ', Φ'').
type TriState = [f64; 4];

impl Problem {
    pub(crate) fn new(c: &Condenser, s: f64) -> Self {
        let lat: &Lattice = c.lattice();
        let h = lat.h();
        let dim = lat.dim();
        let free = c.free_nodes();
        let mut slot = vec![FIXED; lat.len()];
        for (k, &n) in free.iter().enumerate() {
            slot[n] = k;
        }
        let mut cells = Vec::new();
        let mut incident = vec![Vec::new(); free.len()];
        for cell in lat.cells() {
            let corners = lat.cell_corners(cell);
            let used = if dim == 1 { &corners[..2] } else { &corners[..] };
            if used.iter().any(|&n| slot[n] != FIXED) {
                let id = cells.len();
                for &n in used {
                    if slot[n] != FIXED && !incident[slot[n]].contains(&id) {
                        incident[slot[n]].push(id);
                    }
                }
                cells.push(corners);
            }
        }
        let eps = 1e-8 * h;
        let weight = if dim == 1 { h } else { 0.25 * h * h };
        Self { dim, h, s, eps2: eps * eps, eps_s: eps.powf(s), weight, cells, free, slot, incident }
    }

    pub(crate) fn n_free(&self) -> usize {
        self.free.len()
    }

    #[inline]
    fn phi(&self, z: f64) -> f64 {
        (z + self.eps2).powf(0.5 * self.s) - self.eps_s
    }

    #[inline]
    fn dphi(&self, z: f64) -> (f64, f64) {
        let half = 0.5 * self.s;
        let base = z + self.eps2;
        let d1 = half * base.powf(half - 1.0);
        let d2 = half * (half - 1.0) * base.powf(half - 2.0);
        (d1, d2)
    }

    /// Visit every triangle of a cell: (x-edge nodes, y-edge nodes, x, y).
    #[inline]
    fn for_triangles(&self, corners: &[usize; 4], f: &[f64], mut visit: impl FnMut((usize, usize), Option<(usize, usize)>, f64, f64)) {
        let inv_h = 1.0 / self.h;
        if self.dim == 1 {
            let (a, b) = (corners[0], corners[1]);
            visit((a, b), None, (f[b] - f[a]) * inv_h, 0.0);
            return;
        }
        for &((xa, xb), (ya, yb)) in &TRIANGLES_2D {
            let ex = (corners[xa], corners[xb]);
            let ey = (corners[ya], corners[yb]);
            let x = (f[ex.1] - f[ex.0]) * inv_h;
            let y = (f[ey.1] - f[ey.0]) * inv_h;
            visit(ex, Some(ey), x, y);
        }
    }

    pub(crate) fn energy(&self, f: &[f64]) -> f64 {
        let mut e = 0.0;
        for corners in &self.cells {
            self.for_triangles(corners, f, |_, _, x, y| e += self.phi(x * x + y * y));
        }
        e * self.weight
    }

    /// Gradient with respect to the free values.
    pub(crate) fn gradient(&self, f: &[f64], g: &mut [f64]) {
        g.iter_mut().for_each(|v| *v = 0.0);
        let scale = self.weight / self.h;
        for corners in &self.cells {
            self.for_triangles(corners, f, |ex, ey, x, y| {
                let (d1, _) = self.dphi(x * x + y * y);
                let gx = 2.0 * d1 * x * scale;
                self.scatter(g, ex, gx);
                if let Some(ey) = ey {
                    self.scatter(g, ey, 2.0 * d1 * y * scale);
                }
            });
        }
    }

    #[inline]
    fn scatter(&self, g: &mut [f64], (a, b): (usize, usize), v: f64) {
        if self.slot[b] != FIXED {
            g[self.slot[b]] += v;
        }
        if self.slot[a] != FIXED {
            g[self.slot[a]] -= v;
        }
    }

    #[inline]
    fn edge_diff(&self, v: &[f64], (a, b): (usize, usize)) -> f64 {
        let vb = if self.slot[b] != FIXED { v[self.slot[b]] } else { 0.0 };
        let va = if self.slot[a] != FIXED { v[self.slot[a]] } else { 0.0 };
        (vb - va) / self.h
    }

    /// Per-triangle cache (x, y, Φ', Φ'') at the current iterate.
    pub(crate) fn linearize(&self, f: &[f64]) -> Vec<TriState> {
        let per = if self.dim == 1 { 1 } else { 4 };
        let mut out = Vec::with_capacity(self.cells.len() * per);
        for corners in &self.cells {
            self.for_triangles(corners, f, |_, _, x, y| {
                let (d1, d2) = self.dphi(x * x + y * y);
                out.push([x, y, d1, d2]);
            });
        }
        out
    }

    /// Hessian-vector product on free values using a cached linearization.
    pub(crate) fn hess_vec(&self, lin: &[TriState], v: &[f64], out: &mut [f64]) {
        out.iter_mut().for_each(|o| *o = 0.0);
        let scale = self.weight / self.h;
        let mut k = 0;
        for corners in &self.cells {
            let tris: &[((usize, usize), (usize, usize))] = if self.dim == 1 { &[((0, 1), (0, 0))] } else { &TRIANGLES_2D };
            for &((xa, xb), (ya, yb)) in tris {
                let [x, y, d1, d2] = lin[k];
                k += 1;
                let ex = (corners[xa], corners[xb]);
                let vx = self.edge_diff(v, ex);
                if self.dim == 1 {
                    self.scatter(out, ex, (2.0 * d1 * vx + 4.0 * d2 * x * x * vx) * scale);
                    continue;
                }
                let ey = (corners[ya], corners[yb]);
                let vy = self.edge_diff(v, ey);
                let dot = x * vx + y * vy;
                self.scatter(out, ex, (2.0 * d1 * vx + 4.0 * d2 * x * dot) * scale);
                self.scatter(out, ey, (2.0 * d1 * vy + 4.0 * d2 * y * dot) * scale);
            }
        }
    }

    /// Diagonal of the Hessian, used as a preconditioner.
    pub(crate) fn hess_diag(&self, lin: &[TriState]) -> Vec<f64> {
        let mut diag = vec![0.0; self.n_free()];
        let w = self.weight / (self.h * self.h);
        let mut k = 0;
        for corners in &self.cells {
            let tris: &[((usize, usize), (usize, usize))] = if self.dim == 1 { &[((0, 1), (0, 0))] } else { &TRIANGLES_2D };
            for &((xa, xb), (ya, yb)) in tris {
                let [x, y, d1, d2] = lin[k];
                k += 1;
                let ex = (corners[xa], corners[xb]);
                let ey = (corners[ya], corners[yb]);
                let used = if self.dim == 1 { 2 } else { 4 };
                let nodes = [ex.0, ex.1, ey.0, ey.1];
                for (slot_idx, &n) in nodes[..used].iter().enumerate() {
                    let fs = self.slot[n];
                    if fs == FIXED {
                        continue;
                    }
                    // Avoid double counting a node that is shared by both edges.
                    if slot_idx >= 2 && (n == ex.0 || n == ex.1) {
                        continue;
                    }
                    let cx = if n == ex.1 { 1.0 } else if n == ex.0 { -1.0 } else { 0.0 };
                    let cy = if self.dim == 1 { 0.0 } else if n == ey.1 { 1.0 } else if n == ey.0 { -1.0 } else { 0.0 };
                    let dot = x * cx + y * cy;
                    diag[fs] += w * (2.0 * d1 * (cx * cx + cy * cy) + 4.0 * d2 * dot * dot);
                }
            }
        }
        diag
    }

    fn scatter_free(&self, f: &mut [f64], x: &[f64]) {
        for (k, &n) in self.free.iter().enumerate() {
            f[n] = x[k];
        }
    }

    fn gather_free(&self, f: &[f64]) -> Vec<f64> {
        self.free.iter().map(|&n| f[n]).collect()
    }

    /// Local energy derivatives (first, second) at node `n` as a function of
    /// its own value.
    fn local_derivatives(&self, f: &[f64], fs: usize) -> (f64, f64) {
        let n = self.free[fs];
        let inv_h = 1.0 / self.h;
        let mut d1 = 0.0;
        let mut d2 = 0.0;
        for &cid in &self.incident[fs] {
            self.for_triangles(&self.cells[cid], f, |ex, ey, x, y| {
                let cx = if n == ex.1 { inv_h } else if n == ex.0 { -inv_h } else { 0.0 };
                let cy = match ey {
                    Some(ey) if n == ey.1 => inv_h,
                    Some(ey) if n == ey.0 => -inv_h,
                    _ => 0.0,
                };
                if cx == 0.0 && cy == 0.0 {
                    return;
                }
                let (p1, p2) = self.dphi(x * x + y * y);
                let dot = x * cx + y * cy;
                d1 += 2.0 * p1 * dot;
                d2 += 2.0 * p1 * (cx * cx + cy * cy) + 4.0 * p2 * dot * dot;
            });
        }
        (d1 * self.weight, d2 * self.weight)
    }
}

/// Outcome of a minimization run.
pub(crate) struct Minimized {
    pub(crate) energy: f64,
    pub(crate) iterations: usize,
    pub(crate) residual: f64,
    pub(crate) converged: bool,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Preconditioned conjugate gradients for H d = rhs.
fn pcg(p: &Problem, lin: &[TriState], diag: &[f64], rhs: &[f64], rel_tol: f64, max_iter: usize) -> Vec<f64> {
    let n = rhs.len();
    let mut x = vec![0.0; n];
    let mut r = rhs.to_vec();
    let inv: Vec<f64> = diag.iter().map(|&d| if d > 0.0 { 1.0 / d } else { 1.0 }).collect();
    let mut z: Vec<f64> = r.iter().zip(&inv).map(|(a, b)| a * b).collect();
    let mut d = z.clone();
    let mut rz = dot(&r, &z);
    let r0 = dot(&r, &r).sqrt();
    let mut hd = vec![0.0; n];
    for _ in 0..max_iter {
        if dot(&r, &r).sqrt() <= rel_tol * r0 {
            break;
        }
        p.hess_vec(lin, &d, &mut hd);
        let dhd = dot(&d, &hd);
        if !(dhd > 0.0) {
            break;
        }
        let alpha = rz / dhd;
        for i in 0..n {
            x[i] += alpha * d[i];
            r[i] -= alpha * hd[i];
        }
        for i in 0..n {
            z[i] = r[i] * inv[i];
        }
        let rz_new = dot(&r, &z);
        let beta = rz_new / rz;
        rz = rz_new;
        for i in 0..n {
            d[i] = z[i] + beta * d[i];
        }
    }
    x
}

/// Globalized Newton iteration with Armijo backtracking on the energy.
/// Stops once half the Newton decrement falls below `tol` times the energy.
pub(crate) fn newton(p: &Problem, f: &mut [f64], tol: f64, max_iter: usize) -> Minimized {
    let n = p.n_free();
    let mut energy = p.energy(f);
    let mut g = vec![0.0; n];
    let mut g0_norm = None;
    let mut residual = f64::INFINITY;
    for it in 0..max_iter {
        p.gradient(f, &mut g);
        let g_norm = dot(&g, &g).sqrt();
        let g0 = *g0_norm.get_or_insert(g_norm.max(f64::MIN_POSITIVE));
        if g_norm == 0.0 {
            return Minimized { energy, iterations: it, residual: 0.0, converged: true };
        }
        let lin = p.linearize(f);
        let diag = p.hess_diag(&lin);
        let forcing = (g_norm / g0).min(0.1).max(1e-12);
        let rhs: Vec<f64> = g.iter().map(|v| -v).collect();
        let mut dir = pcg(p, &lin, &diag, &rhs, forcing, 20 * n.max(10));
        let mut slope = dot(&g, &dir);
        if !(slope < 0.0) {
            dir = g.iter().zip(&diag).map(|(gi, di)| -gi / di.max(f64::MIN_POSITIVE)).collect();
            slope = dot(&g, &dir);
        }
        residual = -0.5 * slope / energy.abs().max(f64::MIN_POSITIVE);
        if residual <= tol {
            return Minimized { energy, iterations: it, residual, converged: true };
        }
        let x0 = p.gather_free(f);
        let mut t = 1.0;
        let mut trial = x0.clone();
        let mut accepted = false;
        for _ in 0..60 {
            for i in 0..n {
                trial[i] = x0[i] + t * dir[i];
            }
            p.scatter_free(f, &trial);
            let e = p.energy(f);
            if e <= energy + 1e-4 * t * slope {
                let rel_drop = (energy - e) / energy.abs().max(f64::MIN_POSITIVE);
                energy = e;
                accepted = true;
                if rel_drop < 0.1 * tol && residual < 1e3 * tol {
                    return Minimized { energy, iterations: it + 1, residual, converged: true };
                }
                break;
            }
            t *= 0.5;
        }
        if !accepted {
            p.scatter_free(f, &x0);
            return Minimized { energy, iterations: it, residual, converged: residual <= 1e3 * tol };
        }
    }
    Minimized { energy, iterations: max_iter, residual, converged: false }
}

/// Nodal nonlinear Gauss–Seidel: each sweep minimizes the convex local
/// energy at every free node in turn, so the energy never increases.
pub(crate) fn relaxation(p: &Problem, f: &mut [f64], tol: f64, max_sweeps: usize) -> Minimized {
    let mut energy = p.energy(f);
    let mut residual = f64::INFINITY;
    for sweep in 0..max_sweeps {
        for fs in 0..p.n_free() {
            relax_node(p, f, fs);
        }
        let e = p.energy(f);
        residual = (energy - e).abs() / energy.abs().max(f64::MIN_POSITIVE);
        energy = e;
        if residual < tol {
            return Minimized { energy, iterations: sweep + 1, residual, converged: true };
        }
    }
    Minimized { energy, iterations: max_sweeps, residual, converged: false }
}

fn relax_node(p: &Problem, f: &mut [f64], fs: usize) {
    let n = p.free[fs];
    let mut lo = 0.0;
    let mut hi = 1.0;
    f[n] = lo;
    if p.local_derivatives(f, fs).0 >= 0.0 {
        return;
    }
    f[n] = hi;
    if p.local_derivatives(f, fs).0 <= 0.0 {
        return;
    }
    let mut v = 0.5;
    for _ in 0..100 {
        f[n] = v;
        let (d1, d2) = p.local_derivatives(f, fs);
        if d1 == 0.0 {
            break;
        }
        if d1 > 0.0 {
            hi = v;
        } else {
            lo = v;
        }
        let newton = v - d1 / d2;
        let next = if d2 > 0.0 && newton > lo && newton < hi { newton } else { 0.5 * (lo + hi) };
        if (next - v).abs() <= 1e-15 || hi - lo <= 1e-15 {
            v = next;
            break;
        }
        v = next;
    }
    f[n] = v;
}
