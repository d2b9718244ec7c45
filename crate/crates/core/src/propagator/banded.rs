//! Selected eigenpairs of a real symmetric banded matrix: inertia-count
//! bisection for the eigenvalues, inverse iteration for the vectors.

/// Symmetric band matrix; `bands[d][i]` is the entry `(i, i + d)`.
#[derive(Debug, Clone)]
pub(crate) struct SymBanded {
    bands: Vec<Vec<f64>>,
}

impl SymBanded {
    pub fn new(bands: Vec<Vec<f64>>) -> Self {
        let n = bands[0].len();
        for (d, b) in bands.iter().enumerate() {
            assert_eq!(b.len() + d, n, "band {d} has the wrong length");
        }
        SymBanded { bands }
    }

    pub fn len(&self) -> usize {
        self.bands[0].len()
    }

    fn width(&self) -> usize {
        self.bands.len() - 1
    }

    fn get(&self, i: usize, j: usize) -> f64 {
        let (a, b) = if i <= j { (i, j) } else { (j, i) };
        let d = b - a;
        if d > self.width() {
            0.0
        } else {
            self.bands[d][a]
        }
    }

    fn pivmin(&self) -> f64 {
        let m = self.bands[1..].iter().flatten().fold(1.0_f64, |acc, e| acc.max(e * e));
        f64::MIN_POSITIVE * m
    }

    /// Gershgorin interval containing the whole spectrum.
    pub fn bounds(&self) -> (f64, f64) {
        let n = self.len();
        let p = self.width();
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for i in 0..n {
            let r: f64 = (i.saturating_sub(p)..(i + p + 1).min(n))
                .filter(|&j| j != i)
                .map(|j| self.get(i, j).abs())
                .sum();
            lo = lo.min(self.bands[0][i] - r);
            hi = hi.max(self.bands[0][i] + r);
        }
        let pad = 1e-12 * (lo.abs().max(hi.abs()) + 1.0);
        (lo - pad, hi + pad)
    }

    /// Number of eigenvalues strictly below `lambda`: the count of negative
    /// pivots in the `LDLᵀ` factorisation of `A − λI` (Sylvester's inertia).
    pub fn count_below(&self, lambda: f64) -> usize {
        let n = self.len();
        let p = self.width();
        let pivmin = self.pivmin();
        // Row k keeps the entries (k, k..=k+p) of the trailing matrix.
        let mut rows: Vec<Vec<f64>> = (0..n)
            .map(|k| {
                (0..=p)
                    .map(|d| match d {
                        0 => self.bands[0][k] - lambda,
                        _ if k + d < n => self.bands[d][k],
                        _ => 0.0,
                    })
                    .collect()
            })
            .collect();
        let mut count = 0;
        for k in 0..n {
            let mut d = rows[k][0];
            if d.abs() < pivmin {
                d = -pivmin;
            }
            if d < 0.0 {
                count += 1;
            }
            let reach = p.min(n - 1 - k);
            for i in 1..=reach {
                let l = rows[k][i] / d;
                for j in i..=reach {
                    let u = rows[k][j];
                    rows[k + i][j - i] -= l * u;
                }
            }
        }
        count
    }

    /// The `k`-th smallest eigenvalue (0-based), by bisection within `[lo, hi]`.
    pub fn eigenvalue(&self, k: usize, mut lo: f64, mut hi: f64) -> f64 {
        let pivmin = self.pivmin();
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            if hi - lo <= 2.0 * f64::EPSILON * lo.abs().max(hi.abs()) + pivmin {
                break;
            }
            if self.count_below(mid) > k {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        0.5 * (lo + hi)
    }

    /// Eigenvector for the (accurate) eigenvalue `lambda`, orthogonalised
    /// against the members of its cluster. Returned with unit 2-norm.
    pub fn eigenvector(&self, lambda: f64, cluster: &[&[f64]], seed: usize) -> Vec<f64> {
        let n = self.len();
        let (lo, hi) = self.bounds();
        let scale = lo.abs().max(hi.abs()).max(1.0);
        let lu = ShiftedLu::factor(self, lambda, scale);
        let mut v: Vec<f64> = (0..n)
            .map(|i| {
                let t = ((i + 1) as f64 * 0.618_033_988_749_894_9 + seed as f64 * 0.414_213_562_373_095).fract();
                0.5 + t
            })
            .collect();
        normalize(&mut v);
        for _ in 0..4 {
            lu.solve(&mut v);
            for u in cluster {
                project_out(&mut v, u);
            }
            normalize(&mut v);
        }
        v
    }
}

pub(crate) fn normalize(v: &mut [f64]) {
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if norm > 0.0 {
        v.iter_mut().for_each(|x| *x /= norm);
    }
}

pub(crate) fn project_out(v: &mut [f64], u: &[f64]) {
    let dot: f64 = v.iter().zip(u).map(|(a, b)| a * b).sum();
    v.iter_mut().zip(u).for_each(|(a, b)| *a -= dot * b);
}

/// Banded LU with partial pivoting of `A − λI`. Row `i` of `u` holds the
/// columns `i..=i+2p` (the upper bandwidth doubles under row swaps).
struct ShiftedLu {
    p: usize,
    u: Vec<Vec<f64>>,
    /// Multipliers `l[k][i]` eliminating row `k+1+i` with pivot row `k`.
    l: Vec<Vec<f64>>,
    /// Row swapped with `k` at step `k`.
    perm: Vec<usize>,
}

impl ShiftedLu {
    fn factor(a: &SymBanded, lambda: f64, scale: f64) -> Self {
        let n = a.len();
        let p = a.width();
        let w = 2 * p + 1;
        // Full rows i, columns i-p ..= i+2p, stored at offset (j + p - i).
        let mut rows: Vec<Vec<f64>> = (0..n)
            .map(|i| {
                (0..w + p)
                    .map(|o| {
                        let j = (i + o) as isize - p as isize;
                        if j < 0 || j as usize >= n {
                            0.0
                        } else {
                            let j = j as usize;
                            a.get(i, j) - if i == j { lambda } else { 0.0 }
                        }
                    })
                    .collect()
            })
            .collect();
        let at = |rows: &Vec<Vec<f64>>, i: usize, j: usize| -> f64 {
            let o = j as isize + p as isize - i as isize;
            if o < 0 || o as usize >= w + p {
                0.0
            } else {
                rows[i][o as usize]
            }
        };
        let mut perm = vec![0; n];
        let mut l = vec![vec![0.0; p]; n];
        let tiny = f64::EPSILON * scale;
        for k in 0..n {
            let last = (k + p).min(n - 1);
            let mut piv = k;
            for r in k + 1..=last {
                if at(&rows, r, k).abs() > at(&rows, piv, k).abs() {
                    piv = r;
                }
            }
            perm[k] = piv;
            if piv != k {
                // Swap the overlapping column range k..=k+2p.
                for j in k..(k + 2 * p + 1).min(n) {
                    let ok = j + p - k;
                    let op = j + p - piv;
                    let a_k = rows[k][ok];
                    let a_p = if op < w + p { rows[piv][op] } else { 0.0 };
                    rows[k][ok] = a_p;
                    if op < w + p {
                        rows[piv][op] = a_k;
                    }
                }
            }
            let mut d = rows[k][p];
            if d.abs() < tiny {
                d = if d < 0.0 { -tiny } else { tiny };
                rows[k][p] = d;
            }
            for r in k + 1..=last {
                let f = at(&rows, r, k) / d;
                l[k][r - k - 1] = f;
                for j in k..(k + 2 * p + 1).min(n) {
                    let o = j + p - r;
                    if j + p >= r && o < w + p {
                        let v = rows[k][j + p - k];
                        rows[r][o] -= f * v;
                    }
                }
            }
        }
        let u = rows
            .iter()
            .enumerate()
            .map(|(i, r)| (0..w).map(|o| if i + o < n { r[p + o] } else { 0.0 }).collect())
            .collect();
        ShiftedLu { p, u, l, perm }
    }

    fn solve(&self, b: &mut [f64]) {
        let n = b.len();
        let p = self.p;
        for k in 0..n {
            b.swap(k, self.perm[k]);
            for i in 0..p.min(n - 1 - k) {
                b[k + 1 + i] -= self.l[k][i] * b[k];
            }
        }
        for k in (0..n).rev() {
            let mut s = b[k];
            for o in 1..=2 * p {
                if k + o < n {
                    s -= self.u[k][o] * b[k + o];
                }
            }
            b[k] = s / self.u[k][0];
        }
        let m = b.iter().fold(0.0_f64, |acc, x| acc.max(x.abs()));
        if m > 1e150 || (m < 1e-150 && m > 0.0) {
            b.iter_mut().for_each(|x| *x /= m);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn laplacian(n: usize) -> SymBanded {
        SymBanded::new(vec![vec![2.0; n], vec![-1.0; n - 1]])
    }

    fn penta(n: usize) -> (SymBanded, Vec<Vec<f64>>) {
        let diag: Vec<f64> = (0..n).map(|i| ((i as f64) * 0.3).sin() * 3.0 + 6.0).collect();
        let off1: Vec<f64> = (0..n - 1).map(|i| -1.0 - 0.1 * (i % 3) as f64).collect();
        let off2: Vec<f64> = (0..n - 2).map(|i| 0.2 + 0.05 * (i % 4) as f64).collect();
        let m = SymBanded::new(vec![diag, off1, off2]);
        let dense = (0..n).map(|i| (0..n).map(|j| m.get(i, j)).collect()).collect();
        (m, dense)
    }

    #[test]
    fn laplacian_spectrum_matches_closed_form() {
        let n = 50;
        let t = laplacian(n);
        let (lo, hi) = t.bounds();
        for k in 0..n {
            let exact = 2.0 - 2.0 * (std::f64::consts::PI * (k + 1) as f64 / (n + 1) as f64).cos();
            let got = t.eigenvalue(k, lo, hi);
            assert!((got - exact).abs() < 1e-13, "k={k} {got} vs {exact}");
        }
    }

    #[test]
    fn pentadiagonal_spectrum_matches_dense_solver() {
        let n = 40;
        let (m, dense) = penta(n);
        let dm = nalgebra::DMatrix::from_fn(n, n, |i, j| dense[i][j]);
        let mut want: Vec<f64> = dm.symmetric_eigen().eigenvalues.iter().copied().collect();
        want.sort_by(f64::total_cmp);
        let (lo, hi) = m.bounds();
        for (k, w) in want.iter().enumerate() {
            let got = m.eigenvalue(k, lo, hi);
            assert!((got - w).abs() < 1e-11, "k={k} {got} vs {w}");
        }
    }

    #[test]
    fn eigenvectors_are_orthonormal_and_satisfy_equation() {
        let n = 40;
        let (m, dense) = penta(n);
        let (lo, hi) = m.bounds();
        let mut vecs: Vec<Vec<f64>> = Vec::new();
        for k in 0..n {
            let lam = m.eigenvalue(k, lo, hi);
            let cluster: Vec<&[f64]> = vecs.iter().map(|v| v.as_slice()).collect();
            let v = m.eigenvector(lam, &cluster, k);
            for i in 0..n {
                let av: f64 = (0..n).map(|j| dense[i][j] * v[j]).sum();
                assert!((av - lam * v[i]).abs() < 1e-10, "k={k} i={i}");
            }
            vecs.push(v);
        }
        for a in 0..n {
            for b in 0..n {
                let dot: f64 = vecs[a].iter().zip(&vecs[b]).map(|(x, y)| x * y).sum();
                let want = if a == b { 1.0 } else { 0.0 };
                assert!((dot - want).abs() < 1e-10, "({a},{b}) {dot}");
            }
        }
    }

    #[test]
    fn inertia_count_is_monotone() {
        let t = penta(30).0;
        let (lo, hi) = t.bounds();
        let mut prev = 0;
        for i in 0..=100 {
            let c = t.count_below(lo + (hi - lo) * i as f64 / 100.0);
            assert!(c >= prev);
            prev = c;
        }
        assert_eq!(prev, 30);
    }
}
