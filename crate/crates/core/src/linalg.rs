//! Banded LU with partial pivoting and a bandwidth-reducing node ordering.
//!
//! Ladder circuits number cleanly into narrow bands, so every solver in the
//! crate assembles into a [`BandMatrix`] and factors it in place.

use num_complex::Complex64;
use std::collections::VecDeque;
use std::ops::{AddAssign, Div, Mul, MulAssign, Neg, Sub, SubAssign};

use crate::error::{Error, Result};

pub trait Scalar:
    Copy
    + Default
    + PartialEq
    + std::fmt::Debug
    + Send
    + Sync
    + AddAssign
    + SubAssign
    + MulAssign
    + Mul<Output = Self>
    + Div<Output = Self>
    + Sub<Output = Self>
    + Neg<Output = Self>
{
    fn zero() -> Self {
        Self::default()
    }
    /// Magnitude used for pivot selection.
    fn magnitude(self) -> f64;
}

impl Scalar for f64 {
    fn magnitude(self) -> f64 {
        self.abs()
    }
}

impl Scalar for Complex64 {
    fn magnitude(self) -> f64 {
        self.re.abs() + self.im.abs()
    }
}

/// Square band matrix with `kl` sub- and `ku` super-diagonals.
///
/// Row `r` stores columns `r - kl ..= r + kl + ku`; the extra `kl` columns
/// hold fill-in from row interchanges.
#[derive(Debug, Clone)]
pub struct BandMatrix<T> {
    n: usize,
    kl: usize,
    ku: usize,
    width: usize,
    data: Vec<T>,
}

impl<T: Scalar> BandMatrix<T> {
    pub fn new(n: usize, kl: usize, ku: usize) -> Self {
        let width = 2 * kl + ku + 1;
        Self {
            n,
            kl,
            ku,
            width,
            data: vec![T::zero(); n * width],
        }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn bandwidths(&self) -> (usize, usize) {
        (self.kl, self.ku)
    }

    #[inline]
    fn offset(&self, row: usize, col: usize) -> usize {
        debug_assert!(col + self.kl >= row && col <= row + self.kl + self.ku);
        row * self.width + (col + self.kl - row)
    }

    /// Adds `v` at `(row, col)`. Panics if the entry lies outside the band.
    #[inline]
    pub fn add(&mut self, row: usize, col: usize, v: T) {
        assert!(
            col + self.kl >= row && col <= row + self.ku,
            "entry ({row}, {col}) outside band kl={} ku={}",
            self.kl,
            self.ku
        );
        let o = self.offset(row, col);
        self.data[o] += v;
    }

    pub fn get(&self, row: usize, col: usize) -> T {
        if col + self.kl < row || col > row + self.ku {
            return T::zero();
        }
        self.data[self.offset(row, col)]
    }

    pub fn clear(&mut self) {
        self.data.iter_mut().for_each(|v| *v = T::zero());
    }

    /// `y = A·x` for the unfactored matrix.
    pub fn mul_vec(&self, x: &[T]) -> Vec<T> {
        let mut y = vec![T::zero(); self.n];
        for (r, yr) in y.iter_mut().enumerate() {
            let lo = r.saturating_sub(self.kl);
            let hi = (r + self.ku).min(self.n - 1);
            for (c, xc) in x.iter().enumerate().take(hi + 1).skip(lo) {
                *yr += self.data[self.offset(r, c)] * *xc;
            }
        }
        y
    }

    /// Factors in place; the matrix must not be modified afterwards.
    pub fn factor(mut self) -> Result<BandLu<T>> {
        let (n, kl, ku, w) = (self.n, self.kl, self.ku, self.width);
        let mut pivots = vec![0usize; n];
        let scale = self
            .data
            .iter()
            .map(|v| v.magnitude())
            .fold(0.0f64, f64::max);
        for i in 0..n {
            let last_row = (i + kl).min(n - 1);
            let mut p = i;
            let mut best = self.data[self.offset(i, i)].magnitude();
            for r in i + 1..=last_row {
                let m = self.data[self.offset(r, i)].magnitude();
                if m > best {
                    best = m;
                    p = r;
                }
            }
            if !(best > scale * 1e-300) || !best.is_finite() {
                return Err(Error::SingularJacobian(i));
            }
            pivots[i] = p;
            let last_col = (i + kl + ku).min(n - 1);
            if p != i {
                for c in i..=last_col {
                    let (a, b) = (self.offset(i, c), self.offset(p, c));
                    self.data.swap(a, b);
                }
            }
            let pivot = self.data[self.offset(i, i)];
            let span = last_col - i;
            let pivot_start = self.offset(i, i) + 1;
            for r in i + 1..=last_row {
                let o = self.offset(r, i);
                let f = self.data[o];
                if f == T::zero() {
                    continue;
                }
                let f = f / pivot;
                self.data[o] = f;
                // rows are disjoint slices of one buffer: split to borrow both
                let (head, tail) = self.data.split_at_mut(r * w);
                let src = &head[pivot_start..pivot_start + span];
                let dst_start = i + 1 + kl - r;
                let dst = &mut tail[dst_start..dst_start + span];
                for (d, s) in dst.iter_mut().zip(src) {
                    *d -= f * *s;
                }
            }
        }
        Ok(BandLu { m: self, pivots })
    }
}

#[derive(Debug, Clone)]
pub struct BandLu<T> {
    m: BandMatrix<T>,
    pivots: Vec<usize>,
}

impl<T: Scalar> BandLu<T> {
    pub fn dim(&self) -> usize {
        self.m.n
    }

    /// Solves `A·x = b` in place.
    pub fn solve_in_place(&self, b: &mut [T]) {
        let m = &self.m;
        let (n, kl, ku) = (m.n, m.kl, m.ku);
        assert_eq!(b.len(), n);
        for i in 0..n {
            let p = self.pivots[i];
            if p != i {
                b.swap(i, p);
            }
            let bi = b[i];
            if bi == T::zero() {
                continue;
            }
            for r in i + 1..=(i + kl).min(n - 1) {
                let l = m.data[m.offset(r, i)];
                b[r] -= l * bi;
            }
        }
        for i in (0..n).rev() {
            let last = (i + kl + ku).min(n - 1);
            let base = m.offset(i, i);
            let mut acc = b[i];
            for (k, bc) in b[i + 1..=last].iter().enumerate() {
                acc -= m.data[base + 1 + k] * *bc;
            }
            b[i] = acc / m.data[base];
        }
    }

    pub fn solve(&self, b: &[T]) -> Vec<T> {
        let mut x = b.to_vec();
        self.solve_in_place(&mut x);
        x
    }

    /// Recovers the storage as a zeroed matrix of the same shape.
    pub fn into_matrix(self) -> BandMatrix<T> {
        let mut m = self.m;
        m.clear();
        m
    }
}

/// Solves `A·X = B` for a small dense row-major `A` (`n×n`) and `B`
/// (`n×m`), overwriting `B` with `X`. `A` is destroyed.
pub fn dense_solve_in_place<T: Scalar>(a: &mut [T], n: usize, b: &mut [T], m: usize) -> Result<()> {
    for i in 0..n {
        let p = (i..n)
            .max_by(|&x, &y| a[x * n + i].magnitude().total_cmp(&a[y * n + i].magnitude()))
            .unwrap_or(i);
        if a[p * n + i] == T::zero() {
            return Err(Error::SingularSystem(format!("dense block singular at column {i}")));
        }
        if p != i {
            for c in 0..n {
                a.swap(i * n + c, p * n + c);
            }
            for c in 0..m {
                b.swap(i * m + c, p * m + c);
            }
        }
        let pivot = a[i * n + i];
        for r in i + 1..n {
            let f = a[r * n + i] / pivot;
            if f == T::zero() {
                continue;
            }
            for c in i..n {
                let v = a[i * n + c];
                a[r * n + c] -= f * v;
            }
            for c in 0..m {
                let v = b[i * m + c];
                b[r * m + c] -= f * v;
            }
        }
    }
    for i in (0..n).rev() {
        let pivot = a[i * n + i];
        for c in 0..m {
            let mut acc = b[i * m + c];
            for k in i + 1..n {
                acc -= a[i * n + k] * b[k * m + c];
            }
            b[i * m + c] = acc / pivot;
        }
    }
    Ok(())
}

/// Node permutation for a sparse symmetric pattern.
///
/// Returns `order` where `order[k]` is the original node placed at position
/// `k`, chosen as the better of the identity and reverse Cuthill-McKee.
pub fn band_ordering(n: usize, edges: &[(usize, usize)]) -> Vec<usize> {
    let mut adj = vec![Vec::new(); n];
    for &(a, b) in edges {
        if a != b {
            adj[a].push(b);
            adj[b].push(a);
        }
    }
    for list in &mut adj {
        list.sort_unstable();
        list.dedup();
    }
    let identity: Vec<usize> = (0..n).collect();
    let rcm = reverse_cuthill_mckee(&adj);
    if bandwidth(&adj, &rcm) < bandwidth(&adj, &identity) {
        rcm
    } else {
        identity
    }
}

/// Half-bandwidth of the pattern under `order`.
pub fn bandwidth(adj: &[Vec<usize>], order: &[usize]) -> usize {
    let mut pos = vec![0usize; order.len()];
    for (k, &v) in order.iter().enumerate() {
        pos[v] = k;
    }
    adj.iter()
        .enumerate()
        .flat_map(|(a, list)| list.iter().map(move |&b| (a, b)))
        .map(|(a, b)| pos[a].abs_diff(pos[b]))
        .max()
        .unwrap_or(0)
}

fn reverse_cuthill_mckee(adj: &[Vec<usize>]) -> Vec<usize> {
    let n = adj.len();
    let mut visited = vec![false; n];
    let mut order = Vec::with_capacity(n);
    while order.len() < n {
        // start each component from a pseudo-peripheral node
        let seed = (0..n).filter(|&v| !visited[v]).min_by_key(|&v| adj[v].len()).unwrap();
        let start = pseudo_peripheral(adj, seed);
        let mut queue = VecDeque::from([start]);
        visited[start] = true;
        while let Some(v) = queue.pop_front() {
            order.push(v);
            let mut next: Vec<usize> = adj[v].iter().copied().filter(|&u| !visited[u]).collect();
            next.sort_by_key(|&u| adj[u].len());
            for u in next {
                visited[u] = true;
                queue.push_back(u);
            }
        }
    }
    order.reverse();
    order
}

fn pseudo_peripheral(adj: &[Vec<usize>], start: usize) -> usize {
    let mut node = start;
    let mut depth = 0;
    for _ in 0..8 {
        let (far, d) = farthest(adj, node);
        if d <= depth {
            break;
        }
        node = far;
        depth = d;
    }
    node
}

fn farthest(adj: &[Vec<usize>], start: usize) -> (usize, usize) {
    let mut dist = vec![usize::MAX; adj.len()];
    dist[start] = 0;
    let mut queue = VecDeque::from([start]);
    let mut last = (start, 0);
    while let Some(v) = queue.pop_front() {
        let d = dist[v];
        if d > last.1 || (d == last.1 && adj[v].len() < adj[last.0].len()) {
            last = (v, d);
        }
        for &u in &adj[v] {
            if dist[u] == usize::MAX {
                dist[u] = d + 1;
                queue.push_back(u);
            }
        }
    }
    last
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn dense_solve(a: &[Vec<f64>], b: &[f64]) -> Vec<f64> {
        let n = b.len();
        let mut m: Vec<Vec<f64>> = a.iter().zip(b).map(|(r, &v)| {
            let mut r = r.clone();
            r.push(v);
            r
        }).collect();
        for i in 0..n {
            let p = (i..n).max_by(|&x, &y| m[x][i].abs().total_cmp(&m[y][i].abs())).unwrap();
            m.swap(i, p);
            for r in i + 1..n {
                let f = m[r][i] / m[i][i];
                for c in i..=n {
                    m[r][c] -= f * m[i][c];
                }
            }
        }
        let mut x = vec![0.0; n];
        for i in (0..n).rev() {
            let s: f64 = (i + 1..n).map(|c| m[i][c] * x[c]).sum();
            x[i] = (m[i][n] - s) / m[i][i];
        }
        x
    }

    #[test]
    fn real_band_matches_dense() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for &(n, kl, ku) in &[(1, 0, 0), (5, 1, 2), (30, 4, 3), (40, 0, 5), (25, 6, 0)] {
            let mut band = BandMatrix::<f64>::new(n, kl, ku);
            let mut dense = vec![vec![0.0; n]; n];
            for r in 0..n {
                for c in r.saturating_sub(kl)..=(r + ku).min(n - 1) {
                    // small diagonal forces pivoting
                    let v = if r == c { rng.gen_range(-0.1..0.1) } else { rng.gen_range(-1.0..1.0) };
                    band.add(r, c, v);
                    dense[r][c] = v;
                }
            }
            let b: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let expect = dense_solve(&dense, &b);
            let x = band.factor().unwrap().solve(&b);
            // lower-triangular cases are badly conditioned: compare backward error
            let xnorm = x.iter().fold(0.0f64, |m, v| m.max(v.abs()));
            for r in 0..n {
                let ax: f64 = (0..n).map(|c| dense[r][c] * x[c]).sum();
                assert!((ax - b[r]).abs() < 1e-12 * (n as f64) * (1.0 + xnorm), "n={n} row {r}");
            }
            if kl > 0 && ku > 0 {
                for (u, v) in x.iter().zip(&expect) {
                    assert!((u - v).abs() < 1e-9 * (1.0 + v.abs()), "n={n}: {u} vs {v}");
                }
            }
        }
    }

    #[test]
    fn dense_solve_matches_dense_reference() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let n = 9;
        let a: Vec<Vec<f64>> = (0..n).map(|_| (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect()).collect();
        let b: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let expect = dense_solve(&a, &b);
        let mut flat: Vec<f64> = a.iter().flatten().copied().collect();
        let mut x = b.clone();
        dense_solve_in_place(&mut flat, n, &mut x, 1).unwrap();
        for (u, v) in x.iter().zip(&expect) {
            assert!((u - v).abs() < 1e-10 * (1.0 + v.abs()));
        }
        let mut singular = vec![1.0, 2.0, 2.0, 4.0];
        assert!(dense_solve_in_place(&mut singular, 2, &mut [1.0, 1.0], 1).is_err());
    }

    #[test]
    fn complex_residual() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let (n, kl, ku) = (60, 5, 7);
        let mut band = BandMatrix::<Complex64>::new(n, kl, ku);
        for r in 0..n {
            for c in r.saturating_sub(kl)..=(r + ku).min(n - 1) {
                band.add(r, c, Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)));
            }
        }
        let b: Vec<Complex64> = (0..n).map(|i| Complex64::new(i as f64, 1.0)).collect();
        let x = band.clone().factor().unwrap().solve(&b);
        let ax = band.mul_vec(&x);
        let err = ax.iter().zip(&b).map(|(u, v)| (u - v).norm()).fold(0.0, f64::max);
        assert!(err < 1e-9, "{err}");
    }

    #[test]
    fn singular_detected() {
        let mut band = BandMatrix::<f64>::new(3, 1, 1);
        band.add(0, 0, 1.0);
        band.add(1, 1, 0.0);
        band.add(2, 2, 1.0);
        assert!(matches!(band.factor(), Err(Error::SingularJacobian(1))));
    }

    #[test]
    fn rcm_recovers_path_bandwidth() {
        // a path numbered badly: 0-5-1-4-2-3
        let edges = [(0, 5), (5, 1), (1, 4), (4, 2), (2, 3)];
        let order = band_ordering(6, &edges);
        let mut adj = vec![Vec::new(); 6];
        for &(a, b) in &edges {
            adj[a].push(b);
            adj[b].push(a);
        }
        assert_eq!(bandwidth(&adj, &order), 1);
        let mut sorted = order.clone();
        sorted.sort();
        assert_eq!(sorted, (0..6).collect::<Vec<_>>());
    }
}
