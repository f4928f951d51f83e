//! Deterministic reduction over independent paths.
//!
//! Paths are grouped into fixed blocks of [`BLOCK`] consecutive indices. Each
//! block is summed sequentially and the block totals are combined in index
//! order, so the floating-point result does not depend on how blocks are
//! scheduled or on the number of workers.

use crate::error::{Error, Result};

pub const BLOCK: u64 = 1024;

/// Per-coordinate sums of a vector-valued path statistic and of its squares.
#[derive(Debug, Clone, PartialEq)]
pub struct Moments {
    pub n: u64,
    pub sum: Vec<f64>,
    pub sum_sq: Vec<f64>,
}

impl Moments {
    fn zero(k: usize) -> Moments {
        Moments { n: 0, sum: vec![0.0; k], sum_sq: vec![0.0; k] }
    }

    fn absorb(&mut self, other: &Moments) {
        self.n += other.n;
        for (a, b) in self.sum.iter_mut().zip(&other.sum) {
            *a += b;
        }
        for (a, b) in self.sum_sq.iter_mut().zip(&other.sum_sq) {
            *a += b;
        }
    }

    pub fn mean(&self, i: usize) -> f64 {
        self.sum[i] / self.n as f64
    }

    /// Sample standard deviation over `sqrt(n)`.
    pub fn std_error(&self, i: usize) -> f64 {
        if self.n < 2 {
            return 0.0;
        }
        let n = self.n as f64;
        let var = ((self.sum_sq[i] - self.sum[i] * self.sum[i] / n) / (n - 1.0)).max(0.0);
        (var / n).sqrt()
    }
}

fn run_block<F>(block: u64, n_paths: u64, k: usize, f: &F) -> Result<Moments>
where
    F: Fn(u64, &mut [f64]) -> Result<()>,
{
    let mut m = Moments::zero(k);
    let mut buf = vec![0.0; k];
    let end = ((block + 1) * BLOCK).min(n_paths);
    for path in block * BLOCK..end {
        buf.iter_mut().for_each(|v| *v = 0.0);
        f(path, &mut buf)?;
        for i in 0..k {
            m.sum[i] += buf[i];
            m.sum_sq[i] += buf[i] * buf[i];
        }
        m.n += 1;
    }
    Ok(m)
}

fn combine(blocks: Vec<Moments>, k: usize) -> Moments {
    let mut total = Moments::zero(k);
    for b in &blocks {
        total.absorb(b);
    }
    total
}

/// Sums `f(path)` over `0..n_paths`; `f` writes a `k`-vector per path.
///
/// `workers = Some(1)` runs on the calling thread; otherwise blocks are
/// spread over a rayon pool of the given size (or the global pool for
/// `None`). Without the `parallel` feature everything is sequential.
pub fn reduce_paths<F>(n_paths: u64, k: usize, workers: Option<usize>, f: F) -> Result<Moments>
where
    F: Fn(u64, &mut [f64]) -> Result<()> + Sync,
{
    if n_paths == 0 {
        return Err(Error::InvalidArgument("at least one path is required".into()));
    }
    if workers == Some(0) {
        return Err(Error::InvalidArgument("worker count must be positive".into()));
    }
    let n_blocks = n_paths.div_ceil(BLOCK);
    let blocks = if workers == Some(1) {
        sequential(n_blocks, n_paths, k, &f)?
    } else {
        parallel(n_blocks, n_paths, k, workers, &f)?
    };
    Ok(combine(blocks, k))
}

fn sequential<F>(n_blocks: u64, n_paths: u64, k: usize, f: &F) -> Result<Vec<Moments>>
where
    F: Fn(u64, &mut [f64]) -> Result<()>,
{
    (0..n_blocks).map(|b| run_block(b, n_paths, k, f)).collect()
}

#[cfg(feature = "parallel")]
fn parallel<F>(n_blocks: u64, n_paths: u64, k: usize, workers: Option<usize>, f: &F) -> Result<Vec<Moments>>
where
    F: Fn(u64, &mut [f64]) -> Result<()> + Sync,
{
    use rayon::prelude::*;
    let work = || (0..n_blocks).into_par_iter().map(|b| run_block(b, n_paths, k, f)).collect();
    match workers {
        None => work(),
        Some(w) => rayon::ThreadPoolBuilder::new()
            .num_threads(w)
            .build()
            .map_err(|e| Error::InvalidArgument(format!("cannot start {w} workers: {e}")))?
            .install(work),
    }
}

#[cfg(not(feature = "parallel"))]
fn parallel<F>(n_blocks: u64, n_paths: u64, k: usize, _workers: Option<usize>, f: &F) -> Result<Vec<Moments>>
where
    F: Fn(u64, &mut [f64]) -> Result<()> + Sync,
{
    sequential(n_blocks, n_paths, k, f)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn stat(path: u64, out: &mut [f64]) -> Result<()> {
        out[0] = (path as f64 * 0.37).sin();
        out[1] = 1.0 / (1.0 + path as f64);
        Ok(())
    }

    #[test]
    fn worker_count_does_not_change_bits() {
        let a = reduce_paths(10_000, 2, Some(1), stat).unwrap();
        for w in [None, Some(2), Some(4), Some(8)] {
            assert_eq!(reduce_paths(10_000, 2, w, stat).unwrap(), a);
        }
    }

    #[test]
    fn moments_of_a_known_sequence() {
        let m = reduce_paths(5, 1, Some(1), |p, out| {
            out[0] = p as f64;
            Ok(())
        })
        .unwrap();
        assert_eq!(m.mean(0), 2.0);
        // sample variance 2.5
        assert!((m.std_error(0) - (2.5f64 / 5.0).sqrt()).abs() < 1e-15);
    }

    #[test]
    fn errors_propagate() {
        let r = reduce_paths(3000, 1, None, |p, _| {
            if p == 2500 {
                Err(Error::NotCertified("boom".into()))
            } else {
                Ok(())
            }
        });
        assert!(r.is_err());
        assert!(reduce_paths(0, 1, None, stat).is_err());
    }
}
