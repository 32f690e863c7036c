//! Execution strategy for embarrassingly parallel batches (candidate
//! enumeration, scenario fan-out, batch objective evaluation).
//!
//! With the `parallel` feature disabled every strategy runs sequentially, so
//! callers never need their own `cfg` gates.

/// How a batch of independent evaluations is scheduled.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub enum Execution {
    Sequential,
    /// Rayon work-stealing pool; sequential when built without `parallel`.
    #[default]
    Parallel,
}

impl Execution {
    /// True when batches will actually be spread over worker threads.
    pub fn is_parallel(self) -> bool {
        cfg!(feature = "parallel") && self == Execution::Parallel
    }
}

/// Evaluates `f(0..n)` and returns the results in index order.
pub(crate) fn map_indexed<T, F>(exec: Execution, n: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    #[cfg(feature = "parallel")]
    if exec == Execution::Parallel {
        use rayon::prelude::*;
        return (0..n).into_par_iter().map(f).collect();
    }
    let _ = exec;
    (0..n).map(f).collect()
}

/// Maps `f` over `0..n` and reduces with an associative, commutative `pick`.
///
/// `pick` must be a total order selection (e.g. max with index tie-break) so
/// the result does not depend on how the pool splits the range.
pub(crate) fn reduce_indexed<T, F, P>(exec: Execution, n: usize, identity: T, f: F, pick: P) -> T
where
    T: Send + Sync + Clone,
    F: Fn(usize) -> T + Sync + Send,
    P: Fn(T, T) -> T + Sync + Send,
{
    #[cfg(feature = "parallel")]
    if exec == Execution::Parallel {
        use rayon::prelude::*;
        return (0..n)
            .into_par_iter()
            .map(f)
            .reduce(|| identity.clone(), &pick);
    }
    let _ = exec;
    (0..n).map(f).fold(identity, pick)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn map_preserves_order() {
        for exec in [Execution::Sequential, Execution::Parallel] {
            let v = map_indexed(exec, 1000, |i| i * i);
            assert!(v.iter().enumerate().all(|(i, &x)| x == i * i));
        }
    }

    #[test]
    fn reduce_is_schedule_independent() {
        let pick = |a: (i64, usize), b: (i64, usize)| {
            if a.0 > b.0 || (a.0 == b.0 && a.1 < b.1) {
                a
            } else {
                b
            }
        };
        let f = |i: usize| (((i * 7919) % 101) as i64, i);
        let seq = reduce_indexed(Execution::Sequential, 5000, (i64::MIN, usize::MAX), f, pick);
        let par = reduce_indexed(Execution::Parallel, 5000, (i64::MIN, usize::MAX), f, pick);
        assert_eq!(seq, par);
        assert_eq!(seq.0, 100);
    }
}
