#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// Execution policy for the embarrassingly parallel sweeps (sample sets,
/// initial conditions, selector groups).
///
/// `Parallel` silently degrades to sequential execution when the crate is
/// built without the `parallel` feature. Results never depend on the policy:
/// reductions are either order-free (`max`) or collected in index order.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub enum Exec {
    Sequential,
    #[default]
    Parallel,
}

impl Exec {
    pub fn map<T, F>(self, len: usize, f: F) -> Vec<T>
    where
        T: Send,
        F: Fn(usize) -> T + Sync + Send,
    {
        match self {
            #[cfg(feature = "parallel")]
            Exec::Parallel => (0..len).into_par_iter().map(f).collect(),
            _ => (0..len).map(f).collect(),
        }
    }

    /// Maximum of `f` over `0..len`; NaN values propagate as NaN.
    pub fn max<F>(self, len: usize, f: F) -> f64
    where
        F: Fn(usize) -> f64 + Sync + Send,
    {
        let pick = |a: f64, b: f64| if a.is_nan() || b.is_nan() { f64::NAN } else { a.max(b) };
        match self {
            #[cfg(feature = "parallel")]
            Exec::Parallel => (0..len)
                .into_par_iter()
                .map(f)
                .reduce(|| f64::NEG_INFINITY, pick),
            _ => (0..len).map(f).fold(f64::NEG_INFINITY, pick),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn policies_agree() {
        let f = |i: usize| ((i * 7919) % 113) as f64;
        assert_eq!(Exec::Sequential.max(1000, f), Exec::Parallel.max(1000, f));
        assert_eq!(Exec::Sequential.map(50, f), Exec::Parallel.map(50, f));
        assert_eq!(Exec::Parallel.max(0, f), f64::NEG_INFINITY);
    }

    #[test]
    fn nan_propagates() {
        let f = |i: usize| if i == 3 { f64::NAN } else { i as f64 };
        assert!(Exec::Sequential.max(10, f).is_nan());
        assert!(Exec::Parallel.max(10, f).is_nan());
    }
}
