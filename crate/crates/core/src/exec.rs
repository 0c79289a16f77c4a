//! Sequential or rayon-backed mapping over independent work items.
//!
//! Without the `parallel` feature both variants run sequentially, so callers
//! never need their own `cfg` switches.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Execution {
    Sequential,
    Parallel,
}

impl Default for Execution {
    fn default() -> Self {
        if Self::parallel_available() {
            Execution::Parallel
        } else {
            Execution::Sequential
        }
    }
}

impl Execution {
    pub const fn parallel_available() -> bool {
        cfg!(feature = "parallel")
    }

    /// Order-preserving map.
    pub fn map<T, R, F>(self, items: Vec<T>, f: F) -> Vec<R>
    where
        T: Send,
        R: Send,
        F: Fn(T) -> R + Sync + Send,
    {
        match self {
            #[cfg(feature = "parallel")]
            Execution::Parallel => items.into_par_iter().map(f).collect(),
            _ => items.into_iter().map(f).collect(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn both_modes_preserve_order() {
        let items: Vec<u64> = (0..1000).collect();
        let seq = Execution::Sequential.map(items.clone(), |x| x * x);
        let par = Execution::Parallel.map(items, |x| x * x);
        assert_eq!(seq, par);
        assert_eq!(seq[999], 998_001);
    }
}
