//! Parallel/sequential execution switch.
//!
//! With the `parallel` feature (default) batch work fans out over rayon;
//! without it every call site runs the same closures sequentially. Output
//! order always matches input order.

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ExecMode {
    Sequential,
    #[cfg(feature = "parallel")]
    Parallel,
}

impl Default for ExecMode {
    fn default() -> Self {
        #[cfg(feature = "parallel")]
        {
            ExecMode::Parallel
        }
        #[cfg(not(feature = "parallel"))]
        {
            ExecMode::Sequential
        }
    }
}

impl ExecMode {
    pub fn name(self) -> &'static str {
        match self {
            ExecMode::Sequential => "sequential",
            #[cfg(feature = "parallel")]
            ExecMode::Parallel => "parallel",
        }
    }

    /// Every mode compiled into this build.
    pub fn available() -> Vec<ExecMode> {
        vec![
            ExecMode::Sequential,
            #[cfg(feature = "parallel")]
            ExecMode::Parallel,
        ]
    }
}

pub fn map_ordered<T, U, F>(mode: ExecMode, items: &[T], f: F) -> Vec<U>
where
    T: Sync,
    U: Send,
    F: Fn(&T) -> U + Sync + Send,
{
    match mode {
        ExecMode::Sequential => items.iter().map(f).collect(),
        #[cfg(feature = "parallel")]
        ExecMode::Parallel => {
            use rayon::prelude::*;
            items.par_iter().map(f).collect()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn modes_agree_and_keep_order() {
        let items: Vec<u64> = (0..1000).collect();
        let expected: Vec<u64> = items.iter().map(|x| x * x).collect();
        for mode in ExecMode::available() {
            assert_eq!(map_ordered(mode, &items, |x| x * x), expected, "{}", mode.name());
        }
    }
}
