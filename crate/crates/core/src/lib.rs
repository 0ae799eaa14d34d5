pub mod arrivals;
pub mod baselines;
pub mod calendar;
pub mod engine;
pub mod error;
pub mod estimation;
pub mod evaluate;
pub mod io;
pub mod kernel;
pub mod load;
pub mod oracle;
pub mod parcel;
pub mod pipeline;
pub mod pmf;
pub mod sim;

pub use error::{Error, Result};

#[cfg(feature = "parallel")]
pub(crate) fn par_map<T: Sync, R: Send>(items: &[T], f: impl Fn(&T) -> R + Sync + Send) -> Vec<R> {
    use rayon::prelude::*;
    items.par_iter().map(f).collect()
}

#[cfg(not(feature = "parallel"))]
pub(crate) fn par_map<T: Sync, R: Send>(items: &[T], f: impl Fn(&T) -> R + Sync + Send) -> Vec<R> {
    items.iter().map(f).collect()
}
