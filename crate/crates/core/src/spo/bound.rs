use crate::catalog::Catalog;
use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Upper bound on `optimal / greedy` for Zipf-valued instances:
///
/// ```text
/// 1 + (s_max / s_min) * ceil(M/s_max)^-gamma / sum_{i=1}^{floor(M/s_max)} i^-gamma
/// ```
pub fn delta_bound<T: Scalar>(catalog: &Catalog, capacity: u64, gamma: T) -> Result<T> {
    let s1 = catalog.largest_size();
    if capacity < s1 as u64 {
        return Err(Error::CapacityBelowLargestFile {
            capacity,
            largest: s1,
        });
    }
    let lo = capacity / s1 as u64;
    let hi = capacity.div_ceil(s1 as u64);
    let head: T = (1..=lo).map(|i| T::of_u64(i).powf(-gamma)).sum();
    let ratio = T::of_u64(s1 as u64) / T::of_u64(catalog.smallest_size() as u64);
    Ok(T::one() + ratio * T::of_u64(hi).powf(-gamma) / head)
}
