//! Random-walk kernels on `Z^d`: transition probabilities, truncated and full
//! Green functions, and bubble sums.

mod bubble;
mod field;
mod green;
mod io;
mod kernels;
mod symmetric;

pub use bubble::{bubble_sum, four_dim_bubble_envelope, BubbleVariant};
pub use field::{FieldKind, LatticeField};
pub use green::{green_limit, green_value, GreenLimit};
pub use io::{read_field_binary, write_field_binary, write_field_csv};
pub use kernels::{
    green_convolve, heat_kernel, heat_kernel_with_budget, return_probabilities,
    single_step_convolve, transition_probabilities, truncated_green, truncated_green_with_budget,
    KernelQuery, DEFAULT_MAX_FIELD_ENTRIES,
};
pub use symmetric::{SymDomain, SymField};

/// Graph distance `d(0, x)`, the `l1` norm.
pub fn graph_norm(x: &[i64]) -> u64 {
    x.iter().map(|c| c.unsigned_abs()).sum()
}

/// `<x> = max(2, d(0, x))`.
pub fn bracket(x: &[i64]) -> f64 {
    graph_norm(x).max(2) as f64
}
