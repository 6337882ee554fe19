//! Weighted-coreset softmax attention.
//!
//! The library approximates softmax attention by attending over a small
//! weighted coreset of keys. Coresets are selected with a randomly pivoted
//! Nystrom procedure driven by the residual kernel diagonal, reweighted
//! optimally in the kernel feature space, and optionally binned for
//! parallel throughput. A compressed cache of coreset keys, reweighted
//! values, and normalisation weights replaces the full KV pair; the
//! weighted forward pass then runs in O(m·r·(d + d_v)).
//!
//! Modules:
//! - [`dense`]: matrices, norms, kernel blocks, recentring, Gaussian data.
//! - [`rng`]: seeded xoshiro256++ with Box–Muller normals.
//! - [`special`]: Lambert-W, rho0, binary entropy, binomial bound.
//! - [`temperature`]: the closed-form key/query rescaling parameter.
//! - [`rpnys`]: randomly pivoted Nystrom coreset selection.
//! - [`compresskv`]: the binned KV-compression pipeline.
//! - [`attention`]: exact and weighted-coreset attention plus diagnostics.
//! - [`guarantees`]: calculators for the theoretical rank/error formulas.
//! - [`oracle`]: slow independent reference implementations for tests.
//!
//! With the default `parallel` feature, row-level loops run on rayon;
//! results are bitwise independent of the thread count because every output
//! entry is reduced in a fixed order. Building with
//! `--no-default-features` gives a fully sequential fallback.

pub mod attention;
pub mod compresskv;
pub mod dense;
pub mod error;
pub mod guarantees;
pub mod oracle;
mod par;
pub mod rng;
pub mod rpnys;
pub mod special;
pub mod temperature;

pub use attention::{clip_bound, exact_attention, wildcat, wtd_attention, AttentionOutput};
pub use compresskv::{compress_kv, compress_kv_with_weights, CompressedCache};
pub use dense::{gen_gaussian, kernel_block, recenter_rows, DenseMatrix, KernelSpec};
pub use error::{Error, Result};
pub use guarantees::{taylor_order, taylor_residual, theorem_rank, GuaranteeReport};
pub use rpnys::{nystrom_apply, rpnys, RpnysResult};
pub use special::{binary_entropy, lambert_w0, log_binom_bound, rho0, LambertResult};
pub use temperature::{get_temperature, rho_of, TemperatureInputs};
