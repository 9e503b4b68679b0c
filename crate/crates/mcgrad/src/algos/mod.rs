//! Training procedures: test-function optimization, LQR policy-gradient
//! training, tree-critic policy gradients, and soft actor-critic.

pub mod lqr_train;
pub mod sac;
pub mod testfn;
pub mod tree_pg;

pub use lqr_train::{lqr_train, LqrTrainResult};
pub use sac::{sac_train, SacConfig, SacEpochStat, SacVariant};
pub use testfn::{optimize_test_function, test_function, TestFnName, TestFnOptions, TestFnTracePoint};
pub use tree_pg::{tree_mvd_pg, EpochStat, TreePgConfig};
