//! Metrics, experiment protocols, and report/error-map emission.

pub mod error_map;
pub mod metrics;
pub mod protocol;

pub use error_map::emit_error_map;
pub use metrics::{relative_l2, MetricsReport, SplitMetrics};
pub use protocol::{
    ablation_reference, full_scale_reference, run_feature_dim_ablation, run_mass_reg_ablation,
    run_table1_protocol, write_protocol_outputs, AblationArm, ProtocolConfig, ProtocolOutcome,
};
