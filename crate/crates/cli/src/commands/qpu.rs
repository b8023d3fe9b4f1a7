use clap::Args;
use serde::{Deserialize, Serialize};

use spixel::qml::{classifier_parameter_count, N_CLASSES};
use spixel::qpu_time::{default_embedding_depth, depth_from_ansatz, element_time, epoch_time, HardwareProfile};
use spixel::qsim::AnsatzSpec;

use crate::manifest::Record;
use crate::Global;

#[derive(Args, Debug, Clone, Serialize, Deserialize)]
pub struct EstimateQpuTimeArgs {
    /// Single-qubit gate time in seconds.
    #[arg(long, env = "SPIXEL_T1Q")]
    pub t1q: f64,

    /// Two-qubit gate time in seconds.
    #[arg(long, env = "SPIXEL_T2Q")]
    pub t2q: f64,

    /// Per-circuit initialization, readout and delay time in seconds.
    #[arg(long, env = "SPIXEL_OVERHEAD")]
    pub overhead: f64,

    /// Shots per circuit.
    #[arg(long, env = "SPIXEL_SHOTS")]
    pub shots: u64,

    /// Qubits per circuit.
    #[arg(long, env = "SPIXEL_QUBITS", default_value_t = 6)]
    pub qubits: usize,

    /// Ansatz layers.
    #[arg(long, env = "SPIXEL_LAYERS", default_value_t = 6)]
    pub layers: usize,

    /// Single-qubit depth of the amplitude embedding; 2^qubits when omitted.
    #[arg(long, env = "SPIXEL_EMBED_1Q")]
    pub embed_1q: Option<u64>,

    /// Two-qubit depth of the amplitude embedding; 2^qubits when omitted.
    #[arg(long, env = "SPIXEL_EMBED_2Q")]
    pub embed_2q: Option<u64>,

    /// Total single-qubit depth, overriding the ansatz-derived value.
    #[arg(long, env = "SPIXEL_D1Q")]
    pub d1q: Option<u64>,

    /// Total two-qubit depth, overriding the ansatz-derived value.
    #[arg(long, env = "SPIXEL_D2Q")]
    pub d2q: Option<u64>,

    /// Trainable parameters; the ten-class classifier's count when omitted.
    #[arg(long, env = "SPIXEL_N_PARAMS")]
    pub n_params: Option<u64>,

    /// Training images per epoch.
    #[arg(long, env = "SPIXEL_DATASET", default_value_t = 60000)]
    pub dataset: u64,
}

pub fn run(_global: &Global, args: &EstimateQpuTimeArgs, record: &mut Record) -> anyhow::Result<()> {
    let hw = HardwareProfile {
        t_1q: args.t1q,
        t_2q: args.t2q,
        overhead: args.overhead,
        n_shots: args.shots,
    };
    hw.validate()?;
    let (e1, e2) = default_embedding_depth(args.qubits);
    let spec = AnsatzSpec::new(args.qubits, args.layers, vec![0.0; args.qubits * (args.layers + 1)])?;
    let mut depth = depth_from_ansatz(&spec, args.embed_1q.unwrap_or(e1), args.embed_2q.unwrap_or(e2), args.dataset);
    depth.d_1q = args.d1q.unwrap_or(depth.d_1q);
    depth.d_2q = args.d2q.unwrap_or(depth.d_2q);
    depth.n_params = args
        .n_params
        .unwrap_or(classifier_parameter_count(N_CLASSES, args.qubits, args.layers) as u64);
    let element = element_time(&hw, &depth)?;
    let total = epoch_time(&hw, &depth)?;

    println!("single-qubit depth   {}", depth.d_1q);
    println!("two-qubit depth      {}", depth.d_2q);
    println!("parameters           {}", depth.n_params);
    println!("circuits per sample  {}", 2 * depth.n_params + 1);
    println!("seconds per sample   {element:.6e} (one shot)");
    println!("shots                {}", hw.n_shots);
    println!("dataset              {}", depth.n_dataset);
    println!("hours per epoch      {:.3}", total / 3600.0);
    println!("total_seconds={total}");

    for (k, v) in [("d_1q", depth.d_1q), ("d_2q", depth.d_2q), ("n_params", depth.n_params)] {
        record.resolve(k, v);
    }
    record.metric("element_seconds", element);
    record.metric("total_seconds", total);
    Ok(())
}
