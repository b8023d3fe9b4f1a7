use clap::Args;
use serde::{Deserialize, Serialize};

use spixel::hadamard::{export_pattern_image, pattern_to_pgm, HadamardOrder};

use super::out_path;
use crate::manifest::Record;
use crate::Global;

#[derive(Args, Debug, Clone, Serialize, Deserialize)]
pub struct ExportPatternArgs {
    /// Comma-separated pattern indices in natural order.
    #[arg(long, env = "SPIXEL_INDICES", value_delimiter = ',', default_value = "0")]
    pub indices: Vec<usize>,

    /// Pattern side in pixels; a power of two.
    #[arg(long, env = "SPIXEL_SIDE", default_value_t = 32)]
    pub side: usize,
}

pub fn run(global: &Global, args: &ExportPatternArgs, record: &mut Record) -> anyhow::Result<()> {
    let order = HadamardOrder::from_side(args.side)?;
    for &i in &args.indices {
        let pattern = export_pattern_image(order, i)?;
        let path = out_path(global, &format!("pattern-{i}.pgm"));
        super::write_bytes(&path, &pattern_to_pgm(&pattern))?;
        println!("{}", path.display());
        record.output(&format!("pattern_{i}"), &path);
    }
    Ok(())
}
